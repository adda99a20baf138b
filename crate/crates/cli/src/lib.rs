//! Operator commands: synthetic data, training, validation, scheduling and reports.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use flexregion::band_estimator::BandError;
use flexregion::baselines::{fit_rc, rc_rmse, HvacSource};
use flexregion::data_model::{load_dataset, save_dataset, split_dataset, TrainingDataset};
use flexregion::pipeline::{train_model, BuildingModel, ClusterCount, CvMetric, PipelineError, PipelineParams};
use flexregion::model_selector::TreeParams;
use flexregion::region_builder::{FeasibleRegion, RegionError};
use flexregion::scheduler::{
    build_program, mitigation_metric, sample_load_noise, solve_program, violation_metric, Covariance, LoadNoiseSet,
    PlantCase, Schedule, ScheduleError, WindScenarioSet,
};
use flexregion::synthetic_plant::{generate_days, DayWeather, HvacMode, PlantConfig, PlantState, WeatherGenerator};

pub const REPORT_SCHEMA: &str = "flexregion.report/1";
pub const TRUTH_SCHEMA: &str = "flexregion.truth/1";

/// Marks errors that should exit with the numerical-failure code.
#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "numerical failure: {}", self.0)
    }
}

impl std::error::Error for NumericalFailure {}

fn numerical(msg: impl fmt::Display) -> anyhow::Error {
    anyhow::Error::new(NumericalFailure(msg.to_string()))
}

fn is_numerical_band(e: &BandError) -> bool {
    matches!(e, BandError::Solver { .. } | BandError::Optim(_))
}

fn pipeline_error(e: PipelineError, building: &str) -> anyhow::Error {
    let num = match &e {
        PipelineError::Band { source, .. } => is_numerical_band(source),
        PipelineError::Assemble(_) => true,
        PipelineError::Region { source, .. } => matches!(source, RegionError::Optim(_) | RegionError::Empty(_)),
        _ => false,
    };
    if num {
        numerical(format!("{building}: {e}"))
    } else {
        anyhow!("{building}: {e}")
    }
}

fn schedule_error(e: ScheduleError) -> anyhow::Error {
    match e {
        ScheduleError::Solve(_) | ScheduleError::Optim(_) => numerical(e),
        other => anyhow!(other),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data_dir: PathBuf,
    pub bundle_dir: PathBuf,
    pub report_dir: PathBuf,
    /// `scenario,hour,generation_kwh` CSV; synthetic scenarios when absent.
    pub wind_scenarios: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            data_dir: "data".into(),
            bundle_dir: "bundles".into(),
            report_dir: "reports".into(),
            wind_scenarios: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub periods: usize,
    /// Train, cross-validation and test days.
    pub days: [usize; 3],
    /// Plant presets, one building each.
    pub buildings: Vec<String>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            periods: 24,
            days: [300, 100, 100],
            buildings: vec!["office_large".into(), "office_small".into(), "retail".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub alpha: f64,
    pub grid_size: usize,
    /// Candidate cluster counts for cross-validation.
    pub clusters: Vec<usize>,
    /// Skips cross-validation when set.
    pub fixed_clusters: Option<usize>,
    pub per_period: bool,
    pub cv_metric: CvMetric,
    pub tree_max_depth: usize,
    pub tree_min_leaf: usize,
    pub restarts: usize,
    pub ordering_rows: bool,
    pub mode: HvacMode,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let p = PipelineParams::default();
        Self {
            alpha: p.alpha,
            grid_size: p.grid_size,
            clusters: vec![1, 2, 3],
            fixed_clusters: None,
            per_period: false,
            cv_metric: p.cv_metric,
            tree_max_depth: p.tree.max_depth,
            tree_min_leaf: p.tree.min_leaf,
            restarts: p.restarts,
            ordering_rows: p.ordering_rows,
            mode: p.mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerSection {
    /// Energy price per period; a single value is repeated over the day.
    pub tau: Vec<f64>,
    /// Balancing compensation used for the schedule and the α sweep.
    pub v: f64,
    pub v_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub wind_scenarios: usize,
    pub noise_scenarios: usize,
    /// Wind capacity as a fraction of the peak aggregate load limit.
    pub wind_capacity_fraction: f64,
    /// Per-period load-noise std as a fraction of each building's p̂ᵐᵃˣ.
    pub noise_std_fraction: f64,
    /// Test-day index to schedule; the first day with non-empty regions when absent.
    pub day: Option<usize>,
}

impl Default for SchedulerSection {
    fn default() -> Self {
        Self {
            tau: vec![1.0],
            v: 1.0,
            v_grid: vec![0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0],
            alpha_grid: vec![0.01, 0.05, 0.1, 0.3],
            wind_scenarios: 100,
            noise_scenarios: 10,
            wind_capacity_fraction: 1.0 / 3.0,
            noise_std_fraction: 0.01,
            day: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub data: DataSection,
    pub pipeline: PipelineSection,
    pub scheduler: SchedulerSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            paths: Paths::default(),
            data: DataSection::default(),
            pipeline: PipelineSection::default(),
            scheduler: SchedulerSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).context("config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml_str(&s)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.pipeline;
        let s = &self.scheduler;
        let alpha_ok = |a: f64| a > 0.0 && a < 1.0;
        if !alpha_ok(p.alpha) || !s.alpha_grid.iter().all(|&a| alpha_ok(a)) {
            bail!("alpha values must lie in (0, 1)");
        }
        if p.grid_size < 2 {
            bail!("pipeline.grid_size must be at least 2");
        }
        if self.data.periods == 0 || 24 % self.data.periods != 0 {
            bail!("data.periods must divide 24");
        }
        if self.data.buildings.is_empty() {
            bail!("data.buildings is empty");
        }
        for b in &self.data.buildings {
            if PlantConfig::preset(b).is_none() {
                bail!("unknown plant preset {b:?}");
            }
        }
        if self.data.days[0] == 0 {
            bail!("need at least one training day");
        }
        match p.fixed_clusters {
            Some(0) => bail!("pipeline.fixed_clusters must be at least 1"),
            None if p.clusters.is_empty() || p.clusters.contains(&0) => bail!("pipeline.clusters must be non-empty and positive"),
            _ => {}
        }
        if !(s.tau.len() == 1 || s.tau.len() == self.data.periods) || s.tau.iter().any(|v| !v.is_finite()) {
            bail!("scheduler.tau must have 1 or T finite entries");
        }
        if !(s.v >= 0.0) || s.v_grid.iter().any(|v| !(*v >= 0.0)) {
            bail!("v values must be >= 0");
        }
        if s.wind_scenarios == 0 || s.noise_scenarios == 0 {
            bail!("scenario counts must be positive");
        }
        if !(s.wind_capacity_fraction > 0.0) || !(s.noise_std_fraction >= 0.0) {
            bail!("wind_capacity_fraction must be > 0 and noise_std_fraction >= 0");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    fn pipeline_params(&self) -> PipelineParams {
        let p = &self.pipeline;
        PipelineParams {
            alpha: p.alpha,
            grid_size: p.grid_size,
            mode: p.mode,
            cluster_seed: self.seed,
            restarts: p.restarts,
            tree: TreeParams { max_depth: p.tree_max_depth, min_leaf: p.tree_min_leaf },
            ordering_rows: p.ordering_rows,
            cv_metric: p.cv_metric,
        }
    }

    fn cluster_count(&self) -> ClusterCount {
        match self.pipeline.fixed_clusters {
            Some(c) => ClusterCount::Fixed(c),
            None => ClusterCount::Select { candidates: self.pipeline.clusters.clone(), per_period: self.pipeline.per_period },
        }
    }
}

/// A validated config bound to the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: RunConfig,
    pub root: PathBuf,
    pub hash: String,
}

impl Run {
    pub fn new(config: RunConfig, root: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        let hash = config.hash();
        Ok(Self { config, root: root.into(), hash })
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn data_dir(&self, building: &str) -> PathBuf {
        self.resolve(&self.config.paths.data_dir).join(building)
    }

    pub fn bundle_path(&self, building: &str) -> PathBuf {
        self.resolve(&self.config.paths.bundle_dir).join(format!("{building}.json"))
    }

    pub fn report_dir(&self) -> PathBuf {
        self.resolve(&self.config.paths.report_dir)
    }

    fn report_path(&self, name: &str) -> Result<PathBuf> {
        let dir = self.report_dir();
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir.join(name))
    }

    fn header(&self) -> String {
        format!("# schema={REPORT_SCHEMA} config_hash={}\n", self.hash)
    }

    fn write_csv(&self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let path = self.report_path(name)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(columns)?;
        for r in rows {
            w.write_record(r)?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?;
        write_file(&path, &(self.header() + &body))?;
        Ok(path)
    }

    fn load_split(&self, building: &str, name: &str) -> Result<TrainingDataset> {
        let path = self.data_dir(building).join(format!("{name}.csv"));
        if !path.exists() {
            bail!("{} not found (run generate-data first)", path.display());
        }
        load_dataset(&path, self.config.data.periods).with_context(|| format!("loading {}", path.display()))
    }

    fn load_bundle(&self, building: &str) -> Result<BuildingModel> {
        let path = self.bundle_path(building);
        let s = fs::read_to_string(&path).with_context(|| format!("reading bundle {} (run train first)", path.display()))?;
        let file: BundleFile = serde_json::from_str(&s).with_context(|| format!("parsing {}", path.display()))?;
        if file.schema != REPORT_SCHEMA || file.model.schema != flexregion::pipeline::BUNDLE_SCHEMA {
            bail!("bundle {} has schema {:?}/{:?}", path.display(), file.schema, file.model.schema);
        }
        if file.model.periods != self.config.data.periods {
            bail!("bundle {} has T={}, config T={}", path.display(), file.model.periods, self.config.data.periods);
        }
        Ok(file.model)
    }

    fn load_truth(&self, building: &str) -> Result<TruthFile> {
        let path = self.data_dir(building).join("truth.json");
        let s = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let t: TruthFile = serde_json::from_str(&s).with_context(|| format!("parsing {}", path.display()))?;
        if t.schema != TRUTH_SCHEMA {
            bail!("{} has schema {:?}", path.display(), t.schema);
        }
        Ok(t)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn f(v: f64) -> String {
    format!("{v}")
}

/// Generator-side ground truth needed to score schedules on the true plant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthFile {
    pub schema: String,
    pub config_hash: String,
    pub building: String,
    pub plant: PlantConfig,
    /// Indexed by `day_id − 1`.
    pub weather: Vec<DayWeather>,
    pub initial_states: Vec<PlantState>,
    pub hvac: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleFile {
    pub schema: String,
    pub config_hash: String,
    pub building: String,
    pub model: BuildingModel,
}

/// Writes train/cv/test CSVs and the ground-truth file per building.
pub fn cmd_generate_data(run: &Run) -> Result<Vec<PathBuf>> {
    let cfg = &run.config;
    let [n_train, n_cv, n_test] = cfg.data.days;
    let total = n_train + n_cv + n_test;
    let mut written = Vec::new();
    for name in &cfg.data.buildings {
        let plant = PlantConfig::preset(name).ok_or_else(|| anyhow!("unknown preset {name}"))?;
        // Same seed for every building: one shared weather realization.
        let g = generate_days(&plant, &WeatherGenerator::default(), total, cfg.data.periods, cfg.seed)
            .with_context(|| format!("simulating {name}"))?;
        let (tr, cv, te) = split_dataset(&g.dataset, (n_train, n_cv, n_test), cfg.seed.wrapping_add(1))?;
        let dir = run.data_dir(name);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        for (split, ds) in [("train", &tr), ("cv", &cv), ("test", &te)] {
            let path = dir.join(format!("{split}.csv"));
            save_dataset(ds, &path).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
        let truth = TruthFile {
            schema: TRUTH_SCHEMA.into(),
            config_hash: run.hash.clone(),
            building: name.clone(),
            plant,
            weather: g.weather,
            initial_states: g.initial_states,
            hvac: g.hvac,
        };
        let path = dir.join("truth.json");
        write_json(&path, &truth)?;
        written.push(path);
    }
    Ok(written)
}

/// Trains one bundle per building; writes the CV curve when C is selected.
pub fn cmd_train(run: &Run) -> Result<Vec<PathBuf>> {
    let cfg = &run.config;
    let params = cfg.pipeline_params();
    let count = cfg.cluster_count();
    let mut written = Vec::new();
    let mut timing = Vec::new();
    for name in &cfg.data.buildings {
        let train = run.load_split(name, "train")?;
        let cv = if matches!(count, ClusterCount::Select { .. }) { Some(run.load_split(name, "cv")?) } else { None };
        let start = Instant::now();
        let model = train_model(&train, cv.as_ref(), &count, &params).map_err(|e| pipeline_error(e, name))?;
        timing.push(vec![format!("train:{name}"), f(start.elapsed().as_secs_f64())]);
        if let Some(sel) = &model.selection {
            let rows = sel
                .curve
                .iter()
                .map(|p| vec![p.clusters.to_string(), f(p.rmse), f(p.out_of_band), f(p.tree_accuracy)])
                .collect::<Vec<_>>();
            written.push(run.write_csv(&format!("cv_{name}.csv"), &["clusters", "cv_rmse", "cv_out_of_band", "tree_accuracy"], &rows)?);
        }
        let path = run.bundle_path(name);
        write_json(
            &path,
            &BundleFile { schema: REPORT_SCHEMA.into(), config_hash: run.hash.clone(), building: name.clone(), model },
        )?;
        written.push(path);
    }
    write_timing(run, "timing_train.csv", &timing)?;
    Ok(written)
}

/// Wall-clock timings go to their own file so the other artifacts stay byte-reproducible.
fn write_timing(run: &Run, name: &str, rows: &[Vec<String>]) -> Result<()> {
    run.write_csv(name, &["stage", "seconds"], rows).map(|_| ())
}

/// Test-set statistics per building, side by side with the RC baseline.
pub fn cmd_validate(run: &Run) -> Result<PathBuf> {
    let cfg = &run.config;
    let mut rows = Vec::new();
    for name in &cfg.data.buildings {
        let model = run.load_bundle(name)?;
        let train = run.load_split(name, "train")?;
        let test = run.load_split(name, "test")?;
        if test.is_empty() {
            bail!("{name}: test set is empty");
        }
        let ev = model.evaluate(&test).map_err(|e| pipeline_error(e, name))?;
        let rc = fit_rc(&train, HvacSource::MinObservedBase).map_err(|e| anyhow!("{name}: RC fit: {e}"))?;
        let rc_err = rc_rmse(&rc, &test, HvacSource::MinObservedBase).map_err(|e| anyhow!("{name}: RC: {e}"))?;
        let clusters = model.num_clusters();
        let shared = if clusters.iter().all(|&c| c == clusters[0]) { clusters[0].to_string() } else { "per_period".into() };
        rows.push(vec![
            name.clone(),
            shared,
            f(model.alpha),
            f(ev.out_of_band),
            f(ev.band_rmse),
            f(ev.mean_width),
            f(ev.central_rmse),
            f(rc_err),
            f(ev.tree_accuracy),
        ]);
    }
    run.write_csv(
        "validation.csv",
        &[
            "building",
            "clusters",
            "alpha",
            "test_out_of_band",
            "band_rmse",
            "mean_band_width",
            "central_rmse",
            "rc_rmse",
            "tree_accuracy",
        ],
        &rows,
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub schema: String,
    pub config_hash: String,
    pub day_index: usize,
    pub day_id: u32,
    pub buildings: Vec<String>,
    pub alpha: f64,
    pub v: f64,
    pub mitigation: f64,
    /// Expected comfort violation on the true plants, per building.
    pub violation: Vec<f64>,
    pub wind_capacity: f64,
    pub num_vars: usize,
    pub schedule: Schedule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub alpha: f64,
    pub v: f64,
    pub mitigation: f64,
    pub violation: Vec<f64>,
    pub schedule: Schedule,
    pub num_vars: usize,
}

impl SweepPoint {
    pub fn total_violation(&self) -> f64 {
        self.violation.iter().sum()
    }
}

/// Loaded inputs for scheduling one day.
pub struct ScheduleInputs {
    pub models: Vec<BuildingModel>,
    pub tests: Vec<TrainingDataset>,
    pub truths: Vec<TruthFile>,
}

impl ScheduleInputs {
    pub fn load(run: &Run) -> Result<Self> {
        let mut models = Vec::new();
        let mut tests = Vec::new();
        let mut truths = Vec::new();
        for name in &run.config.data.buildings {
            models.push(run.load_bundle(name)?);
            let te = run.load_split(name, "test")?;
            if te.is_empty() {
                bail!("{name}: test set is empty");
            }
            tests.push(te);
            truths.push(run.load_truth(name)?);
        }
        let n = tests[0].len();
        if tests.iter().any(|t| t.len() != n) {
            bail!("buildings have different test-set sizes");
        }
        Ok(Self { models, tests, truths })
    }

    pub fn regions(&self, day: usize, alpha: f64) -> Result<Vec<FeasibleRegion>, PipelineError> {
        self.models
            .iter()
            .zip(&self.tests)
            .map(|(m, te)| m.with_alpha(alpha)?.region_for_day(&te.days()[day]))
            .collect()
    }

    pub fn cases(&self, day: usize) -> Result<Vec<PlantCase>> {
        self.tests
            .iter()
            .zip(&self.truths)
            .map(|(te, tr)| {
                let id = te.days()[day].day_id as usize;
                let (w, x0) = tr
                    .weather
                    .get(id - 1)
                    .zip(tr.initial_states.get(id - 1))
                    .ok_or_else(|| anyhow!("{}: no ground truth for day {id}", tr.building))?;
                Ok(PlantCase { config: tr.plant.clone(), initial_state: x0.clone(), weather: w.clone() })
            })
            .collect()
    }
}

/// Everything `cmd_schedule` computes, for callers that want the numbers.
pub struct ScheduleOutcome {
    pub day_index: usize,
    pub v_sweep: Vec<SweepPoint>,
    pub alpha_sweep: Vec<SweepPoint>,
    pub main: SweepPoint,
    pub wind: WindScenarioSet,
    pub noise: LoadNoiseSet,
    pub written: Vec<PathBuf>,
}

fn alphas_needed(cfg: &RunConfig) -> Vec<f64> {
    let mut a = cfg.scheduler.alpha_grid.clone();
    a.push(cfg.pipeline.alpha);
    a
}

pub fn choose_day(run: &Run, inputs: &ScheduleInputs) -> Result<usize> {
    let alphas = alphas_needed(&run.config);
    let n = inputs.tests[0].len();
    if let Some(d) = run.config.scheduler.day {
        if d >= n {
            bail!("scheduler.day {d} outside the {n}-day test set");
        }
        for &a in &alphas {
            inputs.regions(d, a).map_err(|e| numerical(format!("day {d}, alpha {a}: {e}")))?;
        }
        return Ok(d);
    }
    (0..n)
        .find(|&d| alphas.iter().all(|&a| inputs.regions(d, a).is_ok()))
        .ok_or_else(|| numerical("no test day has non-empty regions for every building and alpha"))
}

/// Solves the aggregator program over the v and α grids for one test day.
pub fn run_schedule(run: &Run, inputs: &ScheduleInputs) -> Result<ScheduleOutcome> {
    let cfg = &run.config;
    let s = &cfg.scheduler;
    let periods = cfg.data.periods;
    let mut timing = Vec::new();
    let day = choose_day(run, inputs)?;
    let cases = inputs.cases(day)?;
    let base_regions = inputs.regions(day, cfg.pipeline.alpha).map_err(|e| numerical(e))?;

    let peak = (0..periods).map(|t| base_regions.iter().map(|r| r.params[t].p_max).sum::<f64>()).fold(0.0, f64::max);
    let capacity = s.wind_capacity_fraction * peak;
    let wind = match &run.config.paths.wind_scenarios {
        Some(p) => WindScenarioSet::load_csv(&run.resolve(p), periods).map_err(|e| anyhow!(e))?,
        None => WindScenarioSet::synthetic(periods, s.wind_scenarios, capacity, cfg.seed.wrapping_add(2)).map_err(schedule_error)?,
    };
    let covs: Vec<Covariance> = base_regions
        .iter()
        .map(|r| Covariance::Diagonal(r.params.iter().map(|p| (s.noise_std_fraction * p.p_max).powi(2)).collect()))
        .collect();
    let noise = sample_load_noise(&covs, periods, s.noise_scenarios, cfg.seed.wrapping_add(3)).map_err(schedule_error)?;
    let tau: Vec<f64> = if s.tau.len() == 1 { vec![s.tau[0]; periods] } else { s.tau.clone() };

    let mut cache: BTreeMap<(u64, u64), SweepPoint> = BTreeMap::new();
    let mut solve = |alpha: f64, v: f64, timing: &mut Vec<Vec<String>>| -> Result<SweepPoint> {
        if let Some(p) = cache.get(&(alpha.to_bits(), v.to_bits())) {
            return Ok(p.clone());
        }
        let start = Instant::now();
        let regions = inputs.regions(day, alpha).map_err(numerical)?;
        let sp = build_program(&regions, &tau, v, &wind, &noise).map_err(schedule_error)?;
        let schedule = solve_program(&sp).map_err(schedule_error)?;
        let mitigation = mitigation_metric(&schedule, &wind, &noise).map_err(schedule_error)?;
        let violation = violation_metric(&schedule, &cases, &wind).map_err(schedule_error)?;
        timing.push(vec![format!("solve:alpha={alpha}:v={v}"), f(start.elapsed().as_secs_f64())]);
        let p = SweepPoint { alpha, v, mitigation, violation, schedule, num_vars: sp.num_vars() };
        cache.insert((alpha.to_bits(), v.to_bits()), p.clone());
        Ok(p)
    };
    let v_sweep = s.v_grid.iter().map(|&v| solve(cfg.pipeline.alpha, v, &mut timing)).collect::<Result<Vec<_>>>()?;
    let alpha_sweep = s.alpha_grid.iter().map(|&a| solve(a, s.v, &mut timing)).collect::<Result<Vec<_>>>()?;
    let main = solve(cfg.pipeline.alpha, s.v, &mut timing)?;

    let mut written = Vec::new();
    let names = &cfg.data.buildings;
    let mut cols: Vec<String> = ["alpha", "v", "mitigation", "energy_cost", "balancing_cost", "objective", "violation_total"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend(names.iter().map(|n| format!("violation_{n}")));
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let row = |p: &SweepPoint| {
        let mut r = vec![
            f(p.alpha),
            f(p.v),
            f(p.mitigation),
            f(p.schedule.energy_cost),
            f(p.schedule.balancing_cost),
            f(p.schedule.objective),
            f(p.total_violation()),
        ];
        r.extend(p.violation.iter().map(|&x| f(x)));
        r
    };
    written.push(run.write_csv("sweep_v.csv", &col_refs, &v_sweep.iter().map(row).collect::<Vec<_>>())?);
    written.push(run.write_csv("sweep_alpha.csv", &col_refs, &alpha_sweep.iter().map(row).collect::<Vec<_>>())?);
    let report = ScheduleReport {
        schema: REPORT_SCHEMA.into(),
        config_hash: run.hash.clone(),
        day_index: day,
        day_id: inputs.tests[0].days()[day].day_id,
        buildings: names.clone(),
        alpha: main.alpha,
        v: main.v,
        mitigation: main.mitigation,
        violation: main.violation.clone(),
        wind_capacity: capacity,
        num_vars: main.num_vars,
        schedule: main.schedule.clone(),
    };
    let path = run.report_path("schedule.json")?;
    write_json(&path, &report)?;
    written.push(path);
    write_timing(run, "timing_schedule.csv", &timing)?;
    Ok(ScheduleOutcome { day_index: day, v_sweep, alpha_sweep, main, wind, noise, written })
}

pub fn cmd_schedule(run: &Run) -> Result<Vec<PathBuf>> {
    let inputs = ScheduleInputs::load(run)?;
    Ok(run_schedule(run, &inputs)?.written)
}

/// Per-building region tables and tree dumps from the trained bundles.
pub fn cmd_report(run: &Run) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for name in &run.config.data.buildings {
        let model = run.load_bundle(name)?;
        let mut rows = Vec::new();
        let mut trees = run.header();
        for pm in &model.models {
            let sizes = pm.clusters.sizes();
            for (c, r) in pm.regions.iter().enumerate() {
                rows.push(vec![
                    pm.t.to_string(),
                    (c + 1).to_string(),
                    sizes[c].to_string(),
                    f(r.p_min),
                    f(r.p_max),
                    f(r.theta_min),
                    f(r.theta_max),
                    f(r.band.beta),
                    f(r.band.pi_out),
                    r.band.alpha_unmet.to_string(),
                ]);
            }
            trees += &format!("t = {} (training accuracy {:.3})\n{}\n", pm.t, pm.tree.training_accuracy, pm.tree.dump());
        }
        written.push(run.write_csv(
            &format!("regions_{name}.csv"),
            &["t", "cluster", "days", "p_min", "p_max", "theta_min", "theta_max", "beta", "pi_out", "alpha_unmet"],
            &rows,
        )?);
        let path = run.report_path(&format!("trees_{name}.txt"))?;
        write_file(&path, &trees)?;
        written.push(path);
    }
    Ok(written)
}
