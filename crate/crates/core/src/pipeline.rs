//! End-to-end training of a building model: clustering, band sweeps, limits and
//! selector trees for every period, plus cross-validated choice of the cluster count.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::band_estimator::{band_samples, select_beta, solve_blsef, sweep_records, BandError, BandParameters, BetaRecord};
use crate::clustering::{cluster_period, ClusterError, ClusterModel, DEFAULT_RESTARTS};
use crate::data_model::{DataError, DayRecord, TrainingDataset};
use crate::model_selector::{train_tree, FeatureRow, SelectorError, SelectorTree, TreeParams};
use crate::region_builder::{assemble_region, estimate_limits, FeasibleRegion, Limits, RegionError, RegionParameters};
use crate::synthetic_plant::HvacMode;

pub const BUNDLE_SCHEMA: &str = "flexregion.bundle/1";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("clustering (t={t}): {source}")]
    Cluster { t: usize, source: ClusterError },
    #[error("band fit (t={t}, cluster {c}): {source}", c = .cluster + 1)]
    Band { t: usize, cluster: usize, source: BandError },
    #[error("limits (t={t}): {source}")]
    Region { t: usize, source: RegionError },
    #[error("region assembly: {0}")]
    Assemble(RegionError),
    #[error("selector tree (t={t}): {source}")]
    Selector { t: usize, source: SelectorError },
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("cluster count selection needs a cross-validation set")]
    NeedCv,
    #[error("invalid cluster candidates: {0}")]
    Candidates(String),
    #[error("alpha {0} outside (0, 1)")]
    Alpha(f64),
    #[error("beta grid needs at least 2 points, got {0}")]
    GridSize(usize),
    #[error("bundle schema {found:?}, expected {expected:?}")]
    Schema { found: String, expected: String },
    #[error("bundle periods ({bundle}) differ from data ({data})")]
    Periods { bundle: usize, data: usize },
    #[error("evaluation set is empty")]
    EmptyEvaluation,
    #[error("bundle json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Which band scores the cross-validation days when choosing C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CvMetric {
    /// Collapsed β = 0 fit: squared prediction error of φⁱⁿ.
    #[default]
    Central,
    /// Band selected for α: squared distance outside the band.
    Band,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterCount {
    Fixed(usize),
    Select { candidates: Vec<usize>, per_period: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub alpha: f64,
    pub grid_size: usize,
    pub mode: HvacMode,
    pub cluster_seed: u64,
    pub restarts: usize,
    pub tree: TreeParams,
    pub ordering_rows: bool,
    pub cv_metric: CvMetric,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            grid_size: 100,
            mode: HvacMode::Cooling,
            cluster_seed: 0,
            restarts: DEFAULT_RESTARTS,
            tree: TreeParams::default(),
            ordering_rows: true,
            cv_metric: CvMetric::Central,
        }
    }
}

impl PipelineParams {
    fn validate(&self) -> Result<(), PipelineError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(PipelineError::Alpha(self.alpha));
        }
        if self.grid_size < 2 {
            return Err(PipelineError::GridSize(self.grid_size));
        }
        Ok(())
    }
}

/// Everything learned for one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodModel {
    pub t: usize,
    pub clusters: ClusterModel,
    pub limits: Vec<Limits>,
    /// Full β sweep per cluster; the first record is the collapsed β = 0 fit.
    pub sweeps: Vec<Vec<BetaRecord>>,
    /// Φ_{c,t} at the bundle's α.
    pub regions: Vec<RegionParameters>,
    pub tree: SelectorTree,
}

impl PeriodModel {
    pub fn central(&self, c: usize) -> &BandParameters {
        &self.sweeps[c][0].params
    }

    fn reselect(&mut self, alpha: f64) {
        for (region, records) in self.regions.iter_mut().zip(&self.sweeps) {
            let (i, unmet) = select_beta(records, alpha);
            let mut band = records[i].params.clone();
            band.alpha_unmet = unmet;
            region.band = band;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub clusters: usize,
    pub rmse: f64,
    /// Per-period RMSE, index `t − 1`.
    pub rmse_by_period: Vec<f64>,
    pub out_of_band: f64,
    pub tree_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSelection {
    /// Argmin of the pooled CV-RMSE, ties to the smaller C.
    pub shared: usize,
    /// Per-period argmin, index `t − 1`.
    pub per_period: Vec<usize>,
    pub curve: Vec<CvPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingModel {
    pub schema: String,
    pub periods: usize,
    pub mode: HvacMode,
    pub alpha: f64,
    pub grid_size: usize,
    pub ordering_rows: bool,
    pub selection: Option<ClusterSelection>,
    pub models: Vec<PeriodModel>,
}

/// Out-of-sample statistics of a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub samples: usize,
    pub out_of_band: f64,
    pub band_rmse: f64,
    pub mean_width: f64,
    pub central_rmse: f64,
    /// Agreement of the tree with nearest-centroid labels of the evaluation days.
    pub tree_accuracy: f64,
}

impl BuildingModel {
    pub fn num_clusters(&self) -> Vec<usize> {
        self.models.iter().map(|m| m.clusters.num_clusters).collect()
    }

    /// Same model with every band re-selected from the stored sweeps for `alpha`.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self, PipelineError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(PipelineError::Alpha(alpha));
        }
        let mut m = self.clone();
        m.alpha = alpha;
        for pm in &mut m.models {
            pm.reselect(alpha);
        }
        Ok(m)
    }

    pub fn predict_clusters(&self, day: &DayRecord) -> Result<Vec<usize>, PipelineError> {
        self.models
            .iter()
            .map(|pm| {
                pm.tree
                    .predict_cluster(&FeatureRow::from_day(day, pm.t))
                    .map(|c| c.min(pm.regions.len() - 1))
                    .map_err(|source| PipelineError::Selector { t: pm.t, source })
            })
            .collect()
    }

    /// Φ for a new day from its explanatory variables.
    pub fn region_parameters_for_day(&self, day: &DayRecord) -> Result<Vec<RegionParameters>, PipelineError> {
        let cs = self.predict_clusters(day)?;
        Ok(self.models.iter().zip(cs).map(|(pm, c)| pm.regions[c].clone()).collect())
    }

    /// Region for the day's context (initial indoor temperature and outdoor forecast).
    pub fn region_for_day(&self, day: &DayRecord) -> Result<FeasibleRegion, PipelineError> {
        self.check_periods(day.periods())?;
        let params = self.region_parameters_for_day(day)?;
        assemble_region(params, day.initial_indoor_temp, day.outdoor_temp.clone(), self.ordering_rows)
            .map_err(PipelineError::Assemble)
    }

    fn check_periods(&self, data: usize) -> Result<(), PipelineError> {
        if data != self.periods {
            return Err(PipelineError::Periods { bundle: self.periods, data });
        }
        Ok(())
    }

    pub fn evaluate(&self, ds: &TrainingDataset) -> Result<Evaluation, PipelineError> {
        if ds.is_empty() {
            return Err(PipelineError::EmptyEvaluation);
        }
        self.check_periods(ds.periods())?;
        let (mut out, mut sq, mut width, mut csq, mut hits, mut n) = (0usize, 0.0, 0.0, 0.0, 0usize, 0usize);
        for (k, day) in ds.days().iter().enumerate() {
            let cs = self.predict_clusters(day)?;
            for (pm, &c) in self.models.iter().zip(&cs) {
                let t = pm.t;
                let y = day.indoor_temp[t - 1];
                let load = &day.load[..t];
                let band_err = |b: &BandParameters| -> Result<(f64, f64, f64), PipelineError> {
                    let (lo, hi) = b
                        .predict_band(day.initial_indoor_temp, day.outdoor_temp[t - 1], load)
                        .map_err(|source| PipelineError::Band { t, cluster: c, source })?;
                    Ok(((y - hi).max(0.0) + (lo - y).max(0.0), lo, hi))
                };
                let (e, lo, hi) = band_err(&pm.regions[c].band)?;
                if y > hi || y < lo {
                    out += 1;
                }
                sq += e * e;
                width += hi - lo;
                let (_, clo, _) = band_err(pm.central(c))?;
                csq += (y - clo).powi(2);
                let w = ds.build_feature_vector(k, t)?;
                let truth = pm.clusters.label(&w).map_err(|source| PipelineError::Cluster { t, source })?;
                if truth == c {
                    hits += 1;
                }
                n += 1;
            }
        }
        let nf = n as f64;
        Ok(Evaluation {
            samples: n,
            out_of_band: out as f64 / nf,
            band_rmse: (sq / nf).sqrt(),
            mean_width: width / nf,
            central_rmse: (csq / nf).sqrt(),
            tree_accuracy: hits as f64 / nf,
        })
    }

    pub fn to_json(&self) -> Result<String, PipelineError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, PipelineError> {
        #[derive(Deserialize)]
        struct Header {
            schema: String,
        }
        let h: Header = serde_json::from_str(s)?;
        if h.schema != BUNDLE_SCHEMA {
            return Err(PipelineError::Schema { found: h.schema, expected: BUNDLE_SCHEMA.into() });
        }
        Ok(serde_json::from_str(s)?)
    }
}

/// Fits one period with `c` clusters. Without `full`, only the central fit is solved.
fn fit_period(
    ds: &TrainingDataset,
    t: usize,
    c: usize,
    params: &PipelineParams,
    full: bool,
) -> Result<PeriodModel, PipelineError> {
    let clusters = cluster_period(ds, t, c, params.cluster_seed, params.restarts)
        .map_err(|source| PipelineError::Cluster { t, source })?;
    let mut limits = Vec::with_capacity(c);
    let mut sweeps = Vec::with_capacity(c);
    for (ci, members) in clusters.members.iter().enumerate() {
        limits.push(estimate_limits(ds, members, t).map_err(|source| PipelineError::Region { t, source })?);
        let data = band_samples(ds, members, t);
        let band = |source| PipelineError::Band { t, cluster: ci, source };
        let records = if full {
            sweep_records(&data, params.grid_size, params.mode).map_err(band)?
        } else {
            vec![solve_blsef(&data, 0.0, params.mode).map_err(band)?]
        };
        sweeps.push(records);
    }
    let rows: Vec<FeatureRow> = ds.days().iter().map(|d| FeatureRow::from_day(d, t)).collect();
    let tree = train_tree(t, &rows, &clusters.labels, c, params.tree)
        .map_err(|source| PipelineError::Selector { t, source })?;
    let regions = limits
        .iter()
        .zip(&sweeps)
        .map(|(l, r)| RegionParameters::new(*l, r[0].params.clone()))
        .collect();
    let mut pm = PeriodModel { t, clusters, limits, sweeps, regions, tree };
    pm.reselect(params.alpha);
    Ok(pm)
}

fn fit_all(ds: &TrainingDataset, counts: &[usize], params: &PipelineParams, full: bool) -> Result<Vec<PeriodModel>, PipelineError> {
    counts.iter().enumerate().map(|(i, &c)| fit_period(ds, i + 1, c, params, full)).collect()
}

/// Pooled and per-period CV scores of a fitted set of period models.
fn score(models: &[PeriodModel], cv: &TrainingDataset, metric: CvMetric) -> Result<(f64, Vec<f64>, f64, f64), PipelineError> {
    let mut by_t = vec![0.0; models.len()];
    let (mut out, mut hits, mut n) = (0usize, 0usize, 0usize);
    for (k, day) in cv.days().iter().enumerate() {
        for (i, pm) in models.iter().enumerate() {
            let t = pm.t;
            let c = pm
                .tree
                .predict_cluster(&FeatureRow::from_day(day, t))
                .map_err(|source| PipelineError::Selector { t, source })?
                .min(pm.regions.len() - 1);
            let band = match metric {
                CvMetric::Central => pm.central(c),
                CvMetric::Band => &pm.regions[c].band,
            };
            let (lo, hi) = band
                .predict_band(day.initial_indoor_temp, day.outdoor_temp[t - 1], &day.load[..t])
                .map_err(|source| PipelineError::Band { t, cluster: c, source })?;
            let y = day.indoor_temp[t - 1];
            let e = (y - hi).max(0.0) + (lo - y).max(0.0);
            by_t[i] += e * e;
            if y > hi || y < lo {
                out += 1;
            }
            let w = cv.build_feature_vector(k, t)?;
            if pm.clusters.label(&w).map_err(|source| PipelineError::Cluster { t, source })? == c {
                hits += 1;
            }
            n += 1;
        }
    }
    let total: f64 = by_t.iter().sum();
    let days = cv.len() as f64;
    Ok((
        (total / n as f64).sqrt(),
        by_t.iter().map(|s| (s / days).sqrt()).collect(),
        out as f64 / n as f64,
        hits as f64 / n as f64,
    ))
}

/// Runs the pipeline for every candidate C with identical seeds and scores each on `cv`.
pub fn select_num_clusters(
    train: &TrainingDataset,
    cv: &TrainingDataset,
    candidates: &[usize],
    params: &PipelineParams,
) -> Result<ClusterSelection, PipelineError> {
    params.validate()?;
    if candidates.is_empty() || candidates.iter().any(|&c| c == 0 || c > train.len()) {
        return Err(PipelineError::Candidates(format!("{candidates:?} not within [1, {}]", train.len())));
    }
    if cv.is_empty() {
        return Err(PipelineError::NeedCv);
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let full = params.cv_metric == CvMetric::Band;
    let mut curve = Vec::with_capacity(sorted.len());
    for &c in &sorted {
        let models = fit_all(train, &vec![c; train.periods()], params, full)?;
        let (rmse, rmse_by_period, out_of_band, tree_accuracy) = score(&models, cv, params.cv_metric)?;
        curve.push(CvPoint { clusters: c, rmse, rmse_by_period, out_of_band, tree_accuracy });
    }
    // Sorted ascending, so strict improvement keeps ties at the smaller C.
    let argmin = |f: &dyn Fn(&CvPoint) -> f64| {
        curve.iter().fold((curve[0].clusters, f(&curve[0])), |best, p| if f(p) < best.1 { (p.clusters, f(p)) } else { best }).0
    };
    let shared = argmin(&|p| p.rmse);
    let per_period = (0..train.periods()).map(|i| argmin(&|p| p.rmse_by_period[i])).collect();
    Ok(ClusterSelection { shared, per_period, curve })
}

/// Trains a building model. `cv` is required when the cluster count is selected.
pub fn train_model(
    train: &TrainingDataset,
    cv: Option<&TrainingDataset>,
    count: &ClusterCount,
    params: &PipelineParams,
) -> Result<BuildingModel, PipelineError> {
    params.validate()?;
    let (counts, selection) = match count {
        ClusterCount::Fixed(c) => {
            if *c == 0 || *c > train.len() {
                return Err(PipelineError::Candidates(format!("{c} not within [1, {}]", train.len())));
            }
            (vec![*c; train.periods()], None)
        }
        ClusterCount::Select { candidates, per_period } => {
            let cv = cv.ok_or(PipelineError::NeedCv)?;
            let sel = select_num_clusters(train, cv, candidates, params)?;
            let counts = if *per_period { sel.per_period.clone() } else { vec![sel.shared; train.periods()] };
            (counts, Some(sel))
        }
    };
    let models = fit_all(train, &counts, params, true)?;
    Ok(BuildingModel {
        schema: BUNDLE_SCHEMA.into(),
        periods: train.periods(),
        mode: params.mode,
        alpha: params.alpha,
        grid_size: params.grid_size,
        ordering_rows: params.ordering_rows,
        selection,
        models,
    })
}
