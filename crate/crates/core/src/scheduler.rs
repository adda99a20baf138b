//! Two-stage stochastic LP of an aggregator balancing wind forecast errors with
//! building flexibility regions, plus the mitigation and violation metrics.
//!
//! ```text
//! min  τᵀp^b + Σ_{w,b} π_w π_b v 1ᵀ s_{w,b}
//! s.t. p^b = Σ_i p^b_i
//!      p_{w,b} = Σ_i p_{i,w} + ε_b
//!      s_{w,b} ≥ ±(p^b − p_{w,b} + Δ_w)
//!      p^b_i ∈ P̂_i,  p_{i,w} ∈ P̂_i
//! ```

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optim::{self, ConvexProgram, OptimError, SolveSettings, SolveStatus};
use crate::region_builder::{FeasibleRegion, Polyhedron};
use crate::synthetic_plant::{check_feasible, DayWeather, PlantConfig, PlantError, PlantState};

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("invalid scenario set: {0}")]
    Scenarios(String),
    #[error("covariance {0} is not positive semidefinite")]
    NotPsd(usize),
    #[error("regions disagree on the number of periods")]
    Periods,
    #[error("no buildings")]
    NoBuildings,
    #[error("program {0:?}")]
    Solve(SolveStatus),
    #[error("expected absolute wind deviation is zero")]
    ZeroDeviation,
    #[error("wind csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Plant(#[from] PlantError),
}

fn check_probabilities(p: &[f64], n: usize) -> Result<(), ScheduleError> {
    if p.len() != n || p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(ScheduleError::Scenarios("probabilities must be non-negative and sum to 1".into()));
    }
    Ok(())
}

fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindScenarioSet {
    /// `ν_w`, kWh per period.
    pub scenarios: Vec<Vec<f64>>,
    pub probabilities: Vec<f64>,
}

impl WindScenarioSet {
    pub fn new(scenarios: Vec<Vec<f64>>, probabilities: Option<Vec<f64>>) -> Result<Self, ScheduleError> {
        let n = scenarios.len();
        if n == 0 {
            return Err(ScheduleError::Scenarios("no wind scenarios".into()));
        }
        let t = scenarios[0].len();
        if t == 0 || scenarios.iter().any(|s| s.len() != t) {
            return Err(ScheduleError::Scenarios("scenario lengths differ".into()));
        }
        if scenarios.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(ScheduleError::Scenarios("wind generation must be finite and >= 0".into()));
        }
        let probabilities = probabilities.unwrap_or_else(|| uniform(n));
        check_probabilities(&probabilities, n)?;
        Ok(Self { scenarios, probabilities })
    }

    pub fn periods(&self) -> usize {
        self.scenarios[0].len()
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.periods()];
        for (s, &p) in self.scenarios.iter().zip(&self.probabilities) {
            for (a, v) in m.iter_mut().zip(s) {
                *a += p * v;
            }
        }
        m
    }

    /// `Δ_w = ν_w − E[ν]`.
    pub fn deviations(&self) -> Vec<Vec<f64>> {
        let m = self.mean();
        self.scenarios.iter().map(|s| s.iter().zip(&m).map(|(v, a)| v - a).collect()).collect()
    }

    /// Seeded AR(1) forecast errors around a diurnal mean, clipped to `[0, capacity]`.
    pub fn synthetic(periods: usize, count: usize, capacity: f64, seed: u64) -> Result<Self, ScheduleError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let hours = 24.0 / periods as f64;
        let scenarios = (0..count)
            .map(|_| {
                let mut e = 0.08 * capacity * normal.sample(&mut rng);
                (1..=periods)
                    .map(|t| {
                        let h = (t as f64 - 0.5) * hours;
                        let mean = capacity * (0.45 + 0.15 * (2.0 * std::f64::consts::PI * (h - 3.0) / 24.0).cos());
                        e = 0.85 * e + 0.07 * capacity * normal.sample(&mut rng);
                        (mean + e).clamp(0.0, capacity) * hours
                    })
                    .collect()
            })
            .collect();
        Self::new(scenarios, None)
    }

    /// Reads `scenario,hour,generation_kwh` rows (scenario ids and hours 1-based, any order).
    pub fn from_csv<R: Read>(reader: R, periods: usize) -> Result<Self, ScheduleError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| ScheduleError::Csv(e.to_string()))?.clone();
        if header.iter().collect::<Vec<_>>() != ["scenario", "hour", "generation_kwh"] {
            return Err(ScheduleError::Csv("header must be scenario,hour,generation_kwh".into()));
        }
        let mut map: std::collections::BTreeMap<u32, Vec<Option<f64>>> = Default::default();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| ScheduleError::Csv(format!("row {row}: {e}")))?;
            let bad = |f: &str| ScheduleError::Csv(format!("row {row}: bad {f}"));
            let s: u32 = rec.get(0).and_then(|v| v.parse().ok()).ok_or_else(|| bad("scenario"))?;
            let h: usize = rec.get(1).and_then(|v| v.parse().ok()).ok_or_else(|| bad("hour"))?;
            let g: f64 = rec.get(2).and_then(|v| v.parse().ok()).ok_or_else(|| bad("generation_kwh"))?;
            if h == 0 || h > periods {
                return Err(bad("hour"));
            }
            let slot = &mut map.entry(s).or_insert_with(|| vec![None; periods])[h - 1];
            if slot.replace(g).is_some() {
                return Err(ScheduleError::Csv(format!("row {row}: duplicate (scenario {s}, hour {h})")));
            }
        }
        let scenarios = map
            .into_iter()
            .map(|(s, v)| {
                v.into_iter()
                    .collect::<Option<Vec<f64>>>()
                    .ok_or_else(|| ScheduleError::Csv(format!("scenario {s} is incomplete")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(scenarios, None)
    }

    pub fn load_csv(path: &Path, periods: usize) -> Result<Self, ScheduleError> {
        let f = std::fs::File::open(path).map_err(|e| ScheduleError::Csv(format!("{}: {e}", path.display())))?;
        Self::from_csv(f, periods)
    }
}

/// Per-building load-noise covariance over the T periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariance {
    /// Per-period variances, kW².
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl Covariance {
    fn dense(&self, t: usize) -> Result<DMatrix<f64>, ScheduleError> {
        match self {
            Covariance::Diagonal(d) if d.len() == t => Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d))),
            Covariance::Full(m) if m.len() == t && m.iter().all(|r| r.len() == t) => {
                Ok(DMatrix::from_fn(t, t, |i, j| m[i][j]))
            }
            _ => Err(ScheduleError::Scenarios("covariance has wrong dimension".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadNoiseSet {
    /// Aggregate `ε_b`, kW per period.
    pub scenarios: Vec<Vec<f64>>,
    pub probabilities: Vec<f64>,
}

impl LoadNoiseSet {
    pub fn zero(periods: usize) -> Self {
        Self { scenarios: vec![vec![0.0; periods]], probabilities: vec![1.0] }
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}

/// Draws aggregate noise `ε ~ N(0, Σ_i Σ_i)` (buildings independent).
pub fn sample_load_noise(
    covariances: &[Covariance],
    periods: usize,
    count: usize,
    seed: u64,
) -> Result<LoadNoiseSet, ScheduleError> {
    if count == 0 {
        return Err(ScheduleError::Scenarios("need at least one noise scenario".into()));
    }
    let mut total_diag: Option<Vec<f64>> = Some(vec![0.0; periods]);
    let mut total = DMatrix::<f64>::zeros(periods, periods);
    for (i, c) in covariances.iter().enumerate() {
        let m = c.dense(periods)?;
        match c {
            Covariance::Diagonal(d) => {
                if d.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(ScheduleError::NotPsd(i));
                }
                if let Some(td) = total_diag.as_mut() {
                    for (a, v) in td.iter_mut().zip(d) {
                        *a += v;
                    }
                }
            }
            Covariance::Full(_) => {
                let asym = (&m - m.transpose()).amax();
                let eig = SymmetricEigen::new(m.clone());
                let scale = m.amax().max(1.0);
                if asym > 1e-9 * scale || eig.eigenvalues.min() < -1e-9 * scale {
                    return Err(ScheduleError::NotPsd(i));
                }
                total_diag = None;
            }
        }
        total += m;
    }
    // Square-root factor of the summed covariance.
    let factor = match total_diag {
        Some(d) => DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(periods, d.iter().map(|v| v.sqrt()))),
        None => {
            let eig = SymmetricEigen::new(total);
            let sq = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
            &eig.eigenvectors * DMatrix::from_diagonal(&sq)
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let scenarios = (0..count)
        .map(|_| {
            let z = nalgebra::DVector::from_iterator(periods, (0..periods).map(|_| normal.sample(&mut rng)));
            (&factor * z).iter().copied().collect()
        })
        .collect();
    Ok(LoadNoiseSet { scenarios, probabilities: uniform(count) })
}

/// Variable offsets of the LP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layout {
    pub buildings: usize,
    pub periods: usize,
    pub wind: usize,
    pub noise: usize,
}

impl Layout {
    pub fn base_i(&self, i: usize, t: usize) -> usize {
        i * self.periods + t
    }
    pub fn recourse_i(&self, i: usize, w: usize, t: usize) -> usize {
        self.buildings * self.periods + (i * self.wind + w) * self.periods + t
    }
    fn after_buildings(&self) -> usize {
        self.buildings * self.periods * (1 + self.wind)
    }
    pub fn base_agg(&self, t: usize) -> usize {
        self.after_buildings() + t
    }
    pub fn scen_agg(&self, w: usize, b: usize, t: usize) -> usize {
        self.after_buildings() + self.periods + (w * self.noise + b) * self.periods + t
    }
    pub fn slack(&self, w: usize, b: usize, t: usize) -> usize {
        self.after_buildings() + self.periods * (1 + self.wind * self.noise) + (w * self.noise + b) * self.periods + t
    }
    pub fn num_vars(&self) -> usize {
        let (n, t, w, b) = (self.buildings, self.periods, self.wind, self.noise);
        n * t * (1 + w) + t * (1 + w * b) + t * w * b
    }
}

#[derive(Debug, Clone)]
pub struct StochasticProgram {
    pub layout: Layout,
    pub program: ConvexProgram,
    pub regions: Vec<Polyhedron>,
    pub tau: Vec<f64>,
    pub v: f64,
    pub wind: WindScenarioSet,
    pub noise: LoadNoiseSet,
}

impl StochasticProgram {
    pub fn num_vars(&self) -> usize {
        self.program.num_vars()
    }
}

fn add_region_rows(prog: &mut ConvexProgram, poly: &Polyhedron, var: impl Fn(usize) -> usize) {
    for (row, &h) in poly.g.iter().zip(&poly.h) {
        let coefs: Vec<(usize, f64)> =
            row.iter().enumerate().filter(|(_, a)| **a != 0.0).map(|(t, &a)| (var(t), a)).collect();
        prog.add_inequality(coefs, h);
    }
}

pub fn build_program(
    regions: &[FeasibleRegion],
    tau: &[f64],
    v: f64,
    wind: &WindScenarioSet,
    noise: &LoadNoiseSet,
) -> Result<StochasticProgram, ScheduleError> {
    if regions.is_empty() {
        return Err(ScheduleError::NoBuildings);
    }
    let periods = regions[0].periods();
    if regions.iter().any(|r| r.periods() != periods) || tau.len() != periods || wind.periods() != periods {
        return Err(ScheduleError::Periods);
    }
    if noise.is_empty() || noise.scenarios.iter().any(|s| s.len() != periods) {
        return Err(ScheduleError::Scenarios("noise scenarios empty or wrong length".into()));
    }
    check_probabilities(&noise.probabilities, noise.len())?;
    if !(v >= 0.0) {
        return Err(ScheduleError::Scenarios("v must be >= 0".into()));
    }
    let layout = Layout { buildings: regions.len(), periods, wind: wind.len(), noise: noise.len() };
    let mut prog = ConvexProgram::new(layout.num_vars());
    let polys: Vec<Polyhedron> = regions.iter().map(FeasibleRegion::export_constraints).collect();
    let delta = wind.deviations();

    for t in 0..periods {
        prog.set_linear(layout.base_agg(t), tau[t]);
        // (5b)
        let mut c = vec![(layout.base_agg(t), 1.0)];
        c.extend((0..layout.buildings).map(|i| (layout.base_i(i, t), -1.0)));
        prog.add_equality(c, 0.0);
    }
    for w in 0..layout.wind {
        for b in 0..layout.noise {
            let weight = wind.probabilities[w] * noise.probabilities[b] * v;
            for t in 0..periods {
                let s = layout.slack(w, b, t);
                let agg = layout.scen_agg(w, b, t);
                prog.set_linear(s, weight);
                prog.set_lower(s, 0.0);
                // (5c)
                let mut c = vec![(agg, 1.0)];
                c.extend((0..layout.buildings).map(|i| (layout.recourse_i(i, w, t), -1.0)));
                prog.add_equality(c, noise.scenarios[b][t]);
                // s ≥ p^b − p_{w,b} + Δ and s ≥ −(p^b − p_{w,b} + Δ)
                let d = delta[w][t];
                prog.add_inequality(vec![(layout.base_agg(t), 1.0), (agg, -1.0), (s, -1.0)], -d);
                prog.add_inequality(vec![(layout.base_agg(t), -1.0), (agg, 1.0), (s, -1.0)], d);
            }
        }
    }
    for (i, poly) in polys.iter().enumerate() {
        add_region_rows(&mut prog, poly, |t| layout.base_i(i, t));
        for w in 0..layout.wind {
            add_region_rows(&mut prog, poly, |t| layout.recourse_i(i, w, t));
        }
    }
    Ok(StochasticProgram {
        layout,
        program: prog,
        regions: polys,
        tau: tau.to_vec(),
        v,
        wind: wind.clone(),
        noise: noise.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// `p^b_i`, per building.
    pub base: Vec<Vec<f64>>,
    /// `p_{i,w}`, indexed `[building][wind scenario][t]`.
    pub recourse: Vec<Vec<Vec<f64>>>,
    pub aggregate_base: Vec<f64>,
    pub objective: f64,
    pub energy_cost: f64,
    pub balancing_cost: f64,
}

impl Schedule {
    /// `p^b − p_{w,b} + Δ_w` for one scenario pair.
    pub fn residual(&self, wind: &WindScenarioSet, noise: &LoadNoiseSet, w: usize, b: usize) -> Vec<f64> {
        let delta = wind.deviations();
        (0..self.aggregate_base.len())
            .map(|t| {
                let agg: f64 = self.recourse.iter().map(|r| r[w][t]).sum::<f64>() + noise.scenarios[b][t];
                self.aggregate_base[t] - agg + delta[w][t]
            })
            .collect()
    }

    /// Probability-weighted `‖residual‖₁`.
    pub fn expected_abs_residual(&self, wind: &WindScenarioSet, noise: &LoadNoiseSet) -> f64 {
        let mut e = 0.0;
        for w in 0..wind.len() {
            for b in 0..noise.len() {
                let r: f64 = self.residual(wind, noise, w, b).iter().map(|v| v.abs()).sum();
                e += wind.probabilities[w] * noise.probabilities[b] * r;
            }
        }
        e
    }
}

pub fn lp_settings() -> SolveSettings {
    SolveSettings { tolerance: 1e-8, max_iter: 300, assume_psd: true }
}

pub fn solve_program(sp: &StochasticProgram) -> Result<Schedule, ScheduleError> {
    let sol = optim::solve(&sp.program, &lp_settings())?;
    if !sol.is_optimal() {
        return Err(ScheduleError::Solve(sol.status));
    }
    let l = sp.layout;
    let mut x = sol.x;
    if sp.v == 0.0 {
        // Recourse does not enter the objective; keep the day-ahead schedule.
        for i in 0..l.buildings {
            for w in 0..l.wind {
                for t in 0..l.periods {
                    x[l.recourse_i(i, w, t)] = x[l.base_i(i, t)];
                }
            }
        }
    }
    let sol = optim::Solution { x, ..sol };
    let base: Vec<Vec<f64>> = (0..l.buildings).map(|i| (0..l.periods).map(|t| sol.x[l.base_i(i, t)]).collect()).collect();
    let recourse: Vec<Vec<Vec<f64>>> = (0..l.buildings)
        .map(|i| (0..l.wind).map(|w| (0..l.periods).map(|t| sol.x[l.recourse_i(i, w, t)]).collect()).collect())
        .collect();
    let aggregate_base: Vec<f64> = (0..l.periods).map(|t| base.iter().map(|b| b[t]).sum()).collect();
    let mut sched = Schedule { base, recourse, aggregate_base, objective: 0.0, energy_cost: 0.0, balancing_cost: 0.0 };
    sched.energy_cost = sp.tau.iter().zip(&sched.aggregate_base).map(|(a, b)| a * b).sum();
    sched.balancing_cost = sp.v * sched.expected_abs_residual(&sp.wind, &sp.noise);
    sched.objective = sched.energy_cost + sched.balancing_cost;
    Ok(sched)
}

/// `1 − E‖p^b − p_{w,b} + Δ_w‖₁ / E‖Δ_w‖₁`.
pub fn mitigation_metric(schedule: &Schedule, wind: &WindScenarioSet, noise: &LoadNoiseSet) -> Result<f64, ScheduleError> {
    let e_delta: f64 = wind
        .deviations()
        .iter()
        .zip(&wind.probabilities)
        .map(|(d, p)| p * d.iter().map(|v| v.abs()).sum::<f64>())
        .sum();
    if !(e_delta > 0.0) {
        return Err(ScheduleError::ZeroDeviation);
    }
    Ok(1.0 - schedule.expected_abs_residual(wind, noise) / e_delta)
}

/// Ground-truth context of one building on the scheduled day.
#[derive(Debug, Clone)]
pub struct PlantCase {
    pub config: PlantConfig,
    pub initial_state: PlantState,
    pub weather: DayWeather,
}

/// Expected comfort violation (°C·periods) per building when each wind scenario's
/// recourse load is executed. Loads are clipped to what the plant can physically draw.
pub fn violation_metric(schedule: &Schedule, plants: &[PlantCase], wind: &WindScenarioSet) -> Result<Vec<f64>, ScheduleError> {
    plants
        .iter()
        .zip(&schedule.recourse)
        .map(|(case, rec)| {
            let base = case.config.base_load_profile(&case.weather);
            let mut e = 0.0;
            for (w, p) in rec.iter().enumerate() {
                let executed: Vec<f64> =
                    p.iter().zip(&base).map(|(&x, &b)| x.clamp(b, b + case.config.hvac_capacity)).collect();
                let f = check_feasible(&case.config, &case.initial_state, &executed, &case.weather)?;
                e += wind.probabilities[w] * f.violation;
            }
            Ok(e)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deviations_have_zero_mean() {
        let w = WindScenarioSet::synthetic(24, 50, 10.0, 3).unwrap();
        let d = w.deviations();
        for t in 0..24 {
            let m: f64 = d.iter().zip(&w.probabilities).map(|(x, p)| p * x[t]).sum();
            assert!(m.abs() < 1e-9);
        }
        assert!(w.scenarios.iter().flatten().all(|&v| (0.0..=10.0).contains(&v)));
    }

    #[test]
    fn rejects_bad_probabilities() {
        assert!(WindScenarioSet::new(vec![vec![1.0], vec![2.0]], Some(vec![0.5, 0.6])).is_err());
        assert!(WindScenarioSet::new(vec![vec![-1.0]], None).is_err());
    }

    #[test]
    fn zero_covariance_gives_zero_noise() {
        let n = sample_load_noise(&vec![Covariance::Diagonal(vec![0.0; 4]); 2], 4, 5, 1).unwrap();
        assert!(n.scenarios.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn non_psd_rejected() {
        let bad = Covariance::Full(vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(sample_load_noise(&[bad], 2, 3, 0), Err(ScheduleError::NotPsd(0))));
        assert!(matches!(sample_load_noise(&[Covariance::Diagonal(vec![-1.0])], 1, 3, 0), Err(ScheduleError::NotPsd(0))));
    }

    #[test]
    fn wind_csv_round_trip() {
        let csv = "scenario,hour,generation_kwh\n2,1,3.0\n1,2,1.5\n1,1,1.0\n2,2,2.5\n";
        let w = WindScenarioSet::from_csv(csv.as_bytes(), 2).unwrap();
        assert_eq!(w.scenarios, vec![vec![1.0, 1.5], vec![3.0, 2.5]]);
        assert!(WindScenarioSet::from_csv("scenario,hour,generation_kwh\n1,1,1.0\n".as_bytes(), 2).is_err());
    }

    #[test]
    fn layout_count() {
        let l = Layout { buildings: 3, periods: 24, wind: 100, noise: 10 };
        assert_eq!(l.num_vars(), 3 * 24 * 101 + 24 * 1001 + 24 * 1000);
        assert_eq!(l.slack(99, 9, 23) + 1, l.num_vars());
    }
}
