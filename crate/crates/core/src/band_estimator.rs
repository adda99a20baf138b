//! Affine upper/lower indoor-temperature bands fitted by the bounded least
//! squares QP and a sweep over its error/area weight β.
//!
//! For one (cluster, period) pair with `d = t + 3` regressors
//! `u_k = [p_{k,1:t}, φ₀ⁱⁿ_k, φᵒᵘᵗ_{k,t}, 1]`, the bands are
//! `θ̂ᵁ_k = u_kᵀx_U` and `θ̂ᴸ_k = u_kᵀx_L`, and the QP is
//!
//! ```text
//! min  β Σ_k (J^U_k + J^L_k)² + (1 − β) Σ_k (θ̂ᵁ_k − θ̂ᴸ_k)
//! s.t. J^U_k ≥ φⁱⁿ_k − θ̂ᵁ_k,  J^L_k ≥ θ̂ᴸ_k − φⁱⁿ_k,  J ≥ 0,  θ̂ᵁ_k ≥ θ̂ᴸ_k,
//!      load coefficients ≤ 0 (cooling) or ≥ 0 (heating).
//! ```
//!
//! At β = 0 and β = 1 the optimum is not unique; both endpoints are solved
//! lexicographically (the secondary objective breaks the tie), which keeps
//! the Pareto ordering of the sweep exact.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::TrainingDataset;
use crate::optim::{self, ConvexProgram, OptimError, SolveSettings, SolveStatus};
use crate::synthetic_plant::HvacMode;

#[derive(Debug, Error)]
pub enum BandError {
    #[error("beta {0} outside [0, 1]")]
    BetaRange(f64),
    #[error("alpha {0} outside (0, 1)")]
    AlphaRange(f64),
    #[error("beta grid needs at least 2 points, got {0}")]
    GridSize(usize),
    #[error("no data points")]
    Empty,
    #[error("load vector has length {got}, expected {expected}")]
    Length { got: usize, expected: usize },
    #[error("QP at beta={beta} did not converge: {status:?} (primal {primal:.3e}, dual {dual:.3e})")]
    Solver { beta: f64, status: SolveStatus, primal: f64, dual: f64 },
    #[error(transparent)]
    Optim(#[from] OptimError),
}

/// One observation used to fit a band at period `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSample {
    pub load: Vec<f64>,
    pub initial_temp: f64,
    pub outdoor_temp: f64,
    pub indoor_temp: f64,
}

impl BandSample {
    fn regressors(&self) -> Vec<f64> {
        let mut u = self.load.clone();
        u.extend([self.initial_temp, self.outdoor_temp, 1.0]);
        u
    }
}

/// Samples at period `t` from the given day positions of `ds`.
pub fn band_samples(ds: &TrainingDataset, members: &[usize], t: usize) -> Vec<BandSample> {
    members
        .iter()
        .map(|&k| {
            let d = &ds.days()[k];
            BandSample {
                load: d.load[..t].to_vec(),
                initial_temp: d.initial_indoor_temp,
                outdoor_temp: d.outdoor_temp[t - 1],
                indoor_temp: d.indoor_temp[t - 1],
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandParameters {
    pub t: usize,
    pub a_upper: Vec<f64>,
    /// Coefficients on `[φ₀ⁱⁿ, φᵒᵘᵗ_t, 1]`.
    pub b_upper: [f64; 3],
    pub a_lower: Vec<f64>,
    pub b_lower: [f64; 3],
    pub mode: HvacMode,
    pub beta: f64,
    pub pi_out: f64,
    /// Summed band width over the fitting points, °C.
    pub area: f64,
    #[serde(default)]
    pub alpha_unmet: bool,
}

impl BandParameters {
    /// Constant band `[lower, upper]` with zero load coefficients.
    pub fn constant(t: usize, lower: f64, upper: f64, mode: HvacMode) -> Self {
        Self {
            t,
            a_upper: vec![0.0; t],
            b_upper: [0.0, 0.0, upper],
            a_lower: vec![0.0; t],
            b_lower: [0.0, 0.0, lower],
            mode,
            beta: 0.0,
            pi_out: 0.0,
            area: 0.0,
            alpha_unmet: false,
        }
    }

    /// `(θ̂ᴸ, θ̂ᵁ)` for the given context and load prefix.
    pub fn predict_band(&self, initial_temp: f64, outdoor_temp: f64, load: &[f64]) -> Result<(f64, f64), BandError> {
        if load.len() != self.t {
            return Err(BandError::Length { got: load.len(), expected: self.t });
        }
        let z = [initial_temp, outdoor_temp, 1.0];
        let eval = |a: &[f64], b: &[f64; 3]| -> f64 {
            a.iter().zip(load).map(|(c, p)| c * p).sum::<f64>() + b.iter().zip(&z).map(|(c, v)| c * v).sum::<f64>()
        };
        Ok((eval(&self.a_lower, &self.b_lower), eval(&self.a_upper, &self.b_upper)))
    }

    fn predict_sample(&self, s: &BandSample) -> Result<(f64, f64), BandError> {
        self.predict_band(s.initial_temp, s.outdoor_temp, &s.load)
    }

    fn from_vectors(t: usize, upper: &[f64], lower: &[f64], mode: HvacMode, beta: f64) -> Self {
        Self {
            t,
            a_upper: upper[..t].to_vec(),
            b_upper: [upper[t], upper[t + 1], upper[t + 2]],
            a_lower: lower[..t].to_vec(),
            b_lower: [lower[t], lower[t + 1], lower[t + 2]],
            mode,
            beta,
            pi_out: 0.0,
            area: 0.0,
            alpha_unmet: false,
        }
    }
}

/// Fraction of samples on or outside the band (non-strict comparisons).
pub fn compute_pi_out(bp: &BandParameters, data: &[BandSample]) -> Result<f64, BandError> {
    if data.is_empty() {
        return Err(BandError::Empty);
    }
    let mut out = 0usize;
    for s in data {
        let (lo, hi) = bp.predict_sample(s)?;
        if hi <= s.indoor_temp || lo >= s.indoor_temp {
            out += 1;
        }
    }
    Ok(out as f64 / data.len() as f64)
}

/// Hinge errors `(J^U, J^L)` per sample.
pub fn hinge_errors(bp: &BandParameters, data: &[BandSample]) -> Result<Vec<(f64, f64)>, BandError> {
    data.iter()
        .map(|s| {
            let (lo, hi) = bp.predict_sample(s)?;
            Ok(((s.indoor_temp - hi).max(0.0), (lo - s.indoor_temp).max(0.0)))
        })
        .collect()
}

/// `sqrt(Σ (J^U + J^L)² / K)`.
pub fn compute_band_rmse(bp: &BandParameters, data: &[BandSample]) -> Result<f64, BandError> {
    if data.is_empty() {
        return Err(BandError::Empty);
    }
    let sse: f64 = hinge_errors(bp, data)?.iter().map(|(u, l)| (u + l).powi(2)).sum();
    Ok((sse / data.len() as f64).sqrt())
}

/// Summed band width `Σ (θ̂ᵁ − θ̂ᴸ)` over the samples.
pub fn band_area(bp: &BandParameters, data: &[BandSample]) -> Result<f64, BandError> {
    data.iter().map(|s| bp.predict_sample(s).map(|(lo, hi)| hi - lo)).sum()
}

/// Outcome of one QP solve on the β grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaRecord {
    pub beta: f64,
    pub params: BandParameters,
    pub sse: f64,
    pub area: f64,
    pub pi_out: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlseFitReport {
    pub records: Vec<BetaRecord>,
    pub selected: usize,
    pub alpha: f64,
    pub alpha_unmet: bool,
}

impl BlseFitReport {
    pub fn chosen(&self) -> &BandParameters {
        &self.records[self.selected].params
    }

    /// Re-runs the selection rule for a different robustness level.
    pub fn select(&self, alpha: f64) -> BandParameters {
        let (i, unmet) = select_beta(&self.records, alpha);
        let mut p = self.records[i].params.clone();
        p.alpha_unmet = unmet;
        p
    }
}

/// `β_i = (i − 1)/(M − 1)` for `i = 1..M`.
pub fn beta_grid(m: usize) -> Vec<f64> {
    (0..m).map(|i| i as f64 / (m - 1) as f64).collect()
}

/// Smallest `J^A` among records with `π_out ≤ α`, ties to the smaller β.
/// Falls back to the largest β (flagged) when nothing qualifies.
pub fn select_beta(records: &[BetaRecord], alpha: f64) -> (usize, bool) {
    let mut best: Option<usize> = None;
    for (i, r) in records.iter().enumerate() {
        if r.pi_out <= alpha && best.map_or(true, |b| r.area < records[b].area) {
            best = Some(i);
        }
    }
    match best {
        Some(i) => (i, false),
        None => {
            let last = records
                .iter()
                .enumerate()
                .fold(0, |acc, (i, r)| if r.beta > records[acc].beta { i } else { acc });
            (last, true)
        }
    }
}

/// One β shared by all clusters of a period: minimizes total `J^A` subject to the
/// pooled out-of-band fraction `Σ_c n_c π_c / Σ_c n_c ≤ α`. Returns the grid index.
pub fn select_beta_shared(reports: &[&BlseFitReport], sizes: &[usize], alpha: f64) -> (usize, bool) {
    let m = reports.iter().map(|r| r.records.len()).min().unwrap_or(0);
    let total: usize = sizes.iter().sum();
    let mut best: Option<(usize, f64)> = None;
    for i in 0..m {
        let pooled: f64 =
            reports.iter().zip(sizes).map(|(r, &n)| r.records[i].pi_out * n as f64).sum::<f64>() / total.max(1) as f64;
        let area: f64 = reports.iter().map(|r| r.records[i].area).sum();
        if pooled <= alpha && best.map_or(true, |(_, a)| area < a) {
            best = Some((i, area));
        }
    }
    match best {
        Some((i, _)) => (i, false),
        None => (m.saturating_sub(1), true),
    }
}

struct Design {
    t: usize,
    d: usize,
    /// Column-scaled regressors: `ũ_kj = u_kj / scale_j`.
    rows: Vec<Vec<f64>>,
    y: Vec<f64>,
    scale: Vec<f64>,
    mode: HvacMode,
}

impl Design {
    fn new(data: &[BandSample], mode: HvacMode) -> Result<Self, BandError> {
        let first = data.first().ok_or(BandError::Empty)?;
        let t = first.load.len();
        let d = t + 3;
        let raw: Vec<Vec<f64>> = data
            .iter()
            .map(|s| {
                if s.load.len() != t {
                    Err(BandError::Length { got: s.load.len(), expected: t })
                } else {
                    Ok(s.regressors())
                }
            })
            .collect::<Result<_, _>>()?;
        let scale: Vec<f64> = (0..d)
            .map(|j| {
                let m = raw.iter().fold(0.0_f64, |acc, r| acc.max(r[j].abs()));
                if m > 0.0 {
                    m
                } else {
                    1.0
                }
            })
            .collect();
        let rows = raw.iter().map(|r| r.iter().zip(&scale).map(|(v, s)| v / s).collect()).collect();
        Ok(Self { t, d, rows, y: data.iter().map(|s| s.indoor_temp).collect(), scale, mode })
    }

    fn k(&self) -> usize {
        self.rows.len()
    }

    /// Applies the load-coefficient sign constraint to variables `offset..offset+t`.
    fn sign_bounds(&self, prog: &mut ConvexProgram, offset: usize) {
        for j in 0..self.t {
            match self.mode {
                HvacMode::Cooling => prog.set_upper(offset + j, 0.0),
                HvacMode::Heating => prog.set_lower(offset + j, 0.0),
            }
        }
    }

    fn unscale(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.scale).map(|(v, s)| v / s).collect()
    }

    fn dot(&self, k: usize, x: &[f64]) -> f64 {
        self.rows[k].iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

fn settings() -> SolveSettings {
    SolveSettings { tolerance: 1e-8, max_iter: 400, assume_psd: true }
}

fn check(sol: &optim::Solution, beta: f64) -> Result<(), BandError> {
    if sol.is_optimal() {
        Ok(())
    } else {
        Err(BandError::Solver { beta, status: sol.status, primal: sol.residuals.primal, dual: sol.residuals.dual })
    }
}

/// Sign-constrained least squares on the scaled design (the collapsed β = 0 band).
fn central_fit(des: &Design) -> Result<Vec<f64>, BandError> {
    let (k, d) = (des.k(), des.d);
    let mut prog = ConvexProgram::new(d);
    for i in 0..d {
        for j in i..d {
            let v: f64 = des.rows.iter().map(|r| r[i] * r[j]).sum();
            if v != 0.0 {
                prog.add_quadratic(i, j, 2.0 * v);
            }
        }
        let g: f64 = des.rows.iter().zip(&des.y).map(|(r, y)| r[i] * y).sum();
        prog.set_linear(i, -2.0 * g);
    }
    des.sign_bounds(&mut prog, 0);
    let sol = optim::solve(&prog, &settings())?;
    check(&sol, 0.0)?;
    let mut x = sol.x;

    // Polish: exact least squares on the free coefficients, starting from the detected
    // active set. Coefficients that come out on the wrong side are pinned at zero and
    // the fit repeated; roundoff-sized violations are clipped.
    let tol = 1e-7;
    let wrong = |v: f64| match des.mode {
        HvacMode::Cooling => v > 0.0,
        HvacMode::Heating => v < 0.0,
    };
    let sse = |x: &[f64]| (0..k).map(|r| (des.y[r] - des.dot(r, x)).powi(2)).sum::<f64>();
    let b = DVector::from_column_slice(&des.y);
    let mut free: Vec<usize> = (0..d).filter(|&j| j >= des.t || x[j].abs() > tol).collect();
    for _ in 0..=des.t {
        let a = DMatrix::from_fn(k, free.len(), |r, c| des.rows[r][free[c]]);
        let Ok(z) = a.svd(true, true).solve(&b, 1e-12) else { break };
        let mut cand = vec![0.0; d];
        for (c, &j) in free.iter().enumerate() {
            cand[j] = z[c];
        }
        let pin: Vec<usize> = (0..des.t).filter(|&j| wrong(cand[j]) && cand[j].abs() > 1e-10).collect();
        if pin.is_empty() {
            for v in &mut cand[..des.t] {
                if wrong(*v) {
                    *v = 0.0;
                }
            }
            if sse(&cand) <= sse(&x) {
                x = cand;
            }
            break;
        }
        free.retain(|j| !pin.contains(j));
    }
    Ok(x)
}

/// Tightest envelope containing every point: `min Σ u_kᵀx s.t. u_kᵀx ≥ y_k` (upper)
/// or `max Σ u_kᵀx s.t. u_kᵀx ≤ y_k` (lower).
fn envelope(des: &Design, upper: bool) -> Result<Vec<f64>, BandError> {
    let d = des.d;
    let sgn = if upper { 1.0 } else { -1.0 };
    let mut prog = ConvexProgram::new(d);
    for j in 0..d {
        let s: f64 = des.rows.iter().map(|r| r[j]).sum();
        prog.set_linear(j, sgn * s);
    }
    for (r, &y) in des.rows.iter().zip(&des.y) {
        prog.add_inequality(r.iter().enumerate().map(|(j, &v)| (j, -sgn * v)).collect(), -sgn * y);
    }
    des.sign_bounds(&mut prog, 0);
    let sol = optim::solve(&prog, &settings())?;
    check(&sol, 1.0)?;
    Ok(sol.x)
}

fn interior_fit(des: &Design, beta: f64) -> Result<(Vec<f64>, Vec<f64>), BandError> {
    let (k, d) = (des.k(), des.d);
    let (xu, xl, ju, jl) = (0, d, 2 * d, 2 * d + k);
    let mut prog = ConvexProgram::new(2 * d + 2 * k);
    for r in 0..k {
        prog.add_quadratic(ju + r, ju + r, 2.0 * beta);
        prog.add_quadratic(jl + r, jl + r, 2.0 * beta);
        prog.add_quadratic(ju + r, jl + r, 2.0 * beta);
        prog.set_lower(ju + r, 0.0);
        prog.set_lower(jl + r, 0.0);
    }
    for j in 0..d {
        let s: f64 = des.rows.iter().map(|row| row[j]).sum();
        prog.set_linear(xu + j, (1.0 - beta) * s);
        prog.set_linear(xl + j, -(1.0 - beta) * s);
    }
    for (r, row) in des.rows.iter().enumerate() {
        let y = des.y[r];
        // −J^U − u·x_U ≤ −y
        let mut c: Vec<(usize, f64)> = row.iter().enumerate().map(|(j, &v)| (xu + j, -v)).collect();
        c.push((ju + r, -1.0));
        prog.add_inequality(c, -y);
        // u·x_L − J^L ≤ y
        let mut c: Vec<(usize, f64)> = row.iter().enumerate().map(|(j, &v)| (xl + j, v)).collect();
        c.push((jl + r, -1.0));
        prog.add_inequality(c, y);
        // u·(x_L − x_U) ≤ 0
        let mut c: Vec<(usize, f64)> = row.iter().enumerate().map(|(j, &v)| (xl + j, v)).collect();
        c.extend(row.iter().enumerate().map(|(j, &v)| (xu + j, -v)));
        prog.add_inequality(c, 0.0);
    }
    des.sign_bounds(&mut prog, xu);
    des.sign_bounds(&mut prog, xl);
    let sol = optim::solve(&prog, &settings())?;
    check(&sol, beta)?;
    Ok((sol.x[xu..xu + d].to_vec(), sol.x[xl..xl + d].to_vec()))
}

/// Clips load coefficients that the interior-point solver leaves a hair on the wrong side of zero.
fn enforce_signs(x: &mut [f64], t: usize, mode: HvacMode) {
    for v in &mut x[..t] {
        *v = match mode {
            HvacMode::Cooling => v.min(0.0),
            HvacMode::Heating => v.max(0.0),
        };
    }
}

/// Solves the band QP for one β and evaluates SSE, J^A and π_out on `data`.
pub fn solve_blsef(data: &[BandSample], beta: f64, mode: HvacMode) -> Result<BetaRecord, BandError> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(BandError::BetaRange(beta));
    }
    let des = Design::new(data, mode)?;
    let (mut xu, mut xl) = if data.len() == 1 {
        // A single point is interpolated exactly by the intercept.
        let mut x = vec![0.0; des.d];
        x[des.d - 1] = des.y[0] / des.scale[des.d - 1];
        (x.clone(), x)
    } else if beta == 0.0 {
        let x = central_fit(&des)?;
        (x.clone(), x)
    } else if beta == 1.0 {
        (envelope(&des, true)?, envelope(&des, false)?)
    } else {
        interior_fit(&des, beta)?
    };
    enforce_signs(&mut xu, des.t, mode);
    enforce_signs(&mut xl, des.t, mode);
    let mut params = BandParameters::from_vectors(des.t, &des.unscale(&xu), &des.unscale(&xl), mode, beta);
    let errs = hinge_errors(&params, data)?;
    let sse: f64 = errs.iter().map(|(u, l)| (u + l).powi(2)).sum();
    let area = band_area(&params, data)?;
    let pi_out = compute_pi_out(&params, data)?;
    params.pi_out = pi_out;
    params.area = area;
    Ok(BetaRecord { beta, params, sse, area, pi_out, objective: beta * sse + (1.0 - beta) * area })
}

fn is_collapsed(r: &BetaRecord, k: usize) -> bool {
    r.area <= 1e-7 * k as f64
}

/// All grid records. J^A is non-decreasing in β, so once the band is collapsed at
/// some β_i it is collapsed for every smaller β, where the β = 0 central fit is optimal.
/// The collapse boundary is located by bisection and the central fit reused below it.
pub fn sweep_records(data: &[BandSample], m: usize, mode: HvacMode) -> Result<Vec<BetaRecord>, BandError> {
    let grid = beta_grid(m);
    let k = data.len();
    let mut records: Vec<Option<BetaRecord>> = vec![None; m];
    let central = solve_blsef(data, 0.0, mode)?;
    let top = solve_blsef(data, 1.0, mode)?;
    let (mut lo, mut hi) = (0usize, m - 1);
    if is_collapsed(&top, k) {
        lo = m - 1;
    }
    records[m - 1] = Some(top);
    while hi > lo + 1 {
        let mid = (lo + hi) / 2;
        let r = solve_blsef(data, grid[mid], mode)?;
        if is_collapsed(&r, k) {
            lo = mid;
        } else {
            hi = mid;
            records[mid] = Some(r);
        }
    }
    for (i, &beta) in grid.iter().enumerate() {
        if i <= lo {
            let mut r = central.clone();
            r.beta = beta;
            r.params.beta = beta;
            r.objective = beta * r.sse + (1.0 - beta) * r.area;
            records[i] = Some(r);
        } else if records[i].is_none() {
            records[i] = Some(solve_blsef(data, beta, mode)?);
        }
    }
    Ok(records.into_iter().map(|r| r.expect("filled")).collect())
}

/// Solves the QP on the `M`-point β grid and applies the α selection rule.
pub fn blse_sweep(data: &[BandSample], alpha: f64, m: usize, mode: HvacMode) -> Result<BlseFitReport, BandError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(BandError::AlphaRange(alpha));
    }
    if m < 2 {
        return Err(BandError::GridSize(m));
    }
    if data.is_empty() {
        return Err(BandError::Empty);
    }
    let records = sweep_records(data, m, mode)?;
    let (selected, alpha_unmet) = select_beta(&records, alpha);
    Ok(BlseFitReport { records, selected, alpha, alpha_unmet })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(load: Vec<f64>, y: f64) -> BandSample {
        BandSample { load, initial_temp: 23.0, outdoor_temp: 30.0, indoor_temp: y }
    }

    #[test]
    fn constant_band_prediction() {
        let bp = BandParameters::constant(2, 20.0, 25.0, HvacMode::Cooling);
        assert_eq!(bp.predict_band(1.0, 2.0, &[3.0, 4.0]).unwrap(), (20.0, 25.0));
        assert!(bp.predict_band(1.0, 2.0, &[3.0]).is_err());
    }

    #[test]
    fn pi_out_and_rmse_by_hand() {
        let bp = BandParameters::constant(1, 20.0, 25.0, HvacMode::Cooling);
        let data: Vec<_> = [21.0, 22.0, 23.0, 24.0, 24.5, 21.5, 22.5, 25.0, 27.0, 19.0]
            .iter()
            .map(|&y| sample(vec![1.0], y))
            .collect();
        assert!((compute_pi_out(&bp, &data).unwrap() - 0.3).abs() < 1e-15);
        let rmse = compute_band_rmse(&bp, &data).unwrap();
        assert!((rmse - (5.0f64 / 10.0).sqrt()).abs() < 1e-12);
        assert!(compute_pi_out(&bp, &[]).is_err());
    }

    #[test]
    fn single_point_is_interpolated() {
        let r = solve_blsef(&[sample(vec![5.0], 22.0)], 0.5, HvacMode::Cooling).unwrap();
        assert!(r.area.abs() < 1e-12 && r.sse.abs() < 1e-12);
    }

    #[test]
    fn beta_zero_collapses() {
        let data: Vec<_> = (0..8).map(|i| sample(vec![i as f64], 25.0 - 0.3 * i as f64 + 0.1 * (i % 3) as f64)).collect();
        let r = solve_blsef(&data, 0.0, HvacMode::Cooling).unwrap();
        assert!(r.area.abs() < 1e-9);
        assert_eq!(r.pi_out, 1.0);
        assert_eq!(r.params.a_upper, r.params.a_lower);
    }

    #[test]
    fn beta_one_contains_everything() {
        let data: Vec<_> = (0..8).map(|i| sample(vec![i as f64], 25.0 - 0.3 * i as f64 + 0.1 * (i % 3) as f64)).collect();
        let r = solve_blsef(&data, 1.0, HvacMode::Cooling).unwrap();
        assert!(r.sse < 1e-12);
        for s in &data {
            let (lo, hi) = r.params.predict_band(s.initial_temp, s.outdoor_temp, &s.load).unwrap();
            assert!(lo <= s.indoor_temp + 1e-7 && hi >= s.indoor_temp - 1e-7);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let data = vec![sample(vec![1.0], 22.0)];
        assert!(matches!(solve_blsef(&data, 1.5, HvacMode::Cooling), Err(BandError::BetaRange(_))));
        assert!(matches!(blse_sweep(&data, 0.0, 10, HvacMode::Cooling), Err(BandError::AlphaRange(_))));
        assert!(matches!(blse_sweep(&data, 0.1, 1, HvacMode::Cooling), Err(BandError::GridSize(1))));
    }

    #[test]
    fn selection_rule() {
        let rec = |beta: f64, area: f64, pi: f64| BetaRecord {
            beta,
            params: BandParameters::constant(1, 0.0, area, HvacMode::Cooling),
            sse: 0.0,
            area,
            pi_out: pi,
            objective: 0.0,
        };
        let recs = vec![rec(0.0, 0.0, 1.0), rec(0.5, 2.0, 0.04), rec(0.7, 2.0, 0.02), rec(1.0, 5.0, 0.3)];
        assert_eq!(select_beta(&recs, 0.05), (1, false));
        assert_eq!(select_beta(&recs, 0.01), (3, true));
    }
}
