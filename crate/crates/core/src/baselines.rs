//! RC-circuit regression baseline:
//! `φ_{t+1} − φ_t = A_t (φ_t − φᵒᵘᵗ_t) + B_t p^hvac_t + D_t`, fitted per t by OLS.
//!
//! The transition from `φ₀ⁱⁿ` to `φ_1` would need the previous day's last HVAC
//! power, so the model covers transitions `t = 1..T−1`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::{DayRecord, TrainingDataset};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("need at least {need} days, got {got}")]
    TooFewDays { need: usize, got: usize },
    #[error("rank-deficient design at t={0}")]
    RankDeficient(usize),
    #[error("no HVAC series for day {0}")]
    MissingHvac(usize),
    #[error("empty data")]
    Empty,
    #[error("need at least 2 periods")]
    TooFewPeriods,
}

/// Per-(day type, t) minimum observed load, used as the base-load estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseEstimate {
    pub weekday: Vec<f64>,
    pub weekend: Vec<f64>,
}

impl BaseEstimate {
    pub fn from_dataset(ds: &TrainingDataset) -> Self {
        let n = ds.periods();
        let mut weekday = vec![f64::INFINITY; n];
        let mut weekend = vec![f64::INFINITY; n];
        for d in ds.days() {
            let target = if d.day_of_week().is_weekend() { &mut weekend } else { &mut weekday };
            for (m, &p) in target.iter_mut().zip(&d.load) {
                *m = m.min(p);
            }
        }
        // A day type absent from training borrows the other type's estimate.
        for t in 0..n {
            if !weekday[t].is_finite() {
                weekday[t] = weekend[t];
            }
            if !weekend[t].is_finite() {
                weekend[t] = weekday[t];
            }
        }
        Self { weekday, weekend }
    }

    pub fn hvac(&self, day: &DayRecord) -> Vec<f64> {
        let base = if day.day_of_week().is_weekend() { &self.weekend } else { &self.weekday };
        day.load.iter().zip(base).map(|(p, b)| (p - b).max(0.0)).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum HvacSource<'a> {
    /// Exact HVAC power per day (same order as the dataset), synthetic data only.
    Known(&'a [Vec<f64>]),
    /// Total load minus the minimum observed load for the day type and period.
    MinObservedBase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcParameters {
    /// Index `t − 1` holds the coefficients of the `t → t+1` transition.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub d: Vec<f64>,
    pub base: Option<BaseEstimate>,
}

impl RcParameters {
    pub fn periods(&self) -> usize {
        self.a.len() + 1
    }

    /// One-step prediction of `φ_{t+1}` for 1-based `t`.
    pub fn predict_rc(&self, t: usize, indoor: f64, outdoor: f64, hvac: f64) -> f64 {
        let i = t - 1;
        indoor + self.a[i] * (indoor - outdoor) + self.b[i] * hvac + self.d[i]
    }

    /// Chains one-step predictions from `φ_t0` using the given series.
    pub fn rollout(&self, t0: usize, indoor: f64, outdoor: &[f64], hvac: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        let mut x = indoor;
        for t in t0..self.periods() {
            x = self.predict_rc(t, x, outdoor[t - 1], hvac[t - 1]);
            out.push(x);
        }
        out
    }

    fn hvac_series(&self, ds: &TrainingDataset, source: HvacSource) -> Result<Vec<Vec<f64>>, BaselineError> {
        hvac_series(ds, source, self.base.as_ref())
    }
}

fn hvac_series(
    ds: &TrainingDataset,
    source: HvacSource,
    base: Option<&BaseEstimate>,
) -> Result<Vec<Vec<f64>>, BaselineError> {
    match source {
        HvacSource::Known(h) => {
            (0..ds.len()).map(|k| h.get(k).cloned().ok_or(BaselineError::MissingHvac(k))).collect()
        }
        HvacSource::MinObservedBase => {
            let est = base.cloned().unwrap_or_else(|| BaseEstimate::from_dataset(ds));
            Ok(ds.days().iter().map(|d| est.hvac(d)).collect())
        }
    }
}

/// Per-t OLS of the temperature change on `[φ_t − φᵒᵘᵗ_t, p^hvac_t, 1]`.
pub fn fit_rc(ds: &TrainingDataset, source: HvacSource) -> Result<RcParameters, BaselineError> {
    if ds.len() < 3 {
        return Err(BaselineError::TooFewDays { need: 3, got: ds.len() });
    }
    let n = ds.periods();
    if n < 2 {
        return Err(BaselineError::TooFewPeriods);
    }
    let base = matches!(source, HvacSource::MinObservedBase).then(|| BaseEstimate::from_dataset(ds));
    let hvac = hvac_series(ds, source, base.as_ref())?;
    let (mut a, mut b, mut d) = (Vec::new(), Vec::new(), Vec::new());
    for t in 1..n {
        let (x, y) = design(ds, &hvac, t);
        let coef = ols(&x, &y).ok_or(BaselineError::RankDeficient(t))?;
        a.push(coef[0]);
        b.push(coef[1]);
        d.push(coef[2]);
    }
    Ok(RcParameters { a, b, d, base })
}

fn design(ds: &TrainingDataset, hvac: &[Vec<f64>], t: usize) -> (DMatrix<f64>, DVector<f64>) {
    let k = ds.len();
    let x = DMatrix::from_fn(k, 3, |r, c| {
        let day = &ds.days()[r];
        match c {
            0 => day.indoor_temp[t - 1] - day.outdoor_temp[t - 1],
            1 => hvac[r][t - 1],
            _ => 1.0,
        }
    });
    let y = DVector::from_fn(k, |r, _| {
        let day = &ds.days()[r];
        day.indoor_temp[t] - day.indoor_temp[t - 1]
    });
    (x, y)
}

/// Least squares via SVD. Identically zero columns get a zero coefficient;
/// any other rank deficiency returns `None`.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let keep: Vec<usize> = (0..x.ncols()).filter(|&c| x.column(c).amax() > 0.0).collect();
    let mut coef = DVector::zeros(x.ncols());
    if keep.is_empty() {
        return Some(coef);
    }
    let sub = x.select_columns(&keep);
    let svd = sub.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return None;
    }
    let z = svd.solve(y, 0.0).ok()?;
    for (i, &c) in keep.iter().enumerate() {
        coef[c] = z[i];
    }
    Some(coef)
}

/// RMSE of one-step predictions over every day and transition.
pub fn rc_rmse(params: &RcParameters, ds: &TrainingDataset, source: HvacSource) -> Result<f64, BaselineError> {
    if ds.is_empty() {
        return Err(BaselineError::Empty);
    }
    let hvac = params.hvac_series(ds, source)?;
    let mut sse = 0.0;
    let mut count = 0usize;
    for (day, h) in ds.days().iter().zip(&hvac) {
        for t in 1..ds.periods() {
            let pred = params.predict_rc(t, day.indoor_temp[t - 1], day.outdoor_temp[t - 1], h[t - 1]);
            sse += (day.indoor_temp[t] - pred).powi(2);
            count += 1;
        }
    }
    Ok((sse / count as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_parameters_hold_temperature() {
        let p = RcParameters { a: vec![0.0; 3], b: vec![0.0; 3], d: vec![0.0; 3], base: None };
        assert_eq!(p.predict_rc(2, 23.4, 30.0, 5.0), 23.4);
        assert_eq!(p.rollout(1, 23.4, &[30.0; 4], &[1.0; 4]), vec![23.4; 3]);
    }

    #[test]
    fn hand_computed_step() {
        let p = RcParameters { a: vec![-0.1], b: vec![-0.2], d: vec![0.5], base: None };
        // 24 + (−0.1)(24 − 30) + (−0.2)(3) + 0.5
        assert!((p.predict_rc(1, 24.0, 30.0, 3.0) - 24.5).abs() < 1e-12);
    }

    #[test]
    fn rank_deficiency_detected() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(ols(&x, &y).is_none());
    }
}
