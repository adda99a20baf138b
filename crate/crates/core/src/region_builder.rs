//! Per-cluster limits and the polyhedral feasible region over whole-day load profiles.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::band_estimator::{BandError, BandParameters};
use crate::data_model::TrainingDataset;
use crate::optim::{self, ConvexProgram, OptimError, SolveSettings, SolveStatus};

#[derive(Debug, Error)]
pub enum RegionError {
    #[error("cluster at t={0} has no days")]
    EmptyCluster(usize),
    #[error("missing region parameters for period {0}")]
    MissingPeriod(usize),
    #[error("profile has length {got}, region has {expected} periods")]
    Length { got: usize, expected: usize },
    #[error("region is empty for the given context (feasibility LP: {0:?})")]
    Empty(SolveStatus),
    #[error("inconsistent parameters at t={t}: {msg}")]
    Inconsistent { t: usize, msg: String },
    #[error(transparent)]
    Band(#[from] BandError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub p_min: f64,
    pub p_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

/// Componentwise extremes of load and indoor temperature at `t` over the cluster's days.
pub fn estimate_limits(ds: &TrainingDataset, members: &[usize], t: usize) -> Result<Limits, RegionError> {
    if members.is_empty() {
        return Err(RegionError::EmptyCluster(t));
    }
    let mut l = Limits {
        p_min: f64::INFINITY,
        p_max: f64::NEG_INFINITY,
        theta_min: f64::INFINITY,
        theta_max: f64::NEG_INFINITY,
    };
    for &k in members {
        let d = &ds.days()[k];
        let (p, th) = (d.load[t - 1], d.indoor_temp[t - 1]);
        l.p_min = l.p_min.min(p);
        l.p_max = l.p_max.max(p);
        l.theta_min = l.theta_min.min(th);
        l.theta_max = l.theta_max.max(th);
    }
    Ok(l)
}

/// Φ_{c,t}: load limits, temperature limits and the band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionParameters {
    pub p_min: f64,
    pub p_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub band: BandParameters,
}

impl RegionParameters {
    pub fn new(limits: Limits, band: BandParameters) -> Self {
        Self { p_min: limits.p_min, p_max: limits.p_max, theta_min: limits.theta_min, theta_max: limits.theta_max, band }
    }

    fn validate(&self, t: usize) -> Result<(), RegionError> {
        let bad = |msg: &str| Err(RegionError::Inconsistent { t, msg: msg.to_string() });
        if self.band.t != t {
            return bad("band period does not match");
        }
        if !(self.p_min <= self.p_max) {
            return bad("p_min > p_max");
        }
        if !(self.theta_min <= self.theta_max) {
            return bad("theta_min > theta_max");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    LoadMax,
    LoadMin,
    BandUpper,
    BandLower,
    BandOrder,
}

/// One exported inequality, tagged by kind and 1-based period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowTag {
    pub kind: RowKind,
    pub t: usize,
}

/// `G p ≤ h` with dense rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyhedron {
    pub g: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    pub tags: Vec<RowTag>,
}

impl Polyhedron {
    pub fn num_rows(&self) -> usize {
        self.h.len()
    }

    pub fn dim(&self) -> usize {
        self.g.first().map_or(0, Vec::len)
    }

    /// Indices of rows with `g·p > h + tol`.
    pub fn violated_rows(&self, p: &[f64], tol: f64) -> Vec<usize> {
        self.g
            .iter()
            .zip(&self.h)
            .enumerate()
            .filter(|(_, (row, &h))| row.iter().zip(p).map(|(a, x)| a * x).sum::<f64>() > h + tol)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        self.violated_rows(p, tol).is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleRegion {
    pub params: Vec<RegionParameters>,
    pub initial_temp: f64,
    pub outdoor_temp: Vec<f64>,
    /// Adds `θ̂ᵁ_t ≥ θ̂ᴸ_t` rows to the export.
    pub ordering_rows: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Containment {
    pub inside: bool,
    pub violated: Vec<RowTag>,
}

/// Builds the region for a forecast context and checks that it is non-empty.
pub fn assemble_region(
    params: Vec<RegionParameters>,
    initial_temp: f64,
    outdoor_temp: Vec<f64>,
    ordering_rows: bool,
) -> Result<FeasibleRegion, RegionError> {
    if outdoor_temp.len() != params.len() {
        return Err(RegionError::MissingPeriod(params.len().min(outdoor_temp.len()) + 1));
    }
    for (i, p) in params.iter().enumerate() {
        p.validate(i + 1)?;
    }
    let region = FeasibleRegion { params, initial_temp, outdoor_temp, ordering_rows };
    let sol = region.optimize_linear(&vec![0.0; region.periods()])?;
    if !sol.is_optimal() {
        return Err(RegionError::Empty(sol.status));
    }
    Ok(region)
}

impl FeasibleRegion {
    pub fn periods(&self) -> usize {
        self.params.len()
    }

    fn context(&self, t: usize) -> [f64; 3] {
        [self.initial_temp, self.outdoor_temp[t - 1], 1.0]
    }

    /// Membership computed directly from the band functions.
    pub fn contains(&self, p: &[f64], tol: f64) -> Result<Containment, RegionError> {
        let n = self.periods();
        if p.len() != n {
            return Err(RegionError::Length { got: p.len(), expected: n });
        }
        let mut violated = Vec::new();
        let mut flag = |kind, t| violated.push(RowTag { kind, t });
        for t in 1..=n {
            if p[t - 1] > self.params[t - 1].p_max + tol {
                flag(RowKind::LoadMax, t);
            }
        }
        for t in 1..=n {
            if p[t - 1] < self.params[t - 1].p_min - tol {
                flag(RowKind::LoadMin, t);
            }
        }
        let bands: Vec<(f64, f64)> = (1..=n)
            .map(|t| self.params[t - 1].band.predict_band(self.initial_temp, self.outdoor_temp[t - 1], &p[..t]))
            .collect::<Result<_, _>>()?;
        for t in 1..=n {
            if bands[t - 1].1 > self.params[t - 1].theta_max + tol {
                flag(RowKind::BandUpper, t);
            }
        }
        for t in 1..=n {
            if bands[t - 1].0 < self.params[t - 1].theta_min - tol {
                flag(RowKind::BandLower, t);
            }
        }
        if self.ordering_rows {
            for t in 1..=n {
                if bands[t - 1].0 > bands[t - 1].1 + tol {
                    flag(RowKind::BandOrder, t);
                }
            }
        }
        Ok(Containment { inside: violated.is_empty(), violated })
    }

    /// `G p ≤ h`: load bounds, band rows, then optional ordering rows (same order as `contains`).
    pub fn export_constraints(&self) -> Polyhedron {
        let n = self.periods();
        let mut g = Vec::new();
        let mut h = Vec::new();
        let mut tags = Vec::new();
        let unit = |t: usize, v: f64| {
            let mut r = vec![0.0; n];
            r[t - 1] = v;
            r
        };
        for t in 1..=n {
            g.push(unit(t, 1.0));
            h.push(self.params[t - 1].p_max);
            tags.push(RowTag { kind: RowKind::LoadMax, t });
        }
        for t in 1..=n {
            g.push(unit(t, -1.0));
            h.push(-self.params[t - 1].p_min);
            tags.push(RowTag { kind: RowKind::LoadMin, t });
        }
        let dot = |b: &[f64; 3], z: &[f64; 3]| b.iter().zip(z).map(|(x, y)| x * y).sum::<f64>();
        for t in 1..=n {
            let band = &self.params[t - 1].band;
            let mut r = vec![0.0; n];
            r[..t].copy_from_slice(&band.a_upper);
            g.push(r);
            h.push(self.params[t - 1].theta_max - dot(&band.b_upper, &self.context(t)));
            tags.push(RowTag { kind: RowKind::BandUpper, t });
        }
        for t in 1..=n {
            let band = &self.params[t - 1].band;
            let mut r = vec![0.0; n];
            for (x, a) in r[..t].iter_mut().zip(&band.a_lower) {
                *x = -a;
            }
            g.push(r);
            h.push(dot(&band.b_lower, &self.context(t)) - self.params[t - 1].theta_min);
            tags.push(RowTag { kind: RowKind::BandLower, t });
        }
        if self.ordering_rows {
            for t in 1..=n {
                let band = &self.params[t - 1].band;
                let mut r = vec![0.0; n];
                for j in 0..t {
                    r[j] = band.a_lower[j] - band.a_upper[j];
                }
                g.push(r);
                let z = self.context(t);
                h.push(dot(&band.b_upper, &z) - dot(&band.b_lower, &z));
                tags.push(RowTag { kind: RowKind::BandOrder, t });
            }
        }
        Polyhedron { g, h, tags }
    }

    /// `min cᵀp` over the region.
    pub fn optimize_linear(&self, c: &[f64]) -> Result<optim::Solution, RegionError> {
        let n = self.periods();
        if c.len() != n {
            return Err(RegionError::Length { got: c.len(), expected: n });
        }
        let poly = self.export_constraints();
        let mut prog = ConvexProgram::new(n);
        for (j, &v) in c.iter().enumerate() {
            prog.set_linear(j, v);
        }
        for (row, &h) in poly.g.iter().zip(&poly.h) {
            let coefs: Vec<(usize, f64)> = row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, &v)| (j, v)).collect();
            prog.add_inequality(coefs, h);
        }
        Ok(optim::solve(&prog, &SolveSettings { tolerance: 1e-9, max_iter: 200, assume_psd: true })?)
    }
}
