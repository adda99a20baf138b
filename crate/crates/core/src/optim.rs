//! Convex quadratic / linear program contract.
//!
//! Programs are stated as
//!
//! ```text
//! minimise   ½ xᵀ P x + qᵀ x
//! subject to Aeq x  = beq
//!            Ain x ≤ bin
//!            l ≤ x ≤ u
//! ```
//!
//! and handed to an interior-point backend. Callers only see [`ConvexProgram`],
//! [`SolveSettings`] and [`Solution`]; residuals are recomputed here from the
//! returned primal/dual pair rather than trusted from the backend.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, SupportedConeT,
    ZeroConeT,
};
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("quadratic cost is not positive semidefinite (block starting at variable {0})")]
    NotPsd(usize),
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
    #[error("backend setup failed: {0}")]
    Backend(String),
}

/// Sparse linear row `Σ coef·x[idx]` compared against `rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub coefs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn new(coefs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { coefs, rhs }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ConvexProgram {
    num_vars: usize,
    /// Upper-triangle entries `(row, col, value)` of P, duplicates summed.
    quadratic: Vec<(usize, usize, f64)>,
    linear: Vec<f64>,
    equalities: Vec<LinearRow>,
    inequalities: Vec<LinearRow>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ConvexProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            quadratic: Vec::new(),
            linear: vec![0.0; num_vars],
            equalities: Vec::new(),
            inequalities: Vec::new(),
            lower: vec![f64::NEG_INFINITY; num_vars],
            upper: vec![f64::INFINITY; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_equalities(&self) -> usize {
        self.equalities.len()
    }

    pub fn num_inequalities(&self) -> usize {
        self.inequalities.len()
    }

    pub fn linear_cost(&self) -> &[f64] {
        &self.linear
    }

    pub fn equalities(&self) -> &[LinearRow] {
        &self.equalities
    }

    pub fn inequalities(&self) -> &[LinearRow] {
        &self.inequalities
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    /// Number of stored (upper-triangle) quadratic entries.
    pub fn quadratic_nnz(&self) -> usize {
        self.quadratic.len()
    }

    /// Adds `value` to the symmetric entry P[i][j] (and P[j][i]).
    pub fn add_quadratic(&mut self, i: usize, j: usize, value: f64) {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        self.quadratic.push((r, c, value));
    }

    pub fn set_linear(&mut self, j: usize, value: f64) {
        self.linear[j] = value;
    }

    pub fn add_linear(&mut self, j: usize, value: f64) {
        self.linear[j] += value;
    }

    pub fn add_equality(&mut self, coefs: Vec<(usize, f64)>, rhs: f64) {
        self.equalities.push(LinearRow::new(coefs, rhs));
    }

    /// Adds `Σ coefs·x ≤ rhs`.
    pub fn add_inequality(&mut self, coefs: Vec<(usize, f64)>, rhs: f64) {
        self.inequalities.push(LinearRow::new(coefs, rhs));
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn set_lower(&mut self, j: usize, lower: f64) {
        self.lower[j] = lower;
    }

    pub fn set_upper(&mut self, j: usize, upper: f64) {
        self.upper[j] = upper;
    }

    /// ½ xᵀPx + qᵀx.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.linear.iter().zip(x).map(|(q, v)| q * v).sum();
        let quad: f64 = self
            .quadratic
            .iter()
            .map(|&(i, j, v)| if i == j { 0.5 * v * x[i] * x[i] } else { v * x[i] * x[j] })
            .sum();
        lin + quad
    }

    /// P·x using the symmetric expansion of the stored upper triangle.
    pub fn quadratic_times(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vars];
        for &(i, j, v) in &self.quadratic {
            out[i] += v * x[j];
            if i != j {
                out[j] += v * x[i];
            }
        }
        out
    }

    /// Largest violation of any equality, inequality or bound at `x`.
    pub fn primal_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for row in &self.equalities {
            worst = worst.max((row.eval(x) - row.rhs).abs());
        }
        for row in &self.inequalities {
            worst = worst.max(row.eval(x) - row.rhs);
        }
        for j in 0..self.num_vars {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        worst
    }

    fn validate(&self) -> Result<(), OptimError> {
        let n = self.num_vars;
        if self.linear.len() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(OptimError::Dimension("cost/bound vectors".into()));
        }
        if self.quadratic.iter().any(|&(i, j, _)| i >= n || j >= n) {
            return Err(OptimError::Dimension("quadratic index out of range".into()));
        }
        for (name, rows) in [("equality", &self.equalities), ("inequality", &self.inequalities)] {
            for row in rows.iter() {
                if row.coefs.iter().any(|&(j, _)| j >= n) {
                    return Err(OptimError::Dimension(format!("{name} row index out of range")));
                }
                if !row.rhs.is_finite() || row.coefs.iter().any(|&(_, a)| !a.is_finite()) {
                    return Err(OptimError::NonFinite("constraint rows"));
                }
            }
        }
        if self.linear.iter().any(|v| !v.is_finite())
            || self.quadratic.iter().any(|&(_, _, v)| !v.is_finite())
        {
            return Err(OptimError::NonFinite("cost"));
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(OptimError::Dimension(format!("bounds of variable {j}")));
            }
        }
        Ok(())
    }

    /// Attempts a Cholesky factorisation of every connected block of P.
    fn check_psd(&self) -> Result<(), OptimError> {
        if self.quadratic.is_empty() {
            return Ok(());
        }
        let n = self.num_vars;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut a: usize) -> usize {
            while parent[a] != a {
                parent[a] = parent[parent[a]];
                a = parent[a];
            }
            a
        }
        let mut used = vec![false; n];
        for &(i, j, _) in &self.quadratic {
            used[i] = true;
            used[j] = true;
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
        let mut blocks: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for j in (0..n).filter(|&j| used[j]) {
            let r = find(&mut parent, j);
            blocks.entry(r).or_default().push(j);
        }
        let mut position = vec![usize::MAX; n];
        let mut block_of = vec![usize::MAX; n];
        for (b, members) in blocks.values().enumerate() {
            for (p, &j) in members.iter().enumerate() {
                position[j] = p;
                block_of[j] = b;
            }
        }
        let mut dense: Vec<DMatrix<f64>> =
            blocks.values().map(|m| DMatrix::zeros(m.len(), m.len())).collect();
        for &(i, j, v) in &self.quadratic {
            let m = &mut dense[block_of[i]];
            let (pi, pj) = (position[i], position[j]);
            m[(pi, pj)] += v;
            if pi != pj {
                m[(pj, pi)] += v;
            }
        }
        for (members, mut m) in blocks.values().zip(dense) {
            let scale = m.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
            for d in 0..m.nrows() {
                m[(d, d)] += 1e-10 * scale;
            }
            if m.cholesky().is_none() {
                return Err(OptimError::NotPsd(members[0]));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveSettings {
    /// Absolute and relative duality-gap / feasibility tolerance.
    pub tolerance: f64,
    pub max_iter: u32,
    /// Skip the block-Cholesky positive-semidefiniteness check.
    pub assume_psd: bool,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self { tolerance: 1e-9, max_iter: 200, assume_psd: false }
    }
}

impl SolveSettings {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self { tolerance, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
    NumericalFailure,
}

/// KKT residuals recomputed from the returned primal/dual pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Multipliers of the equality rows (sign: `P x + q + Aeqᵀ y + Ainᵀ z + bound terms = 0`).
    pub eq_duals: Vec<f64>,
    /// Non-negative multipliers of the inequality rows.
    pub ineq_duals: Vec<f64>,
    pub residuals: Residuals,
    pub iterations: u32,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Compressed sparse column assembly from triplets (duplicates summed).
fn csc_from_triplets(m: usize, n: usize, mut trip: Vec<(usize, usize, f64)>) -> CscMatrix<f64> {
    trip.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
    let mut colptr = vec![0usize; n + 1];
    let mut rowval = Vec::with_capacity(trip.len());
    let mut nzval: Vec<f64> = Vec::with_capacity(trip.len());
    let mut last: Option<(usize, usize)> = None;
    for (r, c, v) in trip {
        if last == Some((r, c)) {
            *nzval.last_mut().unwrap() += v;
            continue;
        }
        rowval.push(r);
        nzval.push(v);
        colptr[c + 1] += 1;
        last = Some((r, c));
    }
    for c in 0..n {
        colptr[c + 1] += colptr[c];
    }
    CscMatrix::new(m, n, colptr, rowval, nzval)
}

/// Solves `prog` to `settings.tolerance`.
pub fn solve(prog: &ConvexProgram, settings: &SolveSettings) -> Result<Solution, OptimError> {
    prog.validate()?;
    if !settings.assume_psd {
        prog.check_psd()?;
    }
    let n = prog.num_vars;

    // Conic rows: equalities (zero cone) then inequalities and finite bounds (nonnegative cone).
    let mut trip = Vec::new();
    let mut b = Vec::new();
    let mut row = 0usize;
    for eq in &prog.equalities {
        for &(j, a) in &eq.coefs {
            trip.push((row, j, a));
        }
        b.push(eq.rhs);
        row += 1;
    }
    let n_eq = row;
    for ineq in &prog.inequalities {
        for &(j, a) in &ineq.coefs {
            trip.push((row, j, a));
        }
        b.push(ineq.rhs);
        row += 1;
    }
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        if prog.upper[j].is_finite() {
            trip.push((row, j, 1.0));
            b.push(prog.upper[j]);
            bound_rows.push((j, 1.0));
            row += 1;
        }
        if prog.lower[j].is_finite() {
            trip.push((row, j, -1.0));
            b.push(-prog.lower[j]);
            bound_rows.push((j, -1.0));
            row += 1;
        }
    }
    let m = row;
    let n_nonneg = m - n_eq;
    let a = csc_from_triplets(m, n, trip);
    let p = csc_from_triplets(n, n, prog.quadratic.clone());

    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    if n_eq > 0 {
        cones.push(ZeroConeT(n_eq));
    }
    if n_nonneg > 0 {
        cones.push(NonnegativeConeT(n_nonneg));
    }

    let tol = settings.tolerance;
    let clarabel_settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(settings.max_iter)
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .tol_feas(tol)
        .tol_ktratio(1e-7)
        .build()
        .map_err(|e| OptimError::Backend(e.to_string()))?;

    let mut solver = DefaultSolver::new(&p, &prog.linear, &a, &b, &cones, clarabel_settings)
        .map_err(|e| OptimError::Backend(format!("{e:?}")))?;
    solver.solve();
    let sol = &solver.solution;

    let x = sol.x.clone();
    let z = &sol.z;
    let eq_duals = z[..n_eq].to_vec();
    let ineq_duals = z[n_eq..n_eq + prog.inequalities.len()].to_vec();

    // Stationarity: P x + q + Aᵀ z = 0 in Clarabel's convention.
    let mut grad = prog.quadratic_times(&x);
    for (g, q) in grad.iter_mut().zip(&prog.linear) {
        *g += q;
    }
    for (r, eq) in prog.equalities.iter().enumerate() {
        for &(j, a) in &eq.coefs {
            grad[j] += a * z[r];
        }
    }
    for (r, ineq) in prog.inequalities.iter().enumerate() {
        for &(j, a) in &ineq.coefs {
            grad[j] += a * z[n_eq + r];
        }
    }
    let bound_offset = n_eq + prog.inequalities.len();
    for (k, &(j, sign)) in bound_rows.iter().enumerate() {
        grad[j] += sign * z[bound_offset + k];
    }
    let dual = grad.iter().fold(0.0_f64, |acc, g| acc.max(g.abs()));
    let primal = if x.iter().all(|v| v.is_finite()) { prog.primal_violation(&x) } else { f64::INFINITY };
    let complementarity = sol.s[n_eq..]
        .iter()
        .zip(&z[n_eq..])
        .fold(0.0_f64, |acc, (s, zz)| acc.max((s * zz).abs()));

    let status = match sol.status {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::AlmostSolved if primal <= 10.0 * tol.max(1e-7) => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::MaxIter,
        _ => SolveStatus::NumericalFailure,
    };

    Ok(Solution {
        status,
        objective: prog.objective(&x),
        x,
        eq_duals,
        ineq_duals,
        residuals: Residuals { primal, dual, complementarity },
        iterations: sol.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_qp_with_lower_bound() {
        // min x² s.t. x ≥ 3
        let mut prog = ConvexProgram::new(1);
        prog.add_quadratic(0, 0, 2.0);
        prog.set_lower(0, 3.0);
        let sol = solve(&prog, &SolveSettings::default()).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.x[0] - 3.0).abs() < 1e-7);
        assert!((sol.objective - 9.0).abs() < 1e-6);
    }

    #[test]
    fn box_lp_takes_sign_solution() {
        let c = [0.7, -1.3, 2.1, -0.2];
        let mut prog = ConvexProgram::new(c.len());
        for (j, &cj) in c.iter().enumerate() {
            prog.set_linear(j, cj);
            prog.set_bounds(j, -1.0, 1.0);
        }
        let sol = solve(&prog, &SolveSettings::default()).unwrap();
        assert!(sol.is_optimal());
        for (j, &cj) in c.iter().enumerate() {
            assert!((sol.x[j] + cj.signum()).abs() < 1e-6, "x[{j}] = {}", sol.x[j]);
        }
    }

    #[test]
    fn equality_constrained_projection() {
        // min ½‖x‖² s.t. x0 + x1 = 2
        let mut prog = ConvexProgram::new(2);
        prog.add_quadratic(0, 0, 1.0);
        prog.add_quadratic(1, 1, 1.0);
        prog.add_equality(vec![(0, 1.0), (1, 1.0)], 2.0);
        let sol = solve(&prog, &SolveSettings::default()).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-8 && (sol.x[1] - 1.0).abs() < 1e-8);
        assert!(sol.residuals.dual < 1e-7);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut prog = ConvexProgram::new(1);
        prog.add_inequality(vec![(0, 1.0)], 0.0);
        prog.add_inequality(vec![(0, -1.0)], -1.0);
        let sol = solve(&prog, &SolveSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);

        let mut prog = ConvexProgram::new(1);
        prog.set_linear(0, 1.0);
        prog.set_upper(0, 5.0);
        let sol = solve(&prog, &SolveSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Unbounded);
    }

    #[test]
    fn rejects_indefinite_cost() {
        let mut prog = ConvexProgram::new(2);
        prog.add_quadratic(0, 0, 1.0);
        prog.add_quadratic(1, 1, 1.0);
        prog.add_quadratic(0, 1, 3.0);
        assert!(matches!(solve(&prog, &SolveSettings::default()), Err(OptimError::NotPsd(0))));
    }

    #[test]
    fn rejects_bad_dimensions() {
        let mut prog = ConvexProgram::new(2);
        prog.add_inequality(vec![(5, 1.0)], 0.0);
        assert!(matches!(solve(&prog, &SolveSettings::default()), Err(OptimError::Dimension(_))));
    }

    #[test]
    fn repeated_solves_are_identical() {
        let mut prog = ConvexProgram::new(3);
        for j in 0..3 {
            prog.add_quadratic(j, j, 1.0 + j as f64);
            prog.set_linear(j, -(j as f64) - 0.5);
        }
        prog.add_inequality(vec![(0, 1.0), (1, 1.0), (2, 1.0)], 0.4);
        let a = solve(&prog, &SolveSettings::default()).unwrap();
        let b = solve(&prog, &SolveSettings::default()).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.objective, b.objective);
    }
}
