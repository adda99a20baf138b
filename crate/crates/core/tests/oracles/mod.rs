//! Brute-force reference solvers shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use flexregion::region_builder::FeasibleRegion;
use flexregion::scheduler::{LoadNoiseSet, WindScenarioSet};

const GOLDEN: f64 = 0.618_033_988_749_895;

/// Minimizes a convex function on `[lo, hi]`.
pub fn golden(mut lo: f64, mut hi: f64, iters: usize, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        }
    }
    let (x, fx) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    // The endpoints matter when the minimizer sits on the boundary.
    [(lo, f(lo)), (hi, f(hi)), (x, fx)].into_iter().fold((x, fx), |b, c| if c.1 < b.1 { c } else { b })
}

/// Optimal value of the band QP for one load period with constant context, cooling signs:
/// bands `θ̂ᵁ = a_U p + c_U`, `θ̂ᴸ = a_L p + c_L` with `a_U, a_L ≤ 0`.
///
/// Since `θ̂ᵁ ≥ θ̂ᴸ`, at most one hinge is positive per point, so the objective splits into
/// an upper and a lower part coupled only through `c_U − c_L ≥ max_k (a_L − a_U) p_k`.
/// Both slopes are found by nested golden-section search over the convex value function,
/// on a slope range well beyond the steepest pairwise secant.
pub fn blse_oracle(points: &[(f64, f64)], beta: f64) -> f64 {
    assert!(beta > 0.0 && beta < 1.0, "oracle needs an interior beta");
    let mut steepest = 1.0f64;
    for (i, &(p1, y1)) in points.iter().enumerate() {
        for &(p2, y2) in &points[i + 1..] {
            if p1 != p2 {
                steepest = steepest.max(((y2 - y1) / (p2 - p1)).abs());
            }
        }
    }
    let slope_bound = 4.0 * steepest;
    let g_upper = |a: f64, c: f64| -> f64 {
        points.iter().map(|&(p, y)| beta * (y - a * p - c).max(0.0).powi(2) + (1.0 - beta) * (a * p + c)).sum()
    };
    let g_lower = |a: f64, c: f64| -> f64 {
        points.iter().map(|&(p, y)| beta * (a * p + c - y).max(0.0).powi(2) - (1.0 - beta) * (a * p + c)).sum()
    };
    let margin = (1.0 - beta) / (2.0 * beta) + 1.0;
    let value = |a_u: f64, a_l: f64| -> f64 {
        let r_u: Vec<f64> = points.iter().map(|&(p, y)| y - a_u * p).collect();
        let r_l: Vec<f64> = points.iter().map(|&(p, y)| y - a_l * p).collect();
        let (lo_u, hi_u) = (min(&r_u) - margin, max(&r_u) + 1.0);
        let (lo_l, hi_l) = (min(&r_l) - 1.0, max(&r_l) + margin);
        let (cu, fu) = golden(lo_u, hi_u, 90, |c| g_upper(a_u, c));
        let (cl, fl) = golden(lo_l, hi_l, 90, |c| g_lower(a_l, c));
        let gap = points.iter().map(|&(p, _)| (a_l - a_u) * p).fold(f64::NEG_INFINITY, f64::max);
        if cu - cl >= gap {
            return fu + fl;
        }
        let (lo, hi) = (lo_l.min(lo_u - gap), hi_l.max(hi_u - gap));
        golden(lo, hi, 120, |c| g_upper(a_u, c + gap) + g_lower(a_l, c)).1
    };
    golden(-slope_bound, 0.0, 90, |a_u| golden(-slope_bound, 0.0, 90, |a_l| value(a_u, a_l)).1).1
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest within-cluster SSE over every labelling that uses all `clusters` labels.
pub fn exhaustive_kmeans_sse(points: &[Vec<f64>], clusters: usize) -> f64 {
    let k = points.len();
    let dim = points[0].len();
    let total = clusters.pow(k as u32);
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; k];
    for code in 0..total {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = c % clusters;
            c /= clusters;
        }
        let mut sums = vec![vec![0.0; dim]; clusters];
        let mut counts = vec![0usize; clusters];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        if counts.contains(&0) {
            continue;
        }
        let sse: f64 = points
            .iter()
            .zip(&labels)
            .map(|(p, &l)| p.iter().zip(&sums[l]).map(|(v, s)| (v - s / counts[l] as f64).powi(2)).sum::<f64>())
            .sum();
        best = best.min(sse);
    }
    best
}

/// Grid-search value of the two-stage program for one building.
/// Day-ahead and recourse profiles range over the region's points on a `step` lattice.
pub fn schedule_grid_oracle(
    region: &FeasibleRegion,
    tau: &[f64],
    v: f64,
    wind: &WindScenarioSet,
    noise: &LoadNoiseSet,
    step: f64,
) -> f64 {
    let n = region.periods();
    assert_eq!(n, 2, "grid oracle is two-dimensional");
    let axis = |t: usize| -> Vec<f64> {
        let p = &region.params[t];
        let lo = (p.p_min / step).ceil() as i64;
        let hi = (p.p_max / step).floor() as i64;
        (lo..=hi).map(|i| i as f64 * step).collect()
    };
    let (a0, a1) = (axis(0), axis(1));
    let mut feasible = Vec::new();
    for &x in &a0 {
        for &y in &a1 {
            let p = [x, y];
            if region.contains(&p, 1e-9).unwrap().inside {
                feasible.push(p);
            }
        }
    }
    assert!(!feasible.is_empty(), "grid misses the region");
    let delta = wind.deviations();
    let mut best = f64::INFINITY;
    for base in &feasible {
        let energy: f64 = tau.iter().zip(base).map(|(a, b)| a * b).sum();
        let mut balancing = 0.0;
        for w in 0..wind.len() {
            let mut inner = f64::INFINITY;
            for q in &feasible {
                let mut e = 0.0;
                for b in 0..noise.len() {
                    let r: f64 = (0..n).map(|t| (base[t] - q[t] - noise.scenarios[b][t] + delta[w][t]).abs()).sum();
                    e += noise.probabilities[b] * r;
                }
                inner = inner.min(e);
            }
            balancing += wind.probabilities[w] * inner;
        }
        best = best.min(energy + v * balancing);
    }
    best
}
