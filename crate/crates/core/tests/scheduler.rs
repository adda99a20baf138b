mod oracles;

use flexregion::band_estimator::BandParameters;
use flexregion::region_builder::{assemble_region, FeasibleRegion, Limits, RegionParameters};
use flexregion::scheduler::{build_program, mitigation_metric, solve_program, LoadNoiseSet, Schedule, WindScenarioSet};
use flexregion::synthetic_plant::HvacMode;

/// Box `[lo, hi]` per period with non-binding bands.
pub fn box_region(bounds: &[(f64, f64)]) -> FeasibleRegion {
    let params = bounds
        .iter()
        .enumerate()
        .map(|(i, &(lo, hi))| {
            RegionParameters::new(
                Limits { p_min: lo, p_max: hi, theta_min: 20.0, theta_max: 26.0 },
                BandParameters::constant(i + 1, 22.0, 24.0, HvacMode::Cooling),
            )
        })
        .collect();
    assemble_region(params, 23.0, vec![30.0; bounds.len()], true).unwrap()
}

/// Two periods; the bands give `2 ≤ p₁ ≤ 6` and `2 ≤ 0.3 p₁ + 0.4 p₂ ≤ 4` inside `[0, 8]²`.
pub fn band_region() -> FeasibleRegion {
    let lim = Limits { p_min: 0.0, p_max: 8.0, theta_min: 21.0, theta_max: 25.0 };
    let band = |a: Vec<f64>, upper: f64, lower: f64| BandParameters {
        a_upper: a.clone(),
        b_upper: [0.0, 0.0, upper],
        a_lower: a,
        b_lower: [0.0, 0.0, lower],
        ..BandParameters::constant(0, 0.0, 0.0, HvacMode::Cooling)
    };
    let mut b1 = band(vec![-0.5], 26.0, 24.0);
    b1.t = 1;
    let mut b2 = band(vec![-0.3, -0.4], 27.0, 25.0);
    b2.t = 2;
    assemble_region(vec![RegionParameters::new(lim, b1), RegionParameters::new(lim, b2)], 23.0, vec![30.0; 2], true).unwrap()
}

fn two_scenarios() -> WindScenarioSet {
    WindScenarioSet::new(vec![vec![3.0, 1.0], vec![1.0, 3.5]], Some(vec![0.4, 0.6])).unwrap()
}

fn all_in_region(s: &Schedule, regions: &[FeasibleRegion]) -> bool {
    regions.iter().enumerate().all(|(i, r)| {
        r.contains(&s.base[i], 1e-6).unwrap().inside && s.recourse[i].iter().all(|p| r.contains(p, 1e-6).unwrap().inside)
    })
}

fn check_against_grid(region: FeasibleRegion, tau: [f64; 2], v: f64, noise: LoadNoiseSet) {
    let wind = two_scenarios();
    let sp = build_program(std::slice::from_ref(&region), &tau, v, &wind, &noise).unwrap();
    let s = solve_program(&sp).unwrap();
    assert!(all_in_region(&s, std::slice::from_ref(&region)));
    let step = 0.1;
    let oracle = oracles::schedule_grid_oracle(&region, &tau, v, &wind, &noise, step);
    // Moving every coordinate by one step changes the objective by at most this much.
    let lipschitz = tau.iter().map(|t| t.abs()).sum::<f64>() + 2.0 * v * tau.len() as f64;
    assert!(s.objective <= oracle + 1e-6, "lp {} above grid {oracle}", s.objective);
    assert!(oracle - s.objective <= lipschitz * step, "lp {} vs grid {oracle}", s.objective);
}

#[test]
fn box_region_matches_grid_search() {
    check_against_grid(box_region(&[(1.0, 5.0), (0.5, 4.0)]), [1.0, 1.5], 2.0, LoadNoiseSet::zero(2));
}

#[test]
fn band_region_with_noise_matches_grid_search() {
    let noise = LoadNoiseSet { scenarios: vec![vec![0.3, -0.2], vec![-0.3, 0.2]], probabilities: vec![0.5, 0.5] };
    check_against_grid(band_region(), [1.0, 1.5], 3.0, noise);
}

#[test]
fn zero_compensation_gives_cheapest_profile() {
    let region = band_region();
    let sp = build_program(std::slice::from_ref(&region), &[1.0, 1.5], 0.0, &two_scenarios(), &LoadNoiseSet::zero(2)).unwrap();
    let s = solve_program(&sp).unwrap();
    // p₁ is the cheaper way to meet 0.3 p₁ + 0.4 p₂ ≥ 2 but is capped at 6.
    assert!((s.base[0][0] - 6.0).abs() < 1e-6 && (s.base[0][1] - 0.5).abs() < 1e-6);
    assert!((s.objective - 6.75).abs() < 1e-6);
    assert_eq!(s.balancing_cost, 0.0);
    assert!(s.recourse[0].iter().all(|p| p == &s.base[0]));
}

#[test]
fn no_deviation_means_no_recourse() {
    let regions = vec![band_region(), box_region(&[(1.0, 5.0), (0.5, 4.0)])];
    let wind = WindScenarioSet::new(vec![vec![2.0, 2.0]; 3], None).unwrap();
    let s = solve_program(&build_program(&regions, &[1.0, 1.5], 10.0, &wind, &LoadNoiseSet::zero(2)).unwrap()).unwrap();
    assert!((s.objective - (6.75 + 1.0 + 0.75)).abs() < 1e-6, "objective {}", s.objective);
    assert!(s.balancing_cost.abs() < 1e-6);
    assert!(all_in_region(&s, &regions));
}

#[test]
fn mitigation_endpoints() {
    let region = box_region(&[(0.0, 10.0), (0.0, 10.0)]);
    let wind = two_scenarios();
    // A wide box and high compensation absorb every deviation.
    let s = solve_program(&build_program(std::slice::from_ref(&region), &[1.0, 1.0], 50.0, &wind, &LoadNoiseSet::zero(2)).unwrap()).unwrap();
    assert!((mitigation_metric(&s, &wind, &LoadNoiseSet::zero(2)).unwrap() - 1.0).abs() < 1e-6);
    // A single admissible profile cannot respond at all.
    let point = box_region(&[(2.0, 2.0), (3.0, 3.0)]);
    let s = solve_program(&build_program(std::slice::from_ref(&point), &[1.0, 1.0], 50.0, &wind, &LoadNoiseSet::zero(2)).unwrap()).unwrap();
    assert!(mitigation_metric(&s, &wind, &LoadNoiseSet::zero(2)).unwrap().abs() < 1e-6);
}
