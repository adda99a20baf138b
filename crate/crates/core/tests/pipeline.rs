use proptest::prelude::*;

use flexregion::baselines::{fit_rc, rc_rmse, HvacSource};
use flexregion::data_model::{read_dataset, write_dataset, DatasetRole, TrainingDataset};
use flexregion::pipeline::{train_model, BuildingModel, ClusterCount, PipelineError, PipelineParams};
use flexregion::synthetic_plant::{generate_days, LinearRcPlant, PlantConfig, WeatherGenerator};

pub fn linear_plant() -> LinearRcPlant {
    LinearRcPlant {
        a: vec![-0.10, -0.12, -0.08, -0.15, -0.11],
        b: vec![-0.30, -0.25, -0.35, -0.20, -0.28],
        d: vec![0.05, -0.02, 0.03, 0.00, 0.04],
        base_load: vec![4.0, 5.0, 6.0, 6.5, 5.5, 4.5],
    }
}

#[test]
fn linear_plant_is_fitted_exactly_by_both_models() {
    let plant = linear_plant();
    let (train, hvac_train) = plant.generate(40, 1).unwrap();
    let (test, hvac_test) = plant.generate(20, 2).unwrap();
    let params = PipelineParams { grid_size: 4, ..PipelineParams::default() };
    let model = train_model(&train, None, &ClusterCount::Fixed(1), &params).unwrap();
    let ev = model.evaluate(&test).unwrap();
    assert!(ev.central_rmse <= 1e-6, "central rmse {}", ev.central_rmse);
    let rc = fit_rc(&train, HvacSource::Known(&hvac_train)).unwrap();
    assert!(rc_rmse(&rc, &test, HvacSource::Known(&hvac_test)).unwrap() <= 1e-6);
    for (got, want) in rc.a.iter().zip(&plant.a[..]).chain(rc.b.iter().zip(&plant.b[..])) {
        assert!((got - want).abs() < 1e-8);
    }
}

#[test]
fn bundle_json_round_trip_and_alpha_reselection() {
    let g = generate_days(&PlantConfig::office_small(), &WeatherGenerator::default(), 60, 24, 9).unwrap();
    let params = PipelineParams { grid_size: 10, ..PipelineParams::default() };
    let model = train_model(&g.dataset, None, &ClusterCount::Fixed(2), &params).unwrap();
    let back = BuildingModel::from_json(&model.to_json().unwrap()).unwrap();
    assert_eq!(model, back);
    let loose = model.with_alpha(0.3).unwrap();
    for (a, b) in model.models.iter().zip(&loose.models) {
        for (ra, rb) in a.regions.iter().zip(&b.regions) {
            assert!(rb.band.area <= ra.band.area + 1e-9 || ra.band.alpha_unmet);
        }
    }
    assert!(model.with_alpha(1.5).is_err());
}

#[test]
fn evaluation_errors() {
    let g = generate_days(&PlantConfig::office_small(), &WeatherGenerator::default(), 30, 24, 2).unwrap();
    let params = PipelineParams { grid_size: 4, ..PipelineParams::default() };
    let model = train_model(&g.dataset, None, &ClusterCount::Fixed(1), &params).unwrap();
    let empty = TrainingDataset::new(Vec::new(), 24, DatasetRole::Test).unwrap();
    assert!(matches!(model.evaluate(&empty), Err(PipelineError::EmptyEvaluation)));
    let plant = linear_plant();
    let (short, _) = plant.generate(5, 1).unwrap();
    assert!(matches!(model.evaluate(&short), Err(PipelineError::Periods { .. })));
    let select = ClusterCount::Select { candidates: vec![1, 2], per_period: false };
    assert!(matches!(train_model(&g.dataset, None, &select, &params), Err(PipelineError::NeedCv)));
    assert!(train_model(&g.dataset, None, &ClusterCount::Fixed(31), &params).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dataset_csv_round_trip(days in 1usize..6, seed in any::<u64>()) {
        let (ds, _) = linear_plant().generate(days, seed).unwrap();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let back = read_dataset(buf.as_slice(), ds.periods()).unwrap();
        prop_assert_eq!(back.days(), ds.days());
    }
}
