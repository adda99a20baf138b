mod oracles;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flexregion::clustering::{kmeans, within_cluster_sse};

#[test]
fn kmeans_matches_exhaustive_partitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..10 {
        let pts: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let res = kmeans(&pts, 2, case, 50).unwrap();
        let best = oracles::exhaustive_kmeans_sse(&pts, 2);
        assert!((res.sse - best).abs() < 1e-9, "case {case}: kmeans {} exhaustive {best}", res.sse);
    }
}

#[test]
fn repeated_points_do_not_leave_empty_clusters() {
    let pts = vec![vec![1.0, 1.0]; 4].into_iter().chain([vec![5.0, 5.0]]).collect::<Vec<_>>();
    let res = kmeans(&pts, 2, 0, 3).unwrap();
    let mut used = res.labels.clone();
    used.sort_unstable();
    used.dedup();
    assert_eq!(used, vec![0, 1]);
    assert!(res.sse.abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lloyd_history_is_non_increasing(
        pts in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 2), 4..30),
        c in 1usize..4,
        seed in 0u64..1000,
    ) {
        prop_assume!(c <= pts.len());
        let res = kmeans(&pts, c, seed, 2).unwrap();
        for w in res.sse_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
        prop_assert!((within_cluster_sse(&pts, &res.labels, c) - res.sse).abs() < 1e-9);
        prop_assert!(res.labels.iter().all(|&l| l < c));
        prop_assert_eq!(res.labels[0], 0);
    }

    #[test]
    fn same_seed_same_result(pts in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 3), 5..20), seed in 0u64..100) {
        prop_assert_eq!(kmeans(&pts, 2, seed, 4).unwrap(), kmeans(&pts, 2, seed, 4).unwrap());
    }
}
