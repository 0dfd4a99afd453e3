use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srra::clustering::{all_clusterings, Clustering, ClusteringBuilder, Reassignment};
use srra::estimator::PlannedSample;
use srra::oracle::{LabelOracle, LabelTable, NoiseSpec};
use srra::pool::{disagreement_count, PairHypothesis};
use srra::ranking::{all_permutations, footrule, inversions, Insertion, LrppBuilder, Permutation};
use srra::PairEstimator;

fn perm_from_keys(keys: Vec<u32>) -> Permutation {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by_key(|&i| (keys[i], i));
    Permutation::from_order(order).unwrap()
}

fn arb_perm(n: usize) -> impl Strategy<Value = Permutation> {
    prop::collection::vec(any::<u32>(), n).prop_map(perm_from_keys)
}

fn arb_clustering(n: usize, k: usize) -> impl Strategy<Value = Clustering> {
    prop::collection::vec(0..k, n).prop_map(move |a| Clustering::new(a, k).unwrap())
}

/// Quadratic inversion count, independent of the merge-sort implementation.
fn slow_inversions(a: &Permutation, b: &Permutation) -> u64 {
    let n = a.n();
    let mut count = 0;
    for u in 0..n {
        for v in u + 1..n {
            if (a.rank(u) < a.rank(v)) != (b.rank(u) < b.rank(v)) {
                count += 1;
            }
        }
    }
    count
}

/// Brute-force error count over all ordered pairs.
fn slow_errors<H: PairHypothesis>(h: &H, table: &LabelTable) -> i64 {
    let n = h.pool().n();
    let mut count = 0;
    for u in 0..n {
        for v in 0..n {
            if u != v && h.relates(u, v) != table.label(u, v) {
                count += 1;
            }
        }
    }
    count
}

proptest! {
    #[test]
    fn distance_is_a_pseudometric(a in arb_perm(9), b in arb_perm(9), c in arb_perm(9)) {
        let ab = disagreement_count(&a, &b).unwrap();
        prop_assert_eq!(ab, disagreement_count(&b, &a).unwrap());
        prop_assert_eq!(disagreement_count(&a, &a).unwrap(), 0);
        prop_assert!(ab <= disagreement_count(&a, &c).unwrap() + disagreement_count(&c, &b).unwrap());
        prop_assert_eq!(ab, 2 * slow_inversions(&a, &b));
    }

    #[test]
    fn clustering_distance_is_a_pseudometric(
        a in arb_clustering(10, 3), b in arb_clustering(10, 3), c in arb_clustering(10, 3),
    ) {
        let ab = disagreement_count(&a, &b).unwrap();
        prop_assert_eq!(ab, disagreement_count(&b, &a).unwrap());
        prop_assert!(ab <= disagreement_count(&a, &c).unwrap() + disagreement_count(&c, &b).unwrap());
        prop_assert_eq!(disagreement_count(&a, &a.canonical()).unwrap(), 0);
    }

    #[test]
    fn footrule_sandwich(n in 2usize..60, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Permutation::random(n, &mut rng).unwrap();
        let b = Permutation::random(n, &mut rng).unwrap();
        let inv = inversions(&a, &b).unwrap();
        let fr = footrule(&a, &b).unwrap();
        prop_assert_eq!(inv, slow_inversions(&a, &b));
        prop_assert!(inv <= fr && fr <= 2 * inv);
    }
}

#[test]
fn ranking_delta_matches_full_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let truth = Permutation::random(6, &mut rng).unwrap();
    let oracle = LabelOracle::ranking(&truth, &NoiseSpec::uniform(0.2, 5)).unwrap();
    let pivot = Permutation::random(6, &mut rng).unwrap();
    let est = LrppBuilder::new(2).unwrap().build(&pivot, &oracle, 3).unwrap();
    for _ in 0..1000 {
        let h = Permutation::random(6, &mut rng).unwrap();
        let mv = Insertion {
            item: rng.random_range(0..6),
            to: rng.random_range(0..6),
        };
        let after = h.with_insertion(mv.item, mv.to);
        let full = est.evaluate(&after) - est.evaluate(&h);
        let delta = est.evaluate_delta(&h, &mv).unwrap();
        assert!((full - delta).abs() <= 1e-12, "{full} vs {delta}");
    }
    let null = Insertion { item: 2, to: pivot.rank(2) };
    assert_eq!(est.evaluate_delta(&pivot, &null).unwrap(), 0.0);
    assert!(est.evaluate_delta(&pivot, &Insertion { item: 6, to: 0 }).is_err());
}

#[test]
fn clustering_delta_matches_full_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let truth = Clustering::random(6, 3, &mut rng).unwrap();
    let oracle = LabelOracle::clustering(&truth, &NoiseSpec::uniform(0.2, 5)).unwrap();
    let pivot = Clustering::random(6, 3, &mut rng).unwrap();
    let est = ClusteringBuilder::new(2).unwrap().build(&pivot, &oracle, 4).unwrap();
    for _ in 0..1000 {
        let h = Clustering::random(6, 3, &mut rng).unwrap();
        let mv = Reassignment {
            item: rng.random_range(0..6),
            to: rng.random_range(0..3),
        };
        let after = h.with_reassignment(mv.item, mv.to);
        let full = est.evaluate(&after) - est.evaluate(&h);
        let delta = est.evaluate_delta(&h, &mv).unwrap();
        assert!((full - delta).abs() <= 1e-12, "{full} vs {delta}");
    }
}

#[test]
fn untouched_item_moves_are_free() {
    let truth = Clustering::new(vec![0, 0, 1, 1, 2], 3).unwrap();
    let oracle = LabelOracle::clustering(&truth, &NoiseSpec::none()).unwrap();
    let plan = [
        PlannedSample { key: (0, 1), weight: 1 },
        PlannedSample { key: (2, 3), weight: 1 },
    ];
    let est = PairEstimator::from_plan(1, &plan, &truth, &oracle).unwrap();
    let mv = Reassignment { item: 4, to: 0 };
    assert_eq!(est.evaluate_delta(&truth, &mv).unwrap(), 0.0);
}

#[test]
fn single_sample_value() {
    // pivot correct on (0, 1), the other hypothesis wrong: value w / N
    let pivot = Permutation::identity(4).unwrap();
    let oracle = LabelOracle::ranking(&pivot, &NoiseSpec::none()).unwrap();
    let plan = [PlannedSample { key: (0, 1), weight: 5 }];
    let est = PairEstimator::from_plan(1, &plan, &pivot, &oracle).unwrap();
    let other = Permutation::from_order(vec![1, 0, 2, 3]).unwrap();
    assert!((est.evaluate(&other) - 5.0 / 12.0).abs() < 1e-15);
    assert_eq!(est.evaluate(&pivot), 0.0);
}

#[test]
fn exhaustive_estimators_equal_regret() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let truth = Permutation::random(6, &mut rng).unwrap();
    let oracle = LabelOracle::ranking(&truth, &NoiseSpec::uniform(0.25, 1)).unwrap();
    let table = oracle.fresh();
    let table = table.reveal_all().unwrap();
    let pivot = Permutation::random(6, &mut rng).unwrap();
    let est = LrppBuilder::new(6).unwrap().build(&pivot, &oracle, 0).unwrap();
    let base = slow_errors(&pivot, table);
    for h in all_permutations(6) {
        let reg = (slow_errors(&h, table) - base) as f64 / 30.0;
        assert!((est.evaluate(&h) - reg).abs() <= 1e-12);
    }

    let truth = Clustering::random(6, 3, &mut rng).unwrap();
    let oracle = LabelOracle::clustering(&truth, &NoiseSpec::uniform(0.25, 1)).unwrap();
    let table = oracle.fresh();
    let table = table.reveal_all().unwrap();
    let pivot = Clustering::random(6, 3, &mut rng).unwrap();
    let est = ClusteringBuilder::new(6).unwrap().build(&pivot, &oracle, 0).unwrap();
    let base = slow_errors(&pivot, table);
    for h in all_clusterings(6, 3) {
        let reg = (slow_errors(&h, table) - base) as f64 / 30.0;
        assert!((est.evaluate(&h) - reg).abs() <= 1e-12);
    }
}

#[test]
fn sampled_estimators_vanish_at_pivot_and_index_twice() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for seed in 0..20 {
        let truth = Permutation::random(30, &mut rng).unwrap();
        let oracle = LabelOracle::ranking(&truth, &NoiseSpec::uniform(0.1, seed)).unwrap();
        let pivot = Permutation::random(30, &mut rng).unwrap();
        let est = LrppBuilder::new(3).unwrap().build(&pivot, &oracle, seed).unwrap();
        assert_eq!(est.evaluate(&pivot), 0.0);
        assert_eq!(est.item_index().total_entries(), 2 * est.len());
        assert!(est.samples().iter().all(|s| s.weight > 0));

        let truth = Clustering::random(30, 4, &mut rng).unwrap();
        let oracle = LabelOracle::clustering(&truth, &NoiseSpec::uniform(0.1, seed)).unwrap();
        let pivot = Clustering::random(30, 4, &mut rng).unwrap();
        let est = ClusteringBuilder::new(3).unwrap().build(&pivot, &oracle, seed).unwrap();
        assert_eq!(est.evaluate(&pivot), 0.0);
        assert_eq!(est.item_index().total_entries(), 2 * est.len());
    }
}

/// Mean over independent builds against the exact regret, within three
/// standard errors.
fn check_unbiased<H: PairHypothesis>(
    build: impl Fn(u64) -> PairEstimator + Sync,
    targets: &[(H, f64)],
    builds: u64,
) {
    let values: Vec<Vec<f64>> = (0..builds)
        .map(|seed| {
            let est = build(seed);
            targets.iter().map(|(h, _)| est.evaluate(h)).collect()
        })
        .collect();
    for (j, (_, reg)) in targets.iter().enumerate() {
        let m = builds as f64;
        let mean = values.iter().map(|v| v[j]).sum::<f64>() / m;
        let var = values.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let stderr = (var / m).sqrt();
        assert!(
            (mean - reg).abs() <= 3.0 * stderr + 1e-12,
            "target {j}: mean {mean}, regret {reg}, stderr {stderr}"
        );
    }
}

#[test]
fn ranking_estimator_is_unbiased() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let truth = Permutation::random(8, &mut rng).unwrap();
    let oracle = LabelOracle::ranking(&truth, &NoiseSpec::uniform(0.2, 2)).unwrap();
    let table = oracle.fresh();
    let table = table.reveal_all().unwrap();
    let pivot = Permutation::random(8, &mut rng).unwrap();
    let base = slow_errors(&pivot, table);
    let targets: Vec<_> = (0..5)
        .map(|_| {
            let h = Permutation::random(8, &mut rng).unwrap();
            let reg = (slow_errors(&h, table) - base) as f64 / 56.0;
            (h, reg)
        })
        .collect();
    let builder = LrppBuilder::new(2).unwrap();
    check_unbiased(|s| builder.build(&pivot, &oracle, s).unwrap(), &targets, 20_000);
}

#[test]
fn clustering_estimator_is_unbiased() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let truth = Clustering::random(8, 3, &mut rng).unwrap();
    let oracle = LabelOracle::clustering(&truth, &NoiseSpec::uniform(0.2, 2)).unwrap();
    let table = oracle.fresh();
    let table = table.reveal_all().unwrap();
    let pivot = Clustering::new(vec![0, 0, 0, 0, 1, 1, 1, 2], 3).unwrap();
    let base = slow_errors(&pivot, table);
    let targets: Vec<_> = (0..5)
        .map(|_| {
            let h = Clustering::random(8, 3, &mut rng).unwrap();
            let reg = (slow_errors(&h, table) - base) as f64 / 56.0;
            (h, reg)
        })
        .collect();
    let builder = ClusteringBuilder::new(2).unwrap();
    check_unbiased(|s| builder.build(&pivot, &oracle, s).unwrap(), &targets, 20_000);
}
