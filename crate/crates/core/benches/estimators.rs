//! Estimator construction and local-search minimization, on one worker
//! thread versus the full rayon pool. Built without the `parallel` feature,
//! only the sequential variants run.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use srra::clustering::{erm_local_search_clustering, Clustering, ClusteringBuilder};
use srra::generic::{FiniteClass, GenericBuilder};
use srra::oracle::{InstanceOracle, LabelOracle, NoiseSpec};
use srra::ranking::{erm_local_search_ranking, LocalSearch, LrppBuilder, Permutation};

fn modes() -> Vec<(&'static str, usize)> {
    let mut m = vec![("sequential", 1)];
    if srra::PARALLEL {
        m.push(("parallel", 0));
    }
    m
}

#[cfg(feature = "parallel")]
fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

#[cfg(not(feature = "parallel"))]
fn with_threads<R: Send>(_threads: usize, f: impl FnOnce() -> R + Send) -> R {
    f()
}

fn ranking(c: &mut Criterion) {
    let mut group = c.benchmark_group("lrpp_build");
    group.sample_size(20);
    for n in [400usize, 1600] {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let truth = Permutation::random(n, &mut rng).unwrap();
        let oracle = LabelOracle::ranking(&truth, &NoiseSpec::uniform(0.1, 1)).unwrap();
        let pivot = Permutation::random(n, &mut rng).unwrap();
        let builder = LrppBuilder::new(8).unwrap();
        for (mode, threads) in modes() {
            group.bench_with_input(BenchmarkId::new(mode, n), &n, |b, _| {
                b.iter(|| with_threads(threads, || black_box(builder.build(&pivot, &oracle, 7).unwrap())))
            });
        }
    }
    group.finish();

    let mut group = c.benchmark_group("lrpp_local_search");
    group.sample_size(10);
    let n = 400;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let truth = Permutation::random(n, &mut rng).unwrap();
    let oracle = LabelOracle::ranking(&truth, &NoiseSpec::uniform(0.1, 1)).unwrap();
    let pivot = Permutation::random(n, &mut rng).unwrap();
    let est = LrppBuilder::new(8).unwrap().build(&pivot, &oracle, 7).unwrap();
    let search = LocalSearch { restarts: 8, seed: 1 };
    for (mode, threads) in modes() {
        group.bench_function(BenchmarkId::new(mode, n), |b| {
            b.iter(|| with_threads(threads, || black_box(erm_local_search_ranking(&est, &pivot, search).unwrap())))
        });
    }
    group.finish();
}

fn clustering(c: &mut Criterion) {
    let mut group = c.benchmark_group("clustering_build_and_search");
    group.sample_size(10);
    let n = 800;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let truth = Clustering::random(n, 5, &mut rng).unwrap();
    let oracle = LabelOracle::clustering(&truth, &NoiseSpec::uniform(0.1, 2)).unwrap();
    let pivot = Clustering::random(n, 5, &mut rng).unwrap();
    let builder = ClusteringBuilder::new(12).unwrap();
    let search = LocalSearch { restarts: 8, seed: 2 };
    for (mode, threads) in modes() {
        group.bench_function(BenchmarkId::new(mode, n), |b| {
            b.iter(|| {
                with_threads(threads, || {
                    let est = builder.build(&pivot, &oracle, 5).unwrap();
                    black_box(erm_local_search_clustering(&est, &pivot, search).unwrap())
                })
            })
        });
    }
    group.finish();
}

fn generic(c: &mut Criterion) {
    let mut group = c.benchmark_group("theta_and_annuli");
    group.sample_size(10);
    let class = FiniteClass::intervals(120).unwrap();
    let oracle = InstanceOracle::with_uniform_noise(class.hypothesis(50), 0.1, 3).unwrap();
    let builder = GenericBuilder::new(200, 1.0 / 120.0).unwrap();
    for (mode, threads) in modes() {
        group.bench_function(BenchmarkId::new(mode, "intervals_120"), |b| {
            b.iter(|| {
                with_threads(threads, || {
                    let theta = class.uniform_disagreement_coefficient(1.0 / 120.0).unwrap();
                    let est = builder.build(&class, 10, &oracle, 1).unwrap();
                    black_box((theta, est.len()))
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, ranking, clustering, generic);
criterion_main!(benches);
