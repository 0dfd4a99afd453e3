//! One end-to-end learning run and its on-disk record.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use srra::clustering::{sample_size_q, Clustering, ClusteringBuilder};
use srra::estimator::PairEstimator;
use srra::generic::{sample_size_m, FiniteClass, GenericBuilder};
use srra::geometric::{enumerate_orders_2d, erm_sampled_directions, induced_permutation, FeatureSet};
use srra::learner::{
    class_noise_rate, clustering_noise_rate, ranking_noise_rate, run_algorithm1, ClassLearner,
    ClusteringLearner, Erm, Learner, PairClassLearner, Params, RankingLearner, RoundRecord,
    RunStatus, Trajectory,
};
use srra::oracle::{Counters, InstanceOracle, LabelOracle, LabelTable, NoiseKind};
use srra::ranking::{sample_size_p, LrppBuilder, Permutation};
use srra::rng;

use crate::config::{ClassKind, ExperimentConfig, Task};
use crate::error::{HarnessError, Result};

const TAG_TRUTH: u64 = 0x7472_7574;
const TAG_H0: u64 = 0x6830;
const TAG_FEATURES: u64 = 0x6665_6174;
/// Directions tried per round by the heuristic minimizer for `d != 2`.
const SAMPLED_DIRECTIONS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterSnapshot {
    pub distinct_labeled: u64,
    pub raw_calls: u64,
    pub verification_reads: u64,
}

impl From<Counters> for CounterSnapshot {
    fn from(c: Counters) -> Self {
        Self {
            distinct_labeled: c.distinct_labeled,
            raw_calls: c.raw_calls,
            verification_reads: c.verification_reads,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: String,
    pub config: ExperimentConfig,
    /// The `p`, `q` or `m` actually used.
    pub sample_size: usize,
    pub status: RunStatus,
    pub trajectory: Vec<RoundRecord>,
    pub final_err: Option<f64>,
    /// Optimal in-class error, when exact minimization of the full table is
    /// feasible.
    pub nu: Option<f64>,
    pub excess: Option<f64>,
    pub counters: CounterSnapshot,
    pub wall_ms: f64,
}

impl RunRecord {
    /// Distinct labels requested by round `i` (`i >= 1`).
    pub fn round_queries(&self, i: usize) -> Option<u64> {
        self.trajectory.get(i).map(|r| r.distinct_queries)
    }
}

struct Outcome {
    sample_size: usize,
    trajectory: Trajectory,
    nu: Option<f64>,
    counters: Counters,
}

fn seeded(params: &Params, tag: u64) -> rng::StreamRng {
    rng::stream(params.master_seed, &[tag])
}

pub fn run(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    let start = std::time::Instant::now();
    let outcome = match config.task {
        Task::Lrpp => run_lrpp(config)?,
        Task::Clustering => run_clustering(config)?,
        Task::Generic => run_generic(config)?,
        Task::Geometric => run_geometric(config)?,
    };
    let final_err = outcome.trajectory.final_round().err;
    let excess = final_err.zip(outcome.nu).map(|(e, nu)| e - nu);
    Ok(RunRecord {
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        sample_size: outcome.sample_size,
        status: outcome.trajectory.status.clone(),
        trajectory: outcome.trajectory.rounds,
        final_err,
        nu: outcome.nu,
        excess,
        counters: outcome.counters.into(),
        wall_ms: if config.record_timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        },
    })
}

fn budgeted(oracle: LabelOracle, budget: Option<u64>) -> LabelOracle {
    match budget {
        Some(b) => oracle.with_budget(b),
        None => oracle,
    }
}

fn load_ranking_truth(config: &ExperimentConfig) -> Result<Permutation> {
    match &config.inputs.truth {
        Some(path) => {
            let p = Permutation::read_csv(path)?;
            if p.n() != config.n {
                return Err(HarnessError::config("inputs.truth", format!("has {} items, n = {}", p.n(), config.n)));
            }
            Ok(p)
        }
        None => Ok(Permutation::random(config.n, &mut seeded(&config.params, TAG_TRUTH))?),
    }
}

fn run_algorithm<L: Learner>(
    learner: &mut L,
    h0: L::Hyp,
    config: &ExperimentConfig,
) -> Trajectory {
    run_algorithm1(learner, h0, config.params.iterations, config.record_timing).0
}

fn run_lrpp(config: &ExperimentConfig) -> Result<Outcome> {
    let params = &config.params;
    let truth = load_ranking_truth(config)?;
    let oracle = budgeted(LabelOracle::ranking(&truth, &config.noise)?, config.budget);
    let labels = oracle.reveal_all().ok();
    let nu = match labels {
        Some(t) if config.n <= srra::ranking::EXACT_RANKING_MAX_N => Some(ranking_noise_rate(t)?.1),
        _ => None,
    };
    let p = match config.overrides.p {
        Some(p) => p,
        None => sample_size_p(config.n, params.epsilon, params.c1)?,
    };
    let mut learner = RankingLearner {
        oracle: &oracle,
        builder: LrppBuilder::new(p)?,
        erm: config.erm,
        params,
        labels,
    };
    let h0 = Permutation::random(config.n, &mut seeded(params, TAG_H0))?;
    let trajectory = run_algorithm(&mut learner, h0, config);
    Ok(Outcome {
        sample_size: p,
        trajectory,
        nu,
        counters: oracle.counters(),
    })
}

fn run_clustering(config: &ExperimentConfig) -> Result<Outcome> {
    let params = &config.params;
    let k = config.k.expect("validated");
    let truth = match &config.inputs.truth {
        Some(path) => {
            let c = Clustering::read_csv(path, Some(k))?;
            if c.n() != config.n {
                return Err(HarnessError::config("inputs.truth", format!("has {} items, n = {}", c.n(), config.n)));
            }
            c
        }
        None => Clustering::random(config.n, k, &mut seeded(params, TAG_TRUTH))?,
    };
    let oracle = budgeted(LabelOracle::clustering(&truth, &config.noise)?, config.budget);
    let labels = oracle.reveal_all().ok();
    let exact_ok = config.n <= srra::clustering::EXACT_CLUSTERING_MAX_N
        && k <= srra::clustering::EXACT_CLUSTERING_MAX_K;
    let nu = match labels {
        Some(t) if exact_ok => Some(clustering_noise_rate(t, k)?.1),
        _ => None,
    };
    let q = match config.overrides.q {
        Some(q) => q,
        None => sample_size_q(config.n, k, params.epsilon, params.c2)?,
    };
    let mut learner = ClusteringLearner {
        oracle: &oracle,
        builder: ClusteringBuilder::new(q)?,
        k,
        erm: config.erm,
        params,
        labels,
    };
    let h0 = Clustering::random(config.n, k, &mut seeded(params, TAG_H0))?;
    let trajectory = run_algorithm(&mut learner, h0, config);
    Ok(Outcome {
        sample_size: q,
        trajectory,
        nu,
        counters: oracle.counters(),
    })
}

/// `m` from the formula, with `θ` measured on the class at floor `μ` and the
/// range-space VC dimension.
pub fn generic_sample_size(class: &FiniteClass, params: &Params, mu: f64) -> Result<usize> {
    let theta = class.uniform_disagreement_coefficient(mu)?;
    let d = class.vc_dimension_estimate();
    Ok(sample_size_m(theta.max(1.0), d, params.epsilon, mu, params.delta, params.c3)?)
}

fn generic_builder(config: &ExperimentConfig, class: &FiniteClass) -> Result<GenericBuilder> {
    let mu = config.params.mu_for(class.pool_size() as u64);
    if mu <= 0.0 {
        return Err(HarnessError::config("params.mu", "the annulus construction needs mu > 0"));
    }
    let m = match config.overrides.m {
        Some(m) => m,
        None => generic_sample_size(class, &config.params, mu)?,
    };
    Ok(GenericBuilder::new(m, mu)?)
}

fn run_generic(config: &ExperimentConfig) -> Result<Outcome> {
    let params = &config.params;
    let class = match &config.inputs.class {
        Some(path) => FiniteClass::read_csv(path)?,
        None => match config.class_kind {
            ClassKind::Thresholds => FiniteClass::thresholds(config.n)?,
            ClassKind::Intervals => FiniteClass::intervals(config.n)?,
        },
    };
    if class.pool_size() != config.n {
        return Err(HarnessError::config(
            "n",
            format!("class has {} instances, n = {}", class.pool_size(), config.n),
        ));
    }
    let truth = seeded(params, TAG_TRUTH).random_range(0..class.len());
    let eta = match config.noise.kind {
        NoiseKind::UniformFlip { eta } => eta,
        _ => 0.0,
    };
    let mut oracle =
        InstanceOracle::with_uniform_noise(class.hypothesis(truth), eta, config.noise.seed)?;
    if let Some(b) = config.budget {
        oracle = oracle.with_budget(b);
    }
    let labels = oracle.reveal_all().ok();
    let nu = labels.map(|y| class_noise_rate(&class, y).1);
    let builder = generic_builder(config, &class)?;
    let mut learner = ClassLearner {
        class: &class,
        oracle: &oracle,
        builder,
        params,
        labels,
    };
    let h0 = seeded(params, TAG_H0).random_range(0..class.len());
    let trajectory = run_algorithm(&mut learner, h0, config);
    Ok(Outcome {
        sample_size: builder.m,
        trajectory,
        nu,
        counters: oracle.counters(),
    })
}

/// Minimizes an LRPP estimator over orders induced by sampled directions.
struct DirectionLearner<'a> {
    inner: RankingLearner<'a>,
    features: &'a FeatureSet,
}

impl Learner for DirectionLearner<'_> {
    type Hyp = Permutation;
    type Est = PairEstimator;

    fn build(&mut self, round: usize, pivot: &Permutation) -> srra::Result<PairEstimator> {
        self.inner.build(round, pivot)
    }

    fn minimize(
        &mut self,
        round: usize,
        est: &PairEstimator,
        pivot: &Permutation,
    ) -> srra::Result<(Permutation, f64)> {
        let seed = self.inner.params.round_seed(round);
        let found = erm_sampled_directions(est, self.features, SAMPLED_DIRECTIONS, seed)?;
        // keep the pivot when no sampled order beats it
        let best = if est.numerator(&found) < 0 { found } else { pivot.clone() };
        let value = est.evaluate(&best);
        Ok((best, value))
    }

    fn distinct_queries(&self) -> u64 {
        self.inner.distinct_queries()
    }

    fn error(&self, h: &Permutation) -> Option<f64> {
        self.inner.error(h)
    }

    fn snapshot(&self, h: &Permutation) -> Vec<usize> {
        self.inner.snapshot(h)
    }
}

fn run_geometric(config: &ExperimentConfig) -> Result<Outcome> {
    let params = &config.params;
    let d = config.d.expect("validated");
    let features = match &config.inputs.features {
        Some(path) => FeatureSet::read_csv(path)?,
        None => FeatureSet::random(config.n, d, &mut seeded(params, TAG_FEATURES))?,
    };
    if features.n() != config.n || features.d() != d {
        return Err(HarnessError::config(
            "inputs.features",
            format!("has n = {}, d = {}; config says n = {}, d = {d}", features.n(), features.d(), config.n),
        ));
    }
    let truth = match &config.inputs.truth {
        Some(_) => load_ranking_truth(config)?,
        None => {
            let mut rng = seeded(params, TAG_TRUTH);
            let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
            induced_permutation(&w, &features)?
        }
    };
    let oracle = budgeted(LabelOracle::ranking(&truth, &config.noise)?, config.budget);
    let labels: Option<&LabelTable> = oracle.reveal_all().ok();

    if d == 2 {
        let members: Vec<Permutation> =
            enumerate_orders_2d(&features)?.into_iter().map(|o| o.perm).collect();
        let class = FiniteClass::from_pair_hypotheses(&members)?;
        let nu = labels.map(|t| {
            members
                .iter()
                .map(|p| t.error_of(p))
                .fold(f64::INFINITY, f64::min)
        });
        let builder = generic_builder(config, &class)?;
        let mut learner = PairClassLearner {
            members: &members,
            class: &class,
            oracle: &oracle,
            builder,
            params,
            labels,
        };
        let h0 = seeded(params, TAG_H0).random_range(0..members.len());
        let trajectory = run_algorithm(&mut learner, h0, config);
        return Ok(Outcome {
            sample_size: builder.m,
            trajectory,
            nu,
            counters: oracle.counters(),
        });
    }

    let p = match config.overrides.p {
        Some(p) => p,
        None => sample_size_p(config.n, params.epsilon, params.c1)?,
    };
    let mut learner = DirectionLearner {
        inner: RankingLearner {
            oracle: &oracle,
            builder: LrppBuilder::new(p)?,
            erm: Erm::Exact,
            params,
            labels,
        },
        features: &features,
    };
    let mut rng = seeded(params, TAG_H0);
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let h0 = induced_permutation(&w, &features)?;
    let trajectory = run_algorithm(&mut learner, h0, config);
    Ok(Outcome {
        sample_size: p,
        trajectory,
        nu: None,
        counters: oracle.counters(),
    })
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes `<name>.json` and `<name>_trajectory.csv` into `dir`.
pub fn write_run(record: &RunRecord, dir: &Path, name: &str) -> Result<(PathBuf, PathBuf)> {
    create_dir(dir)?;
    let json_path = dir.join(format!("{name}.json"));
    let mut text = serde_json::to_string_pretty(record)?;
    text.push('\n');
    fs::write(&json_path, text).map_err(|e| HarnessError::io(&json_path, e))?;

    let csv_path = dir.join(format!("{name}_trajectory.csv"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record([
        "iteration",
        "err",
        "excess",
        "distinct_queries",
        "cumulative_queries",
        "wall_ms",
    ])?;
    for r in &record.trajectory {
        let excess = r.err.zip(record.nu).map(|(e, nu)| e - nu);
        w.write_record([
            r.iteration.to_string(),
            fmt_opt(r.err),
            fmt_opt(excess),
            r.distinct_queries.to_string(),
            r.cumulative_queries.to_string(),
            r.wall_ms.to_string(),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(&csv_path, e))?;
    Ok((json_path, csv_path))
}

pub fn read_run(path: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
