//! The iterative learner: each round builds a regret estimator around the
//! current hypothesis and moves to its minimizer.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::clustering::{erm_exact_clustering, erm_local_search_clustering, Clustering, ClusteringBuilder};
use crate::error::{invalid, Error, Result};
use crate::estimator::{PairEstimator, RegretEstimator};
use crate::generic::{erm_class, FiniteClass, GenericBuilder};
use crate::oracle::{InstanceOracle, LabelOracle, LabelTable};
use crate::pool::PairHypothesis;
use crate::ranking::{
    check_constant, check_epsilon, erm_exact_ranking, erm_local_search_ranking, LocalSearch,
    LrppBuilder, Permutation,
};
use crate::rng;

fn default_delta() -> f64 {
    0.1
}

fn default_constant() -> f64 {
    1.0
}

/// Accuracy and sampling parameters shared by all tasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub epsilon: f64,
    /// Defaults to `1/N` for the pool at hand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub iterations: usize,
    #[serde(default = "default_constant")]
    pub c1: f64,
    #[serde(default = "default_constant")]
    pub c2: f64,
    #[serde(default = "default_constant")]
    pub c3: f64,
    #[serde(default)]
    pub master_seed: u64,
}

impl Params {
    pub fn new(epsilon: f64, iterations: usize, master_seed: u64) -> Self {
        Self {
            epsilon,
            mu: None,
            delta: default_delta(),
            iterations,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_epsilon(self.epsilon)?;
        if let Some(mu) = self.mu {
            if !(0.0..=1.0).contains(&mu) {
                return Err(invalid("mu", format!("must lie in [0, 1], got {mu}")));
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta", format!("must lie in (0, 1), got {}", self.delta)));
        }
        check_constant("c1", self.c1)?;
        check_constant("c2", self.c2)?;
        check_constant("c3", self.c3)
    }

    /// `μ`, or `1/pool_size` when unset.
    pub fn mu_for(&self, pool_size: u64) -> f64 {
        self.mu.unwrap_or(1.0 / pool_size as f64)
    }

    /// Seed for the estimator built in round `round`.
    pub fn round_seed(&self, round: usize) -> u64 {
        rng::derive(self.master_seed, &[rng::TAG_ROUND, round as u64])
    }
}

/// How each round's estimator is minimized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Erm {
    Exact,
    LocalSearch { restarts: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub iteration: usize,
    pub hypothesis: Vec<usize>,
    /// True error, when the full label table is available.
    pub err: Option<f64>,
    /// Estimator value of the new hypothesis (absent for `h0`).
    pub estimate: Option<f64>,
    pub distinct_queries: u64,
    pub cumulative_queries: u64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    BudgetExhausted { budget: u64 },
    BuilderFailed { message: String },
    MinimizerFailed { message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub rounds: Vec<RoundRecord>,
    pub status: RunStatus,
}

impl Trajectory {
    pub fn final_round(&self) -> &RoundRecord {
        self.rounds.last().expect("h0 is always recorded")
    }
}

/// One task's estimator construction and minimization.
pub trait Learner {
    type Hyp: Clone;
    type Est;

    fn build(&mut self, round: usize, pivot: &Self::Hyp) -> Result<Self::Est>;

    /// Returns a minimizer and its estimator value.
    fn minimize(&mut self, round: usize, est: &Self::Est, pivot: &Self::Hyp)
        -> Result<(Self::Hyp, f64)>;

    /// Distinct labels obtained so far.
    fn distinct_queries(&self) -> u64;

    fn error(&self, h: &Self::Hyp) -> Option<f64>;

    fn snapshot(&self, h: &Self::Hyp) -> Vec<usize>;
}

/// Runs `iterations` rounds of `h ← argmin f_h` from `h0`. Failures stop the
/// run and are reported in the status; the rounds completed so far are kept.
pub fn run_algorithm1<L: Learner>(
    learner: &mut L,
    h0: L::Hyp,
    iterations: usize,
    record_timing: bool,
) -> (Trajectory, L::Hyp) {
    let start = Instant::now();
    let elapsed = |t: Instant| {
        if record_timing {
            t.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        }
    };
    let base = learner.distinct_queries();
    let mut rounds = vec![RoundRecord {
        iteration: 0,
        hypothesis: learner.snapshot(&h0),
        err: learner.error(&h0),
        estimate: None,
        distinct_queries: 0,
        cumulative_queries: base,
        wall_ms: elapsed(start),
    }];
    let mut h = h0;
    let mut status = RunStatus::Completed;
    for round in 1..=iterations {
        let t = Instant::now();
        let before = learner.distinct_queries();
        let est = match learner.build(round, &h) {
            Ok(est) => est,
            Err(Error::BudgetExhausted { budget, .. }) => {
                status = RunStatus::BudgetExhausted { budget };
                break;
            }
            Err(e) => {
                status = RunStatus::BuilderFailed { message: e.to_string() };
                break;
            }
        };
        let (next, value) = match learner.minimize(round, &est, &h) {
            Ok(r) => r,
            Err(e) => {
                status = RunStatus::MinimizerFailed { message: e.to_string() };
                break;
            }
        };
        let after = learner.distinct_queries();
        h = next;
        rounds.push(RoundRecord {
            iteration: round,
            hypothesis: learner.snapshot(&h),
            err: learner.error(&h),
            estimate: Some(value),
            distinct_queries: after - before,
            cumulative_queries: after,
            wall_ms: elapsed(t),
        });
    }
    (Trajectory { rounds, status }, h)
}

fn pair_minimize<H: PairHypothesis>(
    est: &PairEstimator,
    found: Result<H>,
) -> Result<(H, f64)> {
    let h = found?;
    let value = est.evaluate(&h);
    Ok((h, value))
}

/// Ranking from pairwise preferences.
pub struct RankingLearner<'a> {
    pub oracle: &'a LabelOracle,
    pub builder: LrppBuilder,
    pub erm: Erm,
    pub params: &'a Params,
    /// Full labels for measuring true error; never used for learning.
    pub labels: Option<&'a LabelTable>,
}

impl Learner for RankingLearner<'_> {
    type Hyp = Permutation;
    type Est = PairEstimator;

    fn build(&mut self, round: usize, pivot: &Permutation) -> Result<PairEstimator> {
        self.builder.build(pivot, self.oracle, self.params.round_seed(round))
    }

    fn minimize(
        &mut self,
        round: usize,
        est: &PairEstimator,
        pivot: &Permutation,
    ) -> Result<(Permutation, f64)> {
        let found = match self.erm {
            Erm::Exact => erm_exact_ranking(est),
            Erm::LocalSearch { restarts } => erm_local_search_ranking(
                est,
                pivot,
                LocalSearch {
                    restarts,
                    seed: self.params.round_seed(round),
                },
            ),
        };
        pair_minimize(est, found)
    }

    fn distinct_queries(&self) -> u64 {
        self.oracle.counters().distinct_labeled
    }

    fn error(&self, h: &Permutation) -> Option<f64> {
        self.labels.map(|t| t.error_of(h))
    }

    fn snapshot(&self, h: &Permutation) -> Vec<usize> {
        h.snapshot()
    }
}

/// Semi-supervised k-clustering.
pub struct ClusteringLearner<'a> {
    pub oracle: &'a LabelOracle,
    pub builder: ClusteringBuilder,
    pub k: usize,
    pub erm: Erm,
    pub params: &'a Params,
    pub labels: Option<&'a LabelTable>,
}

impl Learner for ClusteringLearner<'_> {
    type Hyp = Clustering;
    type Est = PairEstimator;

    fn build(&mut self, round: usize, pivot: &Clustering) -> Result<PairEstimator> {
        self.builder.build(pivot, self.oracle, self.params.round_seed(round))
    }

    fn minimize(
        &mut self,
        round: usize,
        est: &PairEstimator,
        pivot: &Clustering,
    ) -> Result<(Clustering, f64)> {
        let found = match self.erm {
            Erm::Exact => erm_exact_clustering(est, self.k),
            Erm::LocalSearch { restarts } => erm_local_search_clustering(
                est,
                pivot,
                LocalSearch {
                    restarts,
                    seed: self.params.round_seed(round),
                },
            ),
        };
        pair_minimize(est, found)
    }

    fn distinct_queries(&self) -> u64 {
        self.oracle.counters().distinct_labeled
    }

    fn error(&self, h: &Clustering) -> Option<f64> {
        self.labels.map(|t| t.error_of(h))
    }

    fn snapshot(&self, h: &Clustering) -> Vec<usize> {
        h.snapshot()
    }
}

/// Any explicit finite class; hypotheses are class indices and the
/// minimizer is exact.
pub struct ClassLearner<'a> {
    pub class: &'a FiniteClass,
    pub oracle: &'a InstanceOracle,
    pub builder: GenericBuilder,
    pub params: &'a Params,
    pub labels: Option<&'a Bits>,
}

impl Learner for ClassLearner<'_> {
    type Hyp = usize;
    type Est = RegretEstimator<usize>;

    fn build(&mut self, round: usize, pivot: &usize) -> Result<RegretEstimator<usize>> {
        self.builder
            .build(self.class, *pivot, self.oracle, self.params.round_seed(round))
    }

    fn minimize(
        &mut self,
        _round: usize,
        est: &RegretEstimator<usize>,
        _pivot: &usize,
    ) -> Result<(usize, f64)> {
        let i = erm_class(est, self.class);
        Ok((i, est.evaluate(self.class.hypothesis(i))))
    }

    fn distinct_queries(&self) -> u64 {
        self.oracle.counters().distinct_labeled
    }

    fn error(&self, h: &usize) -> Option<f64> {
        self.labels
            .map(|y| self.class.measure(&self.class.hypothesis(*h).xor(y)))
    }

    fn snapshot(&self, h: &usize) -> Vec<usize> {
        vec![*h]
    }
}

/// An explicit class of pair hypotheses (e.g. the planar induced orders)
/// learned through the annulus construction; instances are ordered pairs and
/// labels come from the pair oracle, so `(u, v)` and `(v, u)` share one query.
pub struct PairClassLearner<'a, H: PairHypothesis> {
    pub members: &'a [H],
    pub class: &'a FiniteClass,
    pub oracle: &'a LabelOracle,
    pub builder: GenericBuilder,
    pub params: &'a Params,
    pub labels: Option<&'a LabelTable>,
}

impl<H: PairHypothesis> Learner for PairClassLearner<'_, H> {
    type Hyp = usize;
    type Est = RegretEstimator<usize>;

    fn build(&mut self, round: usize, pivot: &usize) -> Result<RegretEstimator<usize>> {
        let pool = self.oracle.pool();
        let n = pool.n();
        self.builder
            .build_with(self.class, *pivot, self.params.round_seed(round), |x| {
                let u = x / (n - 1);
                let r = x % (n - 1);
                self.oracle.query(u, if r < u { r } else { r + 1 })
            })
    }

    fn minimize(
        &mut self,
        _round: usize,
        est: &RegretEstimator<usize>,
        _pivot: &usize,
    ) -> Result<(usize, f64)> {
        let i = erm_class(est, self.class);
        Ok((i, est.evaluate(self.class.hypothesis(i))))
    }

    fn distinct_queries(&self) -> u64 {
        self.oracle.counters().distinct_labeled
    }

    fn error(&self, h: &usize) -> Option<f64> {
        self.labels.map(|t| t.error_of(&self.members[*h]))
    }

    fn snapshot(&self, h: &usize) -> Vec<usize> {
        self.members[*h].snapshot()
    }
}

/// `ν` for rankings by exact minimization of the full-information objective.
pub fn ranking_noise_rate(table: &LabelTable) -> Result<(Permutation, f64)> {
    let pivot = Permutation::identity(table.pool().n())?;
    let best = erm_exact_ranking(&PairEstimator::exhaustive(table, &pivot)?)?;
    let err = table.error_of(&best);
    Ok((best, err))
}

/// `ν` for k-clusterings by exact minimization.
pub fn clustering_noise_rate(table: &LabelTable, k: usize) -> Result<(Clustering, f64)> {
    let pivot = Clustering::new(vec![0; table.pool().n()], k)?;
    let best = erm_exact_clustering(&PairEstimator::exhaustive(table, &pivot)?, k)?;
    let err = table.error_of(&best);
    Ok((best, err))
}

/// `ν` over an explicit class.
pub fn class_noise_rate(class: &FiniteClass, labels: &Bits) -> (usize, f64) {
    let (i, count) = class
        .hypotheses()
        .iter()
        .enumerate()
        .map(|(i, h)| (i, h.xor_count(labels)))
        .min_by_key(|&(i, c)| (c, i))
        .expect("class is non-empty");
    (i, count as f64 / class.pool_size() as f64)
}
