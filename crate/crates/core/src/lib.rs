//! Active learning over pair pools with smooth relative regret
//! approximations: biased-sampling estimators of `err(h') − err(h)` whose
//! error shrinks with `dist(h, h')`, and the learner that repeatedly
//! minimizes them.
//!
//! Tasks covered: ranking from pairwise preferences ([`ranking`]),
//! semi-supervised k-clustering ([`clustering`]), explicit finite classes
//! ([`generic`]) and linearly induced rankings ([`geometric`]).

pub mod bits;
pub mod clustering;
pub mod error;
pub mod estimator;
pub mod generic;
pub mod geometric;
pub mod learner;
pub mod oracle;
pub mod par;
pub mod pool;
pub mod ranking;
pub mod rng;

pub use bits::Bits;
pub use clustering::{Clustering, ClusteringBuilder};
pub use error::{Error, Result};
pub use estimator::{PairEstimator, RegretEstimator};
pub use generic::{FiniteClass, GenericBuilder};
pub use geometric::FeatureSet;
pub use learner::{run_algorithm1, Erm, Learner, Params, Trajectory};
pub use oracle::{InstanceOracle, LabelOracle, LabelTable, NoiseSpec, PairTask};
pub use pool::{distance, true_error, PairHypothesis, Pool};
pub use ranking::{LrppBuilder, Permutation};

/// Whether the crate was built with the rayon backend.
pub const PARALLEL: bool = par::is_parallel();
