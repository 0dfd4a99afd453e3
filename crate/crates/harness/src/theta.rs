//! Disagreement-coefficient reports for the class behind a configuration.

use serde::Serialize;
use srra::clustering::all_clusterings;
use srra::generic::{FiniteClass, SHATTER_MAX_DIM, SHATTER_MAX_POOL};
use srra::geometric::{enumerate_orders_2d, FeatureSet};
use srra::ranking::all_permutations;
use srra::rng;

use crate::config::{ClassKind, ExperimentConfig, Task};
use crate::error::{HarnessError, Result};

/// Largest class for which every pivot is examined.
const UNIFORM_MAX_CLASS: usize = 6000;
const ENUMERATE_MAX_RANKING_N: usize = 8;
const ENUMERATE_MAX_CLUSTERING_N: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThetaReport {
    pub task: Task,
    pub pool_size: usize,
    pub class_size: usize,
    pub r_floor: f64,
    /// Maximum over pivots, when the class is small enough.
    pub theta_uniform: Option<f64>,
    /// Coefficient at the first class member.
    pub theta_first: f64,
    /// Range-space VC dimension, when the pool is small enough to search.
    pub vc_dimension: Option<usize>,
}

pub fn class_for(config: &ExperimentConfig) -> Result<FiniteClass> {
    let n = config.n;
    Ok(match config.task {
        Task::Generic => match &config.inputs.class {
            Some(path) => FiniteClass::read_csv(path)?,
            None => match config.class_kind {
                ClassKind::Thresholds => FiniteClass::thresholds(n)?,
                ClassKind::Intervals => FiniteClass::intervals(n)?,
            },
        },
        Task::Lrpp => {
            if n > ENUMERATE_MAX_RANKING_N {
                return Err(HarnessError::config(
                    "n",
                    format!("ranking classes are enumerated only up to n = {ENUMERATE_MAX_RANKING_N}"),
                ));
            }
            FiniteClass::from_pair_hypotheses(&all_permutations(n))?
        }
        Task::Clustering => {
            if n > ENUMERATE_MAX_CLUSTERING_N {
                return Err(HarnessError::config(
                    "n",
                    format!("clustering classes are enumerated only up to n = {ENUMERATE_MAX_CLUSTERING_N}"),
                ));
            }
            FiniteClass::from_pair_hypotheses(&all_clusterings(n, config.k.expect("validated")))?
        }
        Task::Geometric => {
            if config.d != Some(2) {
                return Err(HarnessError::config("d", "exact enumeration needs d = 2"));
            }
            let features = match &config.inputs.features {
                Some(path) => FeatureSet::read_csv(path)?,
                None => FeatureSet::random(
                    n,
                    2,
                    &mut rng::stream(config.params.master_seed, &[0x6665_6174]),
                )?,
            };
            let orders: Vec<_> = enumerate_orders_2d(&features)?.into_iter().map(|o| o.perm).collect();
            FiniteClass::from_pair_hypotheses(&orders)?
        }
    })
}

/// `r_floor` defaults to `μ` (itself `1/pool` when unset).
pub fn theta_report(config: &ExperimentConfig, r_floor: Option<f64>) -> Result<ThetaReport> {
    config.validate()?;
    let class = class_for(config)?;
    let pool = class.pool_size();
    let r_floor = r_floor.unwrap_or_else(|| config.params.mu_for(pool as u64));
    let theta_uniform = if class.len() <= UNIFORM_MAX_CLASS {
        Some(class.uniform_disagreement_coefficient(r_floor)?)
    } else {
        None
    };
    let vc_dimension = if pool <= SHATTER_MAX_POOL {
        Some(class.range_space_vc_dimension(SHATTER_MAX_DIM)?)
    } else {
        None
    };
    Ok(ThetaReport {
        task: config.task,
        pool_size: pool,
        class_size: class.len(),
        r_floor,
        theta_uniform,
        theta_first: class.disagreement_coefficient(0, r_floor)?,
        vc_dimension,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds_report() {
        let c = ExperimentConfig::from_json(
            r#"{"task":"generic","n":20,"params":{"epsilon":0.2,"iterations":1}}"#,
        )
        .unwrap();
        let r = theta_report(&c, None).unwrap();
        assert_eq!(r.class_size, 21);
        assert!((r.theta_uniform.unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(r.vc_dimension, Some(2));
    }

    #[test]
    fn large_rankings_are_refused() {
        let c = ExperimentConfig::from_json(
            r#"{"task":"lrpp","n":9,"params":{"epsilon":0.2,"iterations":1}}"#,
        )
        .unwrap();
        assert!(matches!(theta_report(&c, None), Err(HarnessError::Config { .. })));
    }
}
