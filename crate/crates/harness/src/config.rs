//! Experiment configuration, shared by the CLI flags and `--config` files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use srra::clustering::{EXACT_CLUSTERING_MAX_K, EXACT_CLUSTERING_MAX_N};
use srra::learner::{Erm, Params};
use srra::oracle::{NoiseKind, NoiseSpec};
use srra::ranking::EXACT_RANKING_MAX_N;

use crate::error::{HarnessError, Result};

pub const OUT_DIR_ENV: &str = "SRRA_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "srra-out";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Lrpp,
    Clustering,
    Generic,
    Geometric,
}

/// Built-in classes for the generic task.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ClassKind {
    #[default]
    Thresholds,
    Intervals,
}

/// Forced sample sizes replacing the formulas.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

/// Optional input files; anything absent is generated from the master seed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    /// Ground-truth ranking (one row of items) or clustering (`item,cluster`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    /// Feature vectors `item,x1,…,xd` for the geometric task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    /// 0/1 hypothesis matrix for the generic task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_name")]
    pub name: String,
}

fn default_name() -> String {
    "run".into()
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: None,
            name: default_name(),
        }
    }
}

fn default_erm() -> Erm {
    Erm::Exact
}

fn default_noise() -> NoiseSpec {
    NoiseSpec::none()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    pub params: Params,
    #[serde(default = "default_noise")]
    pub noise: NoiseSpec,
    #[serde(default = "default_erm")]
    pub erm: Erm,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default)]
    pub class_kind: ClassKind,
    /// Cap on distinct labels; true errors are not tracked when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default)]
    pub inputs: Inputs,
    #[serde(default)]
    pub output: OutputSpec,
    /// Record wall-clock times; off keeps outputs byte-reproducible.
    #[serde(default)]
    pub record_timing: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            HarnessError::config(path, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(HarnessError::config("n", format!("need at least 2 items, got {}", self.n)));
        }
        self.params.validate().map_err(|e| field_error("params", e))?;
        self.noise.validate().map_err(|e| field_error("noise", e))?;
        for (name, v) in [("p", self.overrides.p), ("q", self.overrides.q), ("m", self.overrides.m)] {
            if v == Some(0) {
                return Err(HarnessError::config(format!("overrides.{name}"), "must be positive"));
            }
        }
        if let Erm::LocalSearch { restarts: 0 } = self.erm {
            return Err(HarnessError::config("erm.restarts", "must be at least 1"));
        }
        match self.task {
            Task::Lrpp => {
                if self.erm == Erm::Exact && self.n > EXACT_RANKING_MAX_N {
                    return Err(HarnessError::config(
                        "erm",
                        format!("exact ranking ERM supports n <= {EXACT_RANKING_MAX_N}; use local_search"),
                    ));
                }
            }
            Task::Clustering => {
                let k = match self.k {
                    Some(k) if k >= 1 => k,
                    _ => return Err(HarnessError::config("k", "clustering needs k >= 1")),
                };
                if self.erm == Erm::Exact
                    && (self.n > EXACT_CLUSTERING_MAX_N || k > EXACT_CLUSTERING_MAX_K)
                {
                    return Err(HarnessError::config(
                        "erm",
                        format!(
                            "exact clustering ERM supports n <= {EXACT_CLUSTERING_MAX_N}, \
                             k <= {EXACT_CLUSTERING_MAX_K}; use local_search"
                        ),
                    ));
                }
                if matches!(self.noise.kind, NoiseKind::DistanceDecay { .. }) {
                    return Err(HarnessError::config("noise.kind", "distance_decay applies to rankings only"));
                }
            }
            Task::Generic => {
                if !matches!(self.noise.kind, NoiseKind::None | NoiseKind::UniformFlip { .. }) {
                    return Err(HarnessError::config("noise.kind", "the generic task supports none or uniform_flip"));
                }
            }
            Task::Geometric => {
                if !matches!(self.d, Some(d) if d >= 1) {
                    return Err(HarnessError::config("d", "geometric needs d >= 1"));
                }
            }
        }
        Ok(())
    }

    /// Output directory: explicit argument, then the config, then the
    /// environment, then `srra-out`.
    pub fn out_dir(&self, explicit: Option<&Path>) -> PathBuf {
        explicit
            .map(Path::to_path_buf)
            .or_else(|| self.output.dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

fn field_error(section: &str, e: srra::Error) -> HarnessError {
    match e {
        srra::Error::InvalidParam { name, reason } => {
            HarnessError::config(format!("{section}.{name}"), reason)
        }
        other => HarnessError::config(section, other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LRPP: &str = r#"{
        "task": "lrpp",
        "n": 8,
        "params": {"epsilon": 0.2, "iterations": 3, "master_seed": 7},
        "noise": {"kind": "uniform_flip", "eta": 0.1, "seed": 3},
        "erm": {"kind": "local_search", "restarts": 4},
        "overrides": {"p": 4}
    }"#;

    #[test]
    fn parse_emit_parse_is_identity() {
        let a = ExperimentConfig::from_json(LRPP).unwrap();
        let b = ExperimentConfig::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn errors_name_the_field() {
        let bad = LRPP.replace("\"epsilon\": 0.2", "\"epsilon\": 0.5");
        let err = ExperimentConfig::from_json(&bad).unwrap_err();
        assert!(matches!(err, HarnessError::Config { ref path, .. } if path == "params.epsilon"), "{err}");

        let bad = LRPP.replace("\"eta\": 0.1", "\"eta\": 0.7");
        let err = ExperimentConfig::from_json(&bad).unwrap_err();
        assert!(matches!(err, HarnessError::Config { ref path, .. } if path == "noise.eta"), "{err}");

        let bad = LRPP.replace("\"p\": 4", "\"p\": 0");
        let err = ExperimentConfig::from_json(&bad).unwrap_err();
        assert!(matches!(err, HarnessError::Config { ref path, .. } if path == "overrides.p"));

        let bad = LRPP.replace("\"p\": 4", "\"p\": 4, \"z\": 1");
        let err = ExperimentConfig::from_json(&bad).unwrap_err();
        assert!(matches!(err, HarnessError::Config { ref path, .. } if path.starts_with("overrides")), "{err}");

        let bad = LRPP.replace("\"lrpp\"", "\"clustering\"");
        let err = ExperimentConfig::from_json(&bad).unwrap_err();
        assert!(matches!(err, HarnessError::Config { ref path, .. } if path == "k"));

        let bad = LRPP.replace("\"lrpp\"", "\"geometric\"");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn exact_erm_limits() {
        let bad = LRPP
            .replace("\"n\": 8", "\"n\": 12")
            .replace(r#"{"kind": "local_search", "restarts": 4}"#, r#"{"kind": "exact"}"#);
        let err = ExperimentConfig::from_json(&bad).unwrap_err();
        assert!(matches!(err, HarnessError::Config { ref path, .. } if path == "erm"));
    }

    #[test]
    fn out_dir_precedence() {
        let mut c = ExperimentConfig::from_json(LRPP).unwrap();
        assert_eq!(c.out_dir(Some(Path::new("a"))), PathBuf::from("a"));
        c.output.dir = Some("b".into());
        assert_eq!(c.out_dir(None), PathBuf::from("b"));
    }
}
