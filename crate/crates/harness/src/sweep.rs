//! One-axis parameter sweeps.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::run::{create_dir, run, write_run, RunRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    N,
    Epsilon,
    K,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::N => "n",
            Axis::Epsilon => "epsilon",
            Axis::K => "k",
        }
    }

    /// Copy of `template` with this axis set to `value`.
    pub fn apply(self, template: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut c = template.clone();
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(HarnessError::config(self.name(), format!("{value} is not a positive integer")))
            }
        };
        match self {
            Axis::N => c.n = count()?,
            Axis::K => c.k = Some(count()?),
            Axis::Epsilon => c.params.epsilon = value,
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub record: RunRecord,
}

/// Runs every point (in parallel when enabled); results are in input order.
pub fn sweep(template: &ExperimentConfig, axis: Axis, values: &[f64]) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(HarnessError::config("values", "need at least one value"));
    }
    let configs = values
        .iter()
        .map(|&v| axis.apply(template, v))
        .collect::<Result<Vec<_>>>()?;
    let records = srra::par::map_slice(&configs, run);
    values
        .iter()
        .zip(records)
        .map(|(&value, record)| Ok(SweepPoint { value, record: record? }))
        .collect()
}

fn point_label(axis: Axis, value: f64) -> String {
    format!("{}={value}", axis.name())
}

/// Writes each point's record and trajectory plus `<name>_summary.csv` with
/// columns `value,distinct_queries,final_err,nu,excess`.
pub fn write_sweep(points: &[SweepPoint], axis: Axis, dir: &Path, name: &str) -> Result<PathBuf> {
    create_dir(dir)?;
    for p in points {
        write_run(&p.record, dir, &format!("{name}_{}", point_label(axis, p.value)))?;
    }
    let path = dir.join(format!("{name}_summary.csv"));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["value", "distinct_queries", "final_err", "nu", "excess"])?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for p in points {
        w.write_record([
            p.value.to_string(),
            p.record.counters.distinct_labeled.to_string(),
            opt(p.record.final_err),
            opt(p.record.nu),
            opt(p.record.excess),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}
