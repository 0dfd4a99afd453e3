//! Experiment harness: configuration, seeded runs, sweeps, verification
//! suites and result files.

pub mod config;
pub mod error;
pub mod run;
pub mod sweep;
pub mod theta;
pub mod verify;

pub use config::{ExperimentConfig, Task};
pub use error::{HarnessError, Result};
pub use run::{run, write_run, RunRecord};
pub use sweep::{sweep, write_sweep, Axis};
pub use verify::{verify, Report};
