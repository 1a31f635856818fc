//! Configuration-driven harness that runs the solvers of `scouple-core`
//! and writes CSV artifacts with a run manifest.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod manifest;
pub mod report;
pub mod run;

pub use config::{ConfigError, ExperimentConfig, Kind};
pub use manifest::Manifest;
pub use report::compare_report;
pub use run::{execute, plan, run_experiment, Job, RunError, RunOutput, RunSummary};
