//! Ensemble experiments, artifact output and the `visilin` command line.

pub mod config;
pub mod error;
pub mod experiments;
pub mod farm;
pub mod report;
pub mod stats;

pub use config::{ExperimentId, RunConfig};
pub use error::{HarnessError, Result};
pub use farm::Workers;
pub use report::{Report, ResultRow};

/// Runs the configured experiment.
pub fn run(cfg: &RunConfig, workers: Workers) -> Result<Report> {
    experiments::run(cfg, workers)
}
