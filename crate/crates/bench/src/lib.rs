//! Experiment harness for `scoregan-core`: contamination scenarios, seeded
//! trials, property checks, CSV/JSON reports and checkpoints.

pub mod checkpoint;
pub mod checks;
pub mod report;
pub mod runner;
mod serde_float;
pub mod spec;

pub use runner::{run_experiment, scaling_sweep, Aggregate, TrialReport, TrialRow};
pub use spec::{Axis, EstimatorSpec, ExperimentSpec};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] scoregan_core::Error),
    #[error("estimator failed: {0}")]
    Estimator(String),
}

impl BenchError {
    /// Process exit status: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            _ => 1,
        }
    }
}
