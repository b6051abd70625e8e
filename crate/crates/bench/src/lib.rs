//! Experiment harness: configuration, scheme orchestration, sweeps, result
//! export and plots.

pub mod config;
pub mod plan;
pub mod plot;
pub mod records;
pub mod run;

pub use config::{ExperimentConfig, Scheme};
pub use plan::{Pipeline, RunPlan, SeedSetup};
pub use records::ResultRecord;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("{0}")]
    Run(String),
}

impl BenchError {
    /// Process exit status: 2 configuration, 3 infeasible, 4 diverged,
    /// 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Infeasible(_) => 3,
            BenchError::Diverged(_) => 4,
            BenchError::Input(_) | BenchError::Io(_) | BenchError::Run(_) => 1,
        }
    }
}
