//! Experiment runner: simulated and price-file backtests of the betting
//! strategies, summary tables and run comparison.

pub mod compare;
pub mod config;
pub mod report;
pub mod runner;

pub use config::ExperimentConfig;
pub use runner::{backtest, simulate, Command, RunOutput};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments or configuration; nothing was run.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}
