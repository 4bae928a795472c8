//! Command-line front end for the simplex strategy engine: scenario
//! configuration, experiment execution, and CSV/JSON artifact emission.

#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod report;
pub mod scenario;

use thiserror::Error;

/// CLI failures, split by exit code: validation problems exit with 2,
/// runtime problems with 3.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

pub use config::{load_config, GeneratorSpec, Mode, ScenarioConfig};
pub use report::{aggregate, write_report, AggregateReport};
pub use scenario::{
    resolve_out_dir, run_scenario, run_simulate, ScenarioSummary, SimulateSummary,
};
