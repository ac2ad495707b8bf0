//! Command-line front end for the `covadj` power engine and trial simulator.

pub mod commands;
pub mod output;

use thiserror::Error;

pub use commands::{execute, Cli, Command};
pub use output::{Format, OutputDocument};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] covadj::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for usage errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(covadj::Error::Usage(_)) => 2,
            _ => 1,
        }
    }
}
