//! Command-line harness: experiment configuration and the `train`, `eval`,
//! `analyze`, `fit-psych` and `check` commands.

pub mod commands;
pub mod config;

pub use commands::{run, Command};
pub use config::{resolve, AnalysisConfig, ExperimentConfig, OUTPUT_ROOT_VAR};

/// Failure of a command, split by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or arguments (exit 2).
    Config(String),
    /// Anything that went wrong while running (exit 1).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<timing_core::Error> for CliError {
    fn from(e: timing_core::Error) -> Self {
        match e {
            timing_core::Error::Config(m) => CliError::Config(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
