use std::path::PathBuf;

use thiserror::Error;

/// Exit code for bad scenario files, unknown models and dimension errors.
pub const EXIT_INPUT: i32 = 3;
/// Exit code for integration or factorization failures.
pub const EXIT_NUMERICAL: i32 = 4;
/// Exit code when `verify` finds a verdict that disagrees with theory or
/// the scenario's expectations.
pub const EXIT_UNEXPECTED: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        }
    }
}

impl From<rankflow::Error> for CliError {
    fn from(e: rankflow::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
