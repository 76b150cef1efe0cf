//! Command-line driver for the private k-median library: CSV datasets in,
//! typed JSON reports out, every run reproducible from one seed.
//!
//! Exit codes: 0 on success, 2 on any validation or parse failure, 3 when a
//! private run aborts because the noisy instance degenerated.

use thiserror::Error;

pub mod data;
pub mod report;
pub mod runner;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("{0}: no data rows")]
    EmptyInput(String),
    #[error("{0}")]
    Validation(String),
    #[error("degenerate instance: {0}")]
    Degenerate(String),
}

impl CliError {
    /// Process exit code for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Degenerate(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn validation(err: impl std::fmt::Display) -> Self {
        CliError::Validation(err.to_string())
    }
}
