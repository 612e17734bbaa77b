//! IO, file formats, and command implementations for the `wavefit` CLI.
//!
//! The analytical model and the optimizer live in `wavefit-core`; this
//! crate adds everything that touches the filesystem: GPU and model spec
//! files, profile CSVs, plan JSON, run manifests, and the subcommands.

pub mod catalog;
pub mod commands;
pub mod iofs;
pub mod manifest;
pub mod model_file;
pub mod profile_csv;
pub mod range;

use thiserror::Error;

/// Process exit codes: 0 success, 2 input error, 3 IO error, 4 infeasible
/// or failed result (the output is still written).
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Infeasible(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Io(_) => 3,
            CliError::Infeasible(_) => 4,
        }
    }
}

impl From<wavefit_core::Error> for CliError {
    fn from(err: wavefit_core::Error) -> Self {
        CliError::Input(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
