// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io;
use std::path::PathBuf;

use flsa_core::FlsaError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write output: {0}")]
    Write(#[from] io::Error),
    #[error("certificate failure: {0}")]
    Certificate(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl CliError {
    /// 1 input, 2 certificate or convergence, 3 configuration.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Read { .. } | CliError::Write(_) => 1,
            CliError::Certificate(_) => 2,
            CliError::Config(_) => 3,
        }
    }
}

impl From<FlsaError> for CliError {
    fn from(e: FlsaError) -> Self {
        match e {
            FlsaError::Input(_) | FlsaError::Domain(_) | FlsaError::DegenerateVariance { .. } => {
                CliError::Input(e.to_string())
            }
            FlsaError::NonConvergence { .. } | FlsaError::Certificate(_) => {
                CliError::Certificate(e.to_string())
            }
            FlsaError::Config(_) => CliError::Config(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
