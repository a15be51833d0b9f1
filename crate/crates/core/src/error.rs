// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, FlsaError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlsaError {
    /// Malformed or inconsistent input data.
    #[error("invalid input: {0}")]
    Input(String),

    /// A parameter lies outside its mathematical domain (e.g. `λ < 0`).
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver hit its iteration cap.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// The variance reduction produced a non-positive variance level.
    #[error(
        "degenerate variance: segment {segment} starting at index {start} has level {level} \
         (lambda too large for the data scale)"
    )]
    DegenerateVariance {
        segment: usize,
        start: usize,
        level: f64,
    },

    /// A solution failed its optimality certificate.
    #[error("certificate failure: {0}")]
    Certificate(String),

    /// An experiment or command configuration is invalid.
    #[error("config error: {0}")]
    Config(String),
}
