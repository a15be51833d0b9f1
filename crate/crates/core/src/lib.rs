// SPDX-License-Identifier: MIT OR Apache-2.0

//! Exact one-dimensional fused lasso signal approximator (total-variation
//! denoising) for change-point detection.
//!
//! The crate is organised around the dual view of the problem
//!
//! ```text
//! minimize  ½ Σ (y_t − m_t)² + λ Σ |m_t − m_{t−1}|
//! ```
//!
//! whose dual variables `z_t = Σ_{j<t} (m_j − y_j)` form a bridge pinned at
//! zero on both ends and confined to `[−λ, λ]`:
//!
//! - [`signal`] and [`metrics`]: domain types and segmentation comparison.
//! - [`solver`]: exact solver, `λ_max`, closed-form segment levels, polishing.
//! - [`certificate`]: dual variables and KKT verification.
//! - [`oracle`]: independent dual coordinate-ascent solver used for cross-checks.
//! - [`path`]: the exact piecewise-linear solution path in `λ`.
//! - [`lasso`]: the lasso reformulation and irrepresentable-condition tools.
//! - [`variance`] and [`trend`]: variance filtering and ℓ1 trend filtering.
//! - [`experiments`]: seeded Monte-Carlo harness.
//!
//! Change points are 0-based and denote the first index of a new segment.

#![forbid(unsafe_code)]

pub mod certificate;
pub mod error;
pub mod experiments;
pub mod lasso;
pub mod metrics;
pub mod oracle;
pub mod path;
pub mod signal;
pub mod solver;
pub mod sum;
pub mod trend;
pub mod variance;

pub use certificate::{dual_variables, verify_kkt, DualCertificate, DualVariables, KktReport};
pub use error::{FlsaError, Result};
pub use lasso::{irrep_profile, normal_matrix, strong_irrep_holds, to_lasso, IrrepProfile, LassoEquivalent};
pub use metrics::{eps_sign_consistent, set_distance};
pub use oracle::{oracle_solve, OracleSolution};
pub use path::{trace_path, validate_nesting, LambdaPath, NestingReport, PathEvent};
pub use signal::{Segmentation, Sign, SignChange, Signal, StepModel};
pub use solver::{lambda_max, polish, segment_means, solve};
pub use trend::{trend_solve, trend_verify_kkt, TrendFit, TrendKktReport};
pub use variance::{variance_solve, VarianceSegmentation};

/// Default tolerance of the FLSA KKT certificate.
pub const DEFAULT_KKT_TOL: f64 = 1e-8;
