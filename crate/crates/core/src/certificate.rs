// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dual variables and KKT certificates for the FLSA.
//!
//! For a candidate fit `m` the dual variables are the running residual sums
//!
//! ```text
//! z_1 = 0,   z_t = Σ_{j<t} (m_j − y_j),   z_{N+1} = 0.
//! ```
//!
//! `m` is optimal for `λ` iff `|z_t| ≤ λ` everywhere, `z_{N+1} = 0`, and at
//! each change point `t_k` the dual sits on the boundary with the sign of the
//! jump: `z_{t_k} = λ · sgn(m_{t_k} − m_{t_k − 1})`.
//!
//! Storage is 0-based: `z[i]` holds `z_{i+1}`, so a change point at 0-based
//! position `p` is checked against `z[p]`, the sum of the first `p` residuals.

use serde::{Deserialize, Serialize};

use crate::error::{FlsaError, Result};
use crate::signal::{Segmentation, Signal};
use crate::sum::CompensatedSum;

/// Running residual sums for a candidate fit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualVariables {
    /// `N + 1` entries; the last one is pinned to zero.
    pub z: Vec<f64>,
    /// `|Σ (m_t − y_t)|` before pinning the last entry.
    pub terminal_residual: f64,
}

/// Computes the dual trajectory of a fit `m` with compensated summation.
pub fn dual_variables(y: &Signal, m: &[f64]) -> Result<DualVariables> {
    if m.len() != y.len() {
        return Err(FlsaError::Input(format!(
            "fit has length {} but signal has length {}",
            m.len(),
            y.len()
        )));
    }
    Ok(accumulate(y.values(), m))
}

fn accumulate(y: &[f64], m: &[f64]) -> DualVariables {
    let mut z = Vec::with_capacity(m.len() + 1);
    z.push(0.0);
    let mut acc = CompensatedSum::new();
    for (&mt, &yt) in m.iter().zip(y) {
        acc.add(mt - yt);
        z.push(acc.value());
    }
    let terminal_residual = z.last().copied().unwrap_or(0.0).abs();
    if let Some(last) = z.last_mut() {
        *last = 0.0;
    }
    DualVariables {
        z,
        terminal_residual,
    }
}

/// Dual trajectory of a segmentation together with its `λ`-violations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualCertificate {
    pub z: Vec<f64>,
    pub lambda: f64,
    /// `max_t max(|z_t| − λ, 0)`.
    pub max_abs_violation: f64,
    /// `max_k max(λ − s_k z_{t_k}, 0)` over the change points.
    pub complementarity_violation: f64,
    pub terminal_residual: f64,
}

impl DualCertificate {
    pub fn new(y: &Signal, seg: &Segmentation) -> Result<Self> {
        let dual = dual_variables(y, &seg.expand())?;
        let lambda = seg.lambda();
        let max_abs_violation = dual
            .z
            .iter()
            .map(|z| (z.abs() - lambda).max(0.0))
            .fold(0.0, f64::max);
        let complementarity_violation = seg
            .sign_changes()
            .iter()
            .map(|c| (lambda - c.sign.value() * dual.z[c.position]).max(0.0))
            .fold(0.0, f64::max);
        Ok(Self {
            z: dual.z,
            lambda,
            max_abs_violation,
            complementarity_violation,
            terminal_residual: dual.terminal_residual,
        })
    }
}

/// Outcome of [`verify_kkt`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub feasible: bool,
    /// `max_t max(|z_t| − λ, 0)`.
    pub box_residual: f64,
    /// Change points whose dual value is off the boundary or has the wrong sign.
    pub active_set_mismatch: Vec<usize>,
    /// `|Σ (m_t − y_t)|`, i.e. the unpinned `|z_{N+1}|`.
    pub stationarity_residual: f64,
    pub tolerance: f64,
}

/// Checks the KKT conditions of `seg` for `λ`.
///
/// With `τ = tol · max(λ, 1)` the certificate is feasible iff
/// `max |z_t| ≤ λ + τ`, every change point satisfies `s_k z_{t_k} ≥ λ − τ`,
/// and `|z_{N+1}| ≤ tol · (Σ|y_t| + 1)`.
pub fn verify_kkt(y: &Signal, seg: &Segmentation, lambda: f64, tol: f64) -> KktReport {
    let tolerance = tol.abs();
    if seg.n() != y.len() {
        return KktReport {
            feasible: false,
            box_residual: f64::INFINITY,
            active_set_mismatch: Vec::new(),
            stationarity_residual: f64::INFINITY,
            tolerance,
        };
    }
    let dual = accumulate(y.values(), &seg.expand());
    let slack = tolerance * lambda.max(1.0);
    let box_residual = dual
        .z
        .iter()
        .map(|z| (z.abs() - lambda).max(0.0))
        .fold(0.0, f64::max);
    let active_set_mismatch: Vec<usize> = seg
        .sign_changes()
        .iter()
        .filter(|c| c.sign.value() * dual.z[c.position] < lambda - slack)
        .map(|c| c.position)
        .collect();
    let scale = y.abs_sum() + 1.0;
    let feasible = box_residual <= slack
        && active_set_mismatch.is_empty()
        && dual.terminal_residual <= tolerance * scale;
    KktReport {
        feasible,
        box_residual,
        active_set_mismatch,
        stationarity_residual: dual.terminal_residual,
        tolerance,
    }
}
