// SPDX-License-Identifier: MIT OR Apache-2.0

//! The FLSA as a standard lasso, and the irrepresentable condition of that
//! lasso.
//!
//! With `x_t = m_{t+1} − m_t` (`t = 1, …, N−1`) and centred data
//! `ỹ = y − mean(y)`, the FLSA becomes `min ½‖ỹ − A x‖² + λ‖x‖₁` where
//!
//! ```text
//! A_{i,j} = (j − N)/N   for i ≤ j,
//! A_{i,j} =  j/N        for i > j.
//! ```
//!
//! The transformed noise `(I − 11ᵀ/N) ε` has zero mean but correlated
//! components even when `ε` is i.i.d.; nothing here relies on independence,
//! but reuse of the transform for inference should account for it.
//!
//! Lasso coordinates are 1-based and coincide with 0-based change-point
//! positions: coordinate `k` is the jump between samples `k − 1` and `k`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{FlsaError, Result};
use crate::signal::{Sign, Signal};

/// Lasso form of an FLSA instance.
#[derive(Clone, Debug, PartialEq)]
pub struct LassoEquivalent {
    /// Centred data, sums to zero.
    pub y_tilde: Vec<f64>,
    /// `N × (N−1)` design with zero column sums.
    pub design: DMatrix<f64>,
    /// Mean of the original data, needed to map back.
    pub mean: f64,
}

/// Builds the lasso equivalent of the FLSA for `y`.
pub fn to_lasso(y: &Signal) -> Result<LassoEquivalent> {
    let n = y.len();
    if n < 2 {
        return Err(FlsaError::Input("the lasso form needs at least two samples".into()));
    }
    let mean = y.mean();
    let y_tilde = y.values().iter().map(|v| v - mean).collect();
    Ok(LassoEquivalent {
        y_tilde,
        design: lasso_design(n),
        mean,
    })
}

/// The `N × (N−1)` design matrix of the lasso form.
pub fn lasso_design(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    DMatrix::from_fn(n, n.saturating_sub(1), |i, j| {
        let (row, col) = (i + 1, j + 1);
        if row <= col {
            (col as f64 - nf) / nf
        } else {
            col as f64 / nf
        }
    })
}

impl LassoEquivalent {
    pub fn n(&self) -> usize {
        self.y_tilde.len()
    }

    /// Maps lasso coefficients back to a fit:
    /// `m_1 = mean − (1/N) Σ_{t<N} Σ_{k≤t} x_k`, `m_t = m_1 + Σ_{k<t} x_k`.
    pub fn back_map(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if x.len() + 1 != n {
            return Err(FlsaError::Input(format!(
                "expected {} lasso coefficients, got {}",
                n - 1,
                x.len()
            )));
        }
        let mut offsets = Vec::with_capacity(n);
        offsets.push(0.0);
        let mut running = 0.0;
        for &xk in x {
            running += xk;
            offsets.push(running);
        }
        let shift = offsets.iter().sum::<f64>() / n as f64;
        let m1 = self.mean - shift;
        Ok(offsets.iter().map(|o| m1 + o).collect())
    }

    /// Lasso coefficients of a fit: its first differences.
    pub fn coefficients(m: &[f64]) -> Vec<f64> {
        m.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Normal matrix `C = AᵀA` of the lasso form, `(N−1) × (N−1)`, in closed
/// form: `C_{ik} = C_{ki} = i (N − k) / N` for `i ≤ k`.
pub fn normal_matrix(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    let dim = n.saturating_sub(1);
    DMatrix::from_fn(dim, dim, |r, c| {
        let (i, k) = ((r.min(c) + 1) as f64, (r.max(c) + 1) as f64);
        i * (nf - k) / nf
    })
}

/// `C_{K^C,K} C_{K,K}^{-1} s` evaluated at every non-knot coordinate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IrrepProfile {
    pub n: usize,
    pub knots: Vec<usize>,
    pub signs: Vec<Sign>,
    /// Coordinates in `1..N` that are not knots.
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub max_abs: f64,
}

impl IrrepProfile {
    /// The linear spline through `(0, 0)`, `(K_i, s_i)` and `(N, 0)` at any
    /// `t ∈ [0, N]`; equals the profile off the knots and `s_i` on them.
    pub fn value_at(&self, t: usize) -> f64 {
        spline_value(self.n, &self.knots, &self.signs, t)
    }
}

fn validate_knots(n: usize, knots: &[usize], signs: &[Sign]) -> Result<()> {
    if n < 2 {
        return Err(FlsaError::Input("need N >= 2".into()));
    }
    if knots.is_empty() {
        return Err(FlsaError::Input("the knot set K must be nonempty".into()));
    }
    if knots.len() != signs.len() {
        return Err(FlsaError::Input(format!(
            "{} knots but {} signs",
            knots.len(),
            signs.len()
        )));
    }
    let mut prev = 0;
    for &k in knots {
        if k <= prev || k >= n {
            return Err(FlsaError::Input(format!(
                "knots must be strictly increasing within 1..{n}, found {k} after {prev}"
            )));
        }
        prev = k;
    }
    Ok(())
}

fn spline_value(n: usize, knots: &[usize], signs: &[Sign], t: usize) -> f64 {
    let idx = knots.partition_point(|&k| k < t);
    if knots.get(idx) == Some(&t) {
        return signs[idx].value();
    }
    let (left, left_value) = match idx.checked_sub(1) {
        Some(j) => (knots[j], signs[j].value()),
        None => (0, 0.0),
    };
    let (right, right_value) = match knots.get(idx) {
        Some(&k) => (k, signs[idx].value()),
        None => (n, 0.0),
    };
    let w = (t - left) as f64 / (right - left) as f64;
    (1.0 - w) * left_value + w * right_value
}

/// Closed-form irrepresentable profile: a linear spline with knots at `K`
/// and knot values `s`, anchored at zero on `0` and `N`. No matrix is formed.
pub fn irrep_profile(n: usize, knots: &[usize], signs: &[Sign]) -> Result<IrrepProfile> {
    validate_knots(n, knots, signs)?;
    let indices: Vec<usize> = (1..n).filter(|t| knots.binary_search(t).is_err()).collect();
    let values: Vec<f64> = indices.iter().map(|&t| spline_value(n, knots, signs, t)).collect();
    let max_abs = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(IrrepProfile {
        n,
        knots: knots.to_vec(),
        signs: signs.to_vec(),
        indices,
        values,
        max_abs,
    })
}

/// Dense cross-check of [`irrep_profile`]: solves `C_{K,K} v = s` by
/// Cholesky and returns `C_{K^C,K} v`, ordered like `IrrepProfile::indices`.
pub fn irrep_profile_dense(n: usize, knots: &[usize], signs: &[Sign]) -> Result<Vec<f64>> {
    validate_knots(n, knots, signs)?;
    let c = normal_matrix(n);
    let rows: Vec<usize> = (1..n).filter(|t| knots.binary_search(t).is_err()).collect();
    let c_kk = DMatrix::from_fn(knots.len(), knots.len(), |a, b| c[(knots[a] - 1, knots[b] - 1)]);
    let s = DVector::from_iterator(signs.len(), signs.iter().map(|s| s.value()));
    let v = c_kk
        .cholesky()
        .ok_or_else(|| FlsaError::Input("C_KK is not positive definite".into()))?
        .solve(&s);
    Ok(rows
        .iter()
        .map(|&t| knots.iter().zip(v.iter()).map(|(&k, vk)| c[(t - 1, k - 1)] * vk).sum())
        .collect())
}

/// Strong irrepresentable condition: `max |profile| < δ`.
pub fn strong_irrep_holds(profile: &IrrepProfile, delta: f64) -> bool {
    profile.max_abs < delta
}
