// SPDX-License-Identifier: MIT OR Apache-2.0

//! ℓ1 trend filtering:
//!
//! ```text
//! minimize  ½ Σ (y_t − m_t)² + λ Σ_t |w_t|,   w_t = m_{t+1} − 2 m_t + m_{t−1}.
//! ```
//!
//! The solver works on the dual box QP `min ½‖y − Dᵀz‖²`, `|z| ≤ λ`, where
//! `D` takes second differences and `DDᵀ` is pentadiagonal with stencil
//! `(1, −4, 6, −4, 1)`. A primal active-set method moves one bound at a time;
//! each subproblem is a banded Cholesky solve on the free coordinates.
//!
//! Indexing: `w` and `z` live on the interior samples `1..N−1` (0-based);
//! `dual[j]` belongs to sample `j + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{FlsaError, Result};
use crate::signal::Signal;

/// Active-set iterations allowed per dual coordinate.
const ITERATIONS_PER_COORDINATE: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrendFit {
    pub fitted: Vec<f64>,
    /// Interior samples where the fitted slope changes.
    pub kink_points: Vec<usize>,
    pub lambda: f64,
    /// `N − 2` dual values; `dual[j]` sits at sample `j + 1`.
    pub dual: Vec<f64>,
    pub kkt: TrendKktReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendKktReport {
    pub feasible: bool,
    /// `max_t max(|z_t| − λ, 0)` for the reconstructed dual.
    pub box_residual: f64,
    /// Kinks whose dual value is off the boundary or has the wrong sign.
    pub sign_mismatch: Vec<usize>,
    /// Largest `|w_t|` where the dual is strictly inside the box.
    pub affine_residual: f64,
    /// Largest violation of the two end conditions of the dual.
    pub end_residual: f64,
    pub tolerance: f64,
}

fn second_differences(m: &[f64]) -> Vec<f64> {
    m.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect()
}

fn kink_threshold(y: &[f64]) -> f64 {
    1e-9 * y.iter().fold(1.0f64, |a, v| a.max(v.abs()))
}

/// Dual reconstructed from the residuals `r = m − y` alone:
/// `z_t = −Σ_{i<t} Σ_{j≤i} r_j`. Returns `(z, |S1_N|, |S2_{N−1}|)`, the last
/// two being the end conditions that an optimal fit drives to zero.
fn reconstruct_dual(y: &[f64], m: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = y.len();
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut z = Vec::with_capacity(n.saturating_sub(2));
    for t in 0..n - 1 {
        s1 += m[t] - y[t];
        s2 += s1;
        if t + 2 < n {
            z.push(-s2);
        }
    }
    s1 += m[n - 1] - y[n - 1];
    (z, s1.abs(), s2.abs())
}

/// Checks the optimality conditions of a trend fit.
///
/// With `τ = tol · max(λ, 1)`: `|z_t| ≤ λ + τ`; at every kink
/// `sgn(w_t) z_t ≥ λ − τ`; `|w_t| ≤ tol · max(1, max|y|)` wherever
/// `|z_t| < λ − τ`; and both end conditions hold to `tol · (Σ|y| + 1)`.
pub fn trend_verify_kkt(y: &Signal, fit: &TrendFit, lambda: f64, tol: f64) -> TrendKktReport {
    verify(y.values(), &fit.fitted, lambda, tol)
}

fn verify(y: &[f64], m: &[f64], lambda: f64, tol: f64) -> TrendKktReport {
    let tolerance = tol.abs();
    if m.len() != y.len() || y.len() < 3 {
        return TrendKktReport {
            feasible: false,
            box_residual: f64::INFINITY,
            sign_mismatch: Vec::new(),
            affine_residual: f64::INFINITY,
            end_residual: f64::INFINITY,
            tolerance,
        };
    }
    let slack = tolerance * lambda.max(1.0);
    let (z, end1, end2) = reconstruct_dual(y, m);
    let w = second_differences(m);
    let threshold = kink_threshold(y);
    let box_residual = z.iter().map(|v| (v.abs() - lambda).max(0.0)).fold(0.0, f64::max);
    let sign_mismatch: Vec<usize> = w
        .iter()
        .zip(&z)
        .enumerate()
        .filter(|(_, (wt, zt))| wt.abs() > threshold && wt.signum() * **zt < lambda - slack)
        .map(|(j, _)| j + 1)
        .collect();
    let affine_residual = w
        .iter()
        .zip(&z)
        .filter(|(_, zt)| zt.abs() < lambda - slack)
        .map(|(wt, _)| wt.abs())
        .fold(0.0, f64::max);
    let end_residual = end1.max(end2);
    let scale = y.iter().map(|v| v.abs()).sum::<f64>() + 1.0;
    let affine_scale = y.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let feasible = box_residual <= slack
        && sign_mismatch.is_empty()
        && affine_residual <= tolerance * affine_scale
        && end_residual <= tolerance * scale;
    TrendKktReport {
        feasible,
        box_residual,
        sign_mismatch,
        affine_residual,
        end_residual,
        tolerance,
    }
}

/// Solves the ℓ1 trend filtering problem; the result passes
/// [`trend_verify_kkt`] at `tol` or an error is returned.
pub fn trend_solve(y: &Signal, lambda: f64, tol: f64) -> Result<TrendFit> {
    let n = y.len();
    if n < 3 {
        return Err(FlsaError::Input(format!("trend filtering needs N >= 3, got {n}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(FlsaError::Domain(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if !(tol > 0.0) {
        return Err(FlsaError::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let yv = y.values();
    let b = second_differences(yv);
    let (dual, iterations) = if lambda == 0.0 || b.iter().all(|v| *v == 0.0) {
        (vec![0.0; n - 2], 0)
    } else {
        active_set(&b, lambda)?
    };
    let fitted = if dual.iter().all(|v| *v == 0.0) {
        yv.to_vec()
    } else {
        primal_from_dual(yv, &dual)
    };
    let kkt = verify(yv, &fitted, lambda, tol);
    if !kkt.feasible {
        let residual = kkt
            .box_residual
            .max(kkt.affine_residual)
            .max(kkt.end_residual);
        return Err(FlsaError::NonConvergence {
            iterations,
            residual,
        });
    }
    let threshold = kink_threshold(yv);
    let kink_points = second_differences(&fitted)
        .iter()
        .enumerate()
        .filter(|(_, w)| w.abs() > threshold)
        .map(|(j, _)| j + 1)
        .collect();
    Ok(TrendFit {
        fitted,
        kink_points,
        lambda,
        dual,
        kkt,
    })
}

/// `m = y − Dᵀz`.
fn primal_from_dual(y: &[f64], z: &[f64]) -> Vec<f64> {
    let mut m = y.to_vec();
    for (j, &zj) in z.iter().enumerate() {
        m[j] -= zj;
        m[j + 1] += 2.0 * zj;
        m[j + 2] -= zj;
    }
    m
}

fn stencil(offset: usize) -> f64 {
    match offset {
        0 => 6.0,
        1 => -4.0,
        2 => 1.0,
        _ => 0.0,
    }
}

/// `(DDᵀ) v` via the pentadiagonal stencil.
fn apply_q(v: &[f64], out: &mut [f64]) {
    let len = v.len();
    for i in 0..len {
        let mut acc = 6.0 * v[i];
        if i >= 1 {
            acc -= 4.0 * v[i - 1];
        }
        if i >= 2 {
            acc += v[i - 2];
        }
        if i + 1 < len {
            acc -= 4.0 * v[i + 1];
        }
        if i + 2 < len {
            acc += v[i + 2];
        }
        out[i] = acc;
    }
}

// Box QP `min ½ zᵀQz − bᵀz`, `|z| ≤ λ`, by a primal active-set method
// started from `z = 0` with every coordinate free.
fn active_set(b: &[f64], lambda: f64) -> Result<(Vec<f64>, usize)> {
    let len = b.len();
    let mut z = vec![0.0; len];
    // 0 free, +1 at +λ, −1 at −λ
    let mut bound = vec![0i8; len];
    let mut fixed_part = vec![0.0; len];
    let mut gradient = vec![0.0; len];
    let mut workspace = BandedCholesky::default();
    let grad_tol = 1e-12 * b.iter().fold(1.0f64, |a, v| a.max(v.abs())).max(lambda);
    let cap = ITERATIONS_PER_COORDINATE * len + 100;

    for iteration in 0..cap {
        let free: Vec<usize> = (0..len).filter(|&i| bound[i] == 0).collect();
        if !free.is_empty() {
            let masked: Vec<f64> = (0..len)
                .map(|i| if bound[i] == 0 { 0.0 } else { z[i] })
                .collect();
            apply_q(&masked, &mut fixed_part);
            let rhs: Vec<f64> = free.iter().map(|&i| b[i] - fixed_part[i]).collect();
            let target = workspace.solve(&free, &rhs);

            let mut step = 1.0;
            let mut blocking = None;
            for (k, &i) in free.iter().enumerate() {
                let d = target[k] - z[i];
                let room = if d > 0.0 {
                    lambda - z[i]
                } else if d < 0.0 {
                    -lambda - z[i]
                } else {
                    continue;
                };
                let ratio = room / d;
                if ratio < step {
                    step = ratio.max(0.0);
                    blocking = Some((i, if d > 0.0 { 1i8 } else { -1i8 }));
                }
            }
            for (k, &i) in free.iter().enumerate() {
                z[i] += step * (target[k] - z[i]);
            }
            if let Some((i, side)) = blocking {
                bound[i] = side;
                z[i] = side as f64 * lambda;
                continue;
            }
        }

        apply_q(&z, &mut gradient);
        let mut worst: Option<(usize, f64)> = None;
        for i in 0..len {
            let g = gradient[i] - b[i];
            // at +λ the objective must not decrease when z_i decreases
            let violation = match bound[i] {
                1 => g,
                -1 => -g,
                _ => continue,
            };
            if violation > grad_tol && worst.is_none_or(|(_, v)| violation > v) {
                worst = Some((i, violation));
            }
        }
        match worst {
            Some((i, _)) => bound[i] = 0,
            None => return Ok((z, iteration + 1)),
        }
    }
    Err(FlsaError::NonConvergence {
        iterations: cap,
        residual: f64::NAN,
    })
}

/// Cholesky factor of `Q` restricted to a sorted index set. In the compressed
/// ordering the restriction keeps bandwidth two.
#[derive(Default)]
struct BandedCholesky {
    diag: Vec<f64>,
    sub1: Vec<f64>,
    sub2: Vec<f64>,
}

impl BandedCholesky {
    fn solve(&mut self, idx: &[usize], rhs: &[f64]) -> Vec<f64> {
        let k = idx.len();
        self.diag.clear();
        self.sub1.clear();
        self.sub2.clear();
        self.diag.resize(k, 0.0);
        self.sub1.resize(k, 0.0);
        self.sub2.resize(k, 0.0);
        let entry = |a: usize, b: usize| stencil(idx[a].abs_diff(idx[b]));
        for a in 0..k {
            let mut l2 = 0.0;
            if a >= 2 {
                l2 = entry(a, a - 2) / self.diag[a - 2];
            }
            let mut l1 = 0.0;
            if a >= 1 {
                l1 = (entry(a, a - 1) - l2 * self.sub1[a - 1]) / self.diag[a - 1];
            }
            self.sub1[a] = l1;
            self.sub2[a] = l2;
            self.diag[a] = (stencil(0) - l1 * l1 - l2 * l2).sqrt();
        }
        let mut x = vec![0.0; k];
        for a in 0..k {
            let mut acc = rhs[a];
            if a >= 1 {
                acc -= self.sub1[a] * x[a - 1];
            }
            if a >= 2 {
                acc -= self.sub2[a] * x[a - 2];
            }
            x[a] = acc / self.diag[a];
        }
        for a in (0..k).rev() {
            let mut acc = x[a];
            if a + 1 < k {
                acc -= self.sub1[a + 1] * x[a + 1];
            }
            if a + 2 < k {
                acc -= self.sub2[a + 2] * x[a + 2];
            }
            x[a] = acc / self.diag[a];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(v: &[f64]) -> Signal {
        Signal::from_slice(v).unwrap()
    }

    #[test]
    fn zero_lambda_is_identity() {
        let y = [0.3, -1.0, 2.0, 0.5];
        let fit = trend_solve(&sig(&y), 0.0, 1e-8).unwrap();
        assert_eq!(fit.fitted, y.to_vec());
    }

    #[test]
    fn affine_data_is_kept() {
        let y = [0.0, 1.0, 2.0, 3.0];
        for lambda in [0.1, 1.0, 10.0] {
            let fit = trend_solve(&sig(&y), lambda, 1e-8).unwrap();
            assert_eq!(fit.fitted, y.to_vec());
            assert!(fit.kink_points.is_empty());
        }
    }

    #[test]
    fn large_lambda_gives_least_squares_line() {
        let y = [0.0, 2.0, 1.0, 3.0, 2.0];
        let fit = trend_solve(&sig(&y), 1e3, 1e-8).unwrap();
        // ordinary least squares: slope 0.5, intercept 0.6
        for (t, m) in fit.fitted.iter().enumerate() {
            assert!((m - (0.6 + 0.5 * t as f64)).abs() < 1e-10);
        }
    }

    #[test]
    fn v_shape_has_one_kink() {
        let y = [4.0, 3.0, 2.0, 1.0, 0.0, 1.0, 2.0, 3.0, 4.0];
        let fit = trend_solve(&sig(&y), 0.1, 1e-8).unwrap();
        assert_eq!(fit.kink_points, vec![4]);
    }

    #[test]
    fn banded_solve_matches_dense() {
        let idx = [0usize, 1, 3, 4, 6];
        let rhs = [1.0, -2.0, 0.5, 3.0, 1.0];
        let x = BandedCholesky::default().solve(&idx, &rhs);
        for a in 0..idx.len() {
            let row: f64 = (0..idx.len()).map(|c| stencil(idx[a].abs_diff(idx[c])) * x[c]).sum();
            assert!((row - rhs[a]).abs() < 1e-12);
        }
    }

    #[test]
    fn raw_data_is_not_optimal_for_large_lambda() {
        let y = [0.0, 3.0, -1.0, 2.0, 0.0];
        let fit = TrendFit {
            fitted: y.to_vec(),
            kink_points: vec![],
            lambda: 10.0,
            dual: vec![0.0; 3],
            kkt: verify(&y, &y, 0.0, 1e-8),
        };
        assert!(!trend_verify_kkt(&sig(&y), &fit, 10.0, 1e-6).feasible);
        assert!(trend_verify_kkt(&sig(&y), &fit, 0.0, 1e-6).feasible);
    }

    #[test]
    fn rejects_short_input() {
        assert!(trend_solve(&sig(&[1.0, 2.0]), 1.0, 1e-8).is_err());
    }
}
