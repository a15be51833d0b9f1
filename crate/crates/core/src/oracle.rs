// SPDX-License-Identifier: MIT OR Apache-2.0

//! Independent reference solver working on the dual box QP
//!
//! ```text
//! minimize  ½ Σ_t (y_t + z_{t+1} − z_t)²   s.t. |z_t| ≤ λ,  z_1 = z_{N+1} = 0,
//! ```
//!
//! with primal recovery `m_t = y_t + z_{t+1} − z_t`. Cyclic coordinate descent
//! drives the iteration; every few sweeps an exact solve on the currently free
//! coordinates is tried and kept only if it lowers the objective, which makes
//! the method finish in a handful of passes once the active set has settled.
//!
//! This module shares no code with [`crate::solver`]; it exists to cross-check it.

use serde::Serialize;

use crate::error::{FlsaError, Result};
use crate::signal::{Segmentation, Signal};

const SWEEPS_PER_SUBSPACE_STEP: usize = 8;
const MAX_SWEEPS: usize = 2_000_000;

/// Raw output of the dual solver.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleSolution {
    pub fitted: Vec<f64>,
    /// `N + 1` dual values, `z[0] = z[N] = 0`.
    pub z: Vec<f64>,
    pub duality_gap: f64,
    pub sweeps: usize,
}

/// Solves the FLSA through its dual and returns the compressed segmentation.
///
/// Runs of the recovered fit that agree to within `1e-9 · (1 + max|y|)` are
/// treated as one segment.
pub fn oracle_solve(y: &Signal, lambda: f64, tol: f64) -> Result<Segmentation> {
    let sol = oracle_dual(y, lambda, tol)?;
    let scale = 1.0 + y.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Segmentation::from_sequence_with_tolerance(&sol.fitted, lambda, 1e-9 * scale)
}

/// Runs the dual solver until the duality gap is at most `tol`, or until a
/// full sweep moves no coordinate by more than rounding level.
pub fn oracle_dual(y: &Signal, lambda: f64, tol: f64) -> Result<OracleSolution> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(FlsaError::Domain(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if !(tol > 0.0) {
        return Err(FlsaError::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let y = y.values();
    let n = y.len();
    let mut z = vec![0.0; n + 1];
    if lambda == 0.0 || n == 1 {
        return Ok(OracleSolution {
            fitted: y.to_vec(),
            z,
            duality_gap: 0.0,
            sweeps: 0,
        });
    }

    // below this, sweeps only shuffle rounding errors
    let stall = 1e-14 * (lambda + y.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    let mut sweeps = 0;
    let mut gap = f64::INFINITY;
    while sweeps < MAX_SWEEPS {
        for _ in 0..SWEEPS_PER_SUBSPACE_STEP {
            coordinate_sweep(y, lambda, &mut z);
        }
        sweeps += SWEEPS_PER_SUBSPACE_STEP;
        subspace_step(y, lambda, &mut z);
        gap = duality_gap(y, lambda, &z);
        let settled = gap <= tol || coordinate_sweep(y, lambda, &mut z) <= stall;
        if settled {
            gap = duality_gap(y, lambda, &z);
            return Ok(OracleSolution {
                fitted: recover(y, &z),
                z,
                duality_gap: gap,
                sweeps,
            });
        }
    }
    Err(FlsaError::NonConvergence {
        iterations: sweeps,
        residual: gap,
    })
}

/// One cyclic pass; returns the largest coordinate move.
fn coordinate_sweep(y: &[f64], lambda: f64, z: &mut [f64]) -> f64 {
    let n = y.len();
    let mut moved = 0.0f64;
    for i in 1..n {
        let target = 0.5 * (z[i - 1] + z[i + 1] + y[i] - y[i - 1]);
        let next = target.clamp(-lambda, lambda);
        moved = moved.max((next - z[i]).abs());
        z[i] = next;
    }
    moved
}

fn objective(y: &[f64], z: &[f64]) -> f64 {
    y.iter()
        .enumerate()
        .map(|(t, &yt)| {
            let m = yt + z[t + 1] - z[t];
            0.5 * m * m
        })
        .sum()
}

fn recover(y: &[f64], z: &[f64]) -> Vec<f64> {
    y.iter().enumerate().map(|(t, &yt)| yt + z[t + 1] - z[t]).collect()
}

/// `Σ_t (λ |Δm_t| − z_t Δm_t)`: nonnegative term by term for feasible `z`.
fn duality_gap(y: &[f64], lambda: f64, z: &[f64]) -> f64 {
    let m = recover(y, z);
    (1..y.len())
        .map(|t| {
            let dm = m[t] - m[t - 1];
            lambda * dm.abs() - z[t] * dm
        })
        .sum()
}

// Minimizes over every maximal run of free coordinates with the bound ones
// held fixed, then backtracks along the projected path.
fn subspace_step(y: &[f64], lambda: f64, z: &mut [f64]) {
    let n = y.len();
    // a coordinate stays fixed only while its own minimizer lies outside the box
    let pinned: Vec<bool> = (0..=n)
        .map(|i| {
            if i == 0 || i == n {
                return true;
            }
            let own = 0.5 * (z[i - 1] + z[i + 1] + y[i] - y[i - 1]);
            (z[i] >= lambda && own >= lambda) || (z[i] <= -lambda && own <= -lambda)
        })
        .collect();
    let mut target = z.to_vec();
    let mut i = 1;
    while i < n {
        if pinned[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && !pinned[i] {
            i += 1;
        }
        solve_free_run(y, z, start, i, &mut target);
    }

    let before = objective(y, z);
    let mut step = 1.0;
    let mut trial = vec![0.0; z.len()];
    for _ in 0..30 {
        for (k, t) in trial.iter_mut().enumerate() {
            *t = (z[k] + step * (target[k] - z[k])).clamp(-lambda, lambda);
        }
        if objective(y, &trial) < before {
            z.copy_from_slice(&trial);
            return;
        }
        step *= 0.5;
    }
}

// Tridiagonal system 2 z_i − z_{i−1} − z_{i+1} = y_i − y_{i−1} for i in
// [start, end), with z_{start−1} and z_end fixed. Thomas algorithm.
fn solve_free_run(y: &[f64], z: &[f64], start: usize, end: usize, out: &mut [f64]) {
    let len = end - start;
    let mut c_prime = vec![0.0; len];
    let mut d_prime = vec![0.0; len];
    for k in 0..len {
        let i = start + k;
        let mut rhs = y[i] - y[i - 1];
        if k == 0 {
            rhs += z[start - 1];
        }
        if k == len - 1 {
            rhs += z[end];
        }
        let (denom, prev_d) = if k == 0 {
            (2.0, 0.0)
        } else {
            (2.0 + c_prime[k - 1], d_prime[k - 1])
        };
        c_prime[k] = -1.0 / denom;
        d_prime[k] = (rhs + prev_d) / denom;
    }
    out[end - 1] = d_prime[len - 1];
    for k in (0..len - 1).rev() {
        out[start + k] = d_prime[k] - c_prime[k] * out[start + k + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(v: &[f64]) -> Signal {
        Signal::from_slice(v).unwrap()
    }

    #[test]
    fn two_step_example() {
        let seg = oracle_solve(&sig(&[0.0, 0.0, 1.0, 1.0]), 0.25, 1e-14).unwrap();
        let m = seg.expand();
        for (a, b) in m.iter().zip([0.125, 0.125, 0.875, 0.875]) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(seg.change_points(), &[2]);
    }

    #[test]
    fn zero_lambda_is_identity() {
        let y = [1.0, -3.0, 2.0];
        assert_eq!(oracle_solve(&sig(&y), 0.0, 1e-12).unwrap().expand(), y.to_vec());
    }

    #[test]
    fn large_lambda_gives_mean() {
        let sol = oracle_dual(&sig(&[1.0, 2.0]), 0.6, 1e-14).unwrap();
        assert!((sol.fitted[0] - 1.5).abs() < 1e-12);
        assert!((sol.fitted[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn gap_is_zero_at_the_known_optimum() {
        let y = [0.0, 0.0, 1.0, 1.0];
        let z = [0.0, 0.125, 0.25, 0.125, 0.0];
        assert_eq!(duality_gap(&y, 0.25, &z), 0.0);
        assert!(duality_gap(&y, 0.25, &[0.0; 5]) > 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(oracle_solve(&sig(&[1.0]), -1.0, 1e-9).is_err());
        assert!(oracle_solve(&sig(&[1.0]), 1.0, 0.0).is_err());
    }
}
