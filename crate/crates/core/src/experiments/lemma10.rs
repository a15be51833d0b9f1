// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte-Carlo witness that exact support and sign recovery fails with
//! positive probability once the irrepresentable profile reaches `±1` off
//! the true change points.

use rayon::prelude::*;
use serde::Serialize;

use super::rng::{generate_with, replicate_rng, stream_id};
use super::runner::lambda_grid;
use crate::certificate::verify_kkt;
use crate::error::{FlsaError, Result};
use crate::lasso::irrep_profile;
use crate::signal::{Sign, StepModel};
use crate::solver::{lambda_max, solve};

/// Failure probability guaranteed for symmetric continuous noise.
pub const SYMMETRIC_DELTA: f64 = 0.5;
/// Allowance for the finite `λ` grid.
pub const GRID_SLACK: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma10Report {
    pub n: usize,
    pub knots: Vec<usize>,
    pub reps: usize,
    pub grid_points: usize,
    /// Fraction of replicates in which no grid `λ` recovers the change points
    /// and their signs exactly.
    pub failure_fraction: f64,
    /// `SYMMETRIC_DELTA − GRID_SLACK`.
    pub threshold: f64,
    pub holds: bool,
}

/// Truth with unit jumps of sign `s_i` at the knots, starting from level 1.
pub fn knot_truth(n: usize, knots: &[usize], signs: &[Sign], noise_sd: f64) -> Result<StepModel> {
    let mut levels = vec![1.0];
    for s in signs {
        let last = *levels.last().expect("nonempty");
        levels.push(last + s.value());
    }
    StepModel::new(n, knots.to_vec(), levels, noise_sd)
}

/// Fraction of replicates in which no `λ` of a `grid_points` geometric grid
/// in `(10⁻³ λ_max, λ_max)` yields exactly the true change points with the
/// true signs.
pub fn exact_recovery_failure_fraction(
    truth: &StepModel,
    reps: usize,
    grid_points: usize,
    seed: u64,
) -> Result<f64> {
    if reps == 0 || grid_points == 0 {
        return Err(FlsaError::Config("need reps >= 1 and grid_points >= 1".into()));
    }
    let target = truth.sign_changes();
    let failures = (0..reps)
        .into_par_iter()
        .map(|rep| -> Result<bool> {
            let y = generate_with(truth, &mut replicate_rng(seed, stream_id(0, rep)));
            for lambda in lambda_grid(lambda_max(&y), grid_points, 1e-3) {
                let seg = solve(&y, lambda)?;
                let report = verify_kkt(&y, &seg, lambda, crate::DEFAULT_KKT_TOL);
                if !report.feasible {
                    return Err(FlsaError::Certificate(format!(
                        "replicate {rep}, lambda = {lambda}: {report:?}"
                    )));
                }
                if seg.sign_changes() == target {
                    return Ok(false);
                }
            }
            Ok(true)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(failures.iter().filter(|f| **f).count() as f64 / reps as f64)
}

/// Runs the witness for knots `K` with signs `s`. Requires a non-knot index
/// where the irrepresentable profile reaches absolute value 1, and
/// `noise_sd > 0`.
pub fn lemma10_witness(
    n: usize,
    knots: &[usize],
    signs: &[Sign],
    noise_sd: f64,
    reps: usize,
    grid_points: usize,
    seed: u64,
) -> Result<Lemma10Report> {
    let profile = irrep_profile(n, knots, signs)?;
    if !(profile.max_abs >= 1.0 - 1e-12) {
        return Err(FlsaError::Input(format!(
            "the irrepresentable profile stays below 1 off the knots (max {}); \
             the witness does not apply",
            profile.max_abs
        )));
    }
    if !(noise_sd > 0.0 && noise_sd.is_finite()) {
        return Err(FlsaError::Input(format!("noise_sd must be positive, got {noise_sd}")));
    }
    let truth = knot_truth(n, knots, signs, noise_sd)?;
    let failure_fraction = exact_recovery_failure_fraction(&truth, reps, grid_points, seed)?;
    let threshold = SYMMETRIC_DELTA - GRID_SLACK;
    Ok(Lemma10Report {
        n,
        knots: knots.to_vec(),
        reps,
        grid_points,
        failure_fraction,
        threshold,
        holds: failure_fraction >= threshold,
    })
}
