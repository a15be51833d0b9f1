// SPDX-License-Identifier: MIT OR Apache-2.0

//! Fluctuation-theory checks on Gaussian random walks and bridges.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::rng::{replicate_rng, standard_normal};
use crate::error::{FlsaError, Result};

/// Replicates per random stream; fixed so results do not depend on the
/// number of threads.
const BLOCK: usize = 4096;

/// Significance level of the uniformity test.
pub const CHI_SQUARE_ALPHA: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FluctuationReport {
    pub n: usize,
    pub reps: usize,
    /// `counts[r]`: replicates with exactly `r` positive bridge values.
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    pub critical_value: f64,
    pub p_value: f64,
    pub passes: bool,
}

/// For `n` i.i.d. standard normals, counts how many of the bridge values
/// `u_k = s_k − (k/n) s_n`, `k = 1, …, n`, are positive, and tests the
/// counts for uniformity on `{0, …, n−1}` at level 0.01.
pub fn fluctuation_uniformity(n: usize, reps: usize, seed: u64) -> Result<FluctuationReport> {
    if n < 2 {
        return Err(FlsaError::Config(format!("need n >= 2, got {n}")));
    }
    if reps < 10_000 {
        return Err(FlsaError::Config(format!("need at least 10000 replicates, got {reps}")));
    }
    let blocks = reps.div_ceil(BLOCK);
    let counts = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = replicate_rng(seed, b as u64);
            let mut local = vec![0u64; n];
            let mut walk = vec![0.0; n];
            let todo = BLOCK.min(reps - b * BLOCK);
            for _ in 0..todo {
                let mut s = 0.0;
                for w in walk.iter_mut() {
                    s += standard_normal(&mut rng);
                    *w = s;
                }
                let total = s;
                let positive = walk
                    .iter()
                    .enumerate()
                    .filter(|(k, w)| **w - (*k + 1) as f64 / n as f64 * total > 0.0)
                    .count();
                // u_n is exactly zero in theory; guard against rounding
                local[positive.min(n - 1)] += 1;
            }
            local
        })
        .reduce(
            || vec![0u64; n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let expected = reps as f64 / n as f64;
    let chi_square = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum::<f64>();
    let dof = n - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| FlsaError::Config(e.to_string()))?;
    let critical_value = dist.inverse_cdf(1.0 - CHI_SQUARE_ALPHA);
    let p_value = 1.0 - dist.cdf(chi_square);
    Ok(FluctuationReport {
        n,
        reps,
        frequencies: counts.iter().map(|&c| c as f64 / reps as f64).collect(),
        counts,
        chi_square,
        degrees_of_freedom: dof,
        critical_value,
        p_value,
        passes: chi_square <= critical_value,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossingReport {
    pub n: usize,
    pub eps: f64,
    /// Flank length `⌊ε N⌋`.
    pub flank: usize,
    pub reps: usize,
    pub hits: u64,
    pub estimate: f64,
    pub standard_error: f64,
    /// `1 / (2 π² ε N)`.
    pub bound: f64,
    /// `estimate ≥ bound − 3 · standard_error`.
    pub passes: bool,
}

/// Lower bound `1 / ((1 + δ) π² ε N)` on the flank-positivity probability.
pub fn crossing_bound(n: usize, eps: f64, delta: f64) -> f64 {
    1.0 / ((1.0 + delta) * PI * PI * eps * n as f64)
}

/// Estimates `Q = P{ s_t ≥ (t/N) s_N for all t ≤ εN and all t ≥ N − εN }`
/// for a Gaussian random walk and compares it with the bound for `δ = 1`.
///
/// Only the flanks are simulated step by step; the middle of the walk enters
/// through its sum, one `N(0, N − 2⌊εN⌋)` draw, which leaves the joint law
/// of the flank values unchanged.
pub fn crossing_probability_check(n: usize, eps: f64, reps: usize, seed: u64) -> Result<CrossingReport> {
    if !(eps > 0.0 && eps <= 0.5) || eps * (n as f64) < 2.0 {
        return Err(FlsaError::Config(format!(
            "need eps in (0, 1/2] and eps * N >= 2, got eps = {eps}, N = {n}"
        )));
    }
    let bound = crossing_bound(n, eps, 1.0);
    if bound * (reps as f64) < 50.0 {
        return Err(FlsaError::Config(format!(
            "{reps} replicates cannot resolve a probability of {bound:.3e}; need bound * reps >= 50"
        )));
    }
    let flank = ((eps * n as f64).floor() as usize).min(n / 2);
    let middle = n - 2 * flank;
    let blocks = reps.div_ceil(BLOCK);
    let hits: u64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = replicate_rng(seed, b as u64);
            let mut left = vec![0.0; flank];
            let mut right = vec![0.0; flank];
            let todo = BLOCK.min(reps - b * BLOCK);
            let mut count = 0u64;
            for _ in 0..todo {
                let mut s = 0.0;
                for v in left.iter_mut() {
                    s += standard_normal(&mut rng);
                    *v = s;
                }
                if middle > 0 {
                    s += (middle as f64).sqrt() * standard_normal(&mut rng);
                }
                for v in right.iter_mut() {
                    s += standard_normal(&mut rng);
                    *v = s;
                }
                let total = s;
                let nf = n as f64;
                let left_ok = left
                    .iter()
                    .enumerate()
                    .all(|(i, v)| *v >= (i + 1) as f64 / nf * total);
                let right_ok = right
                    .iter()
                    .enumerate()
                    .all(|(i, v)| *v >= (n - flank + i + 1) as f64 / nf * total);
                if left_ok && right_ok {
                    count += 1;
                }
            }
            count
        })
        .sum();
    let estimate = hits as f64 / reps as f64;
    let standard_error = (estimate * (1.0 - estimate) / reps as f64).sqrt();
    Ok(CrossingReport {
        n,
        eps,
        flank,
        reps,
        hits,
        estimate,
        standard_error,
        bound,
        passes: estimate >= bound - 3.0 * standard_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_inputs() {
        assert!(fluctuation_uniformity(1, 20_000, 0).is_err());
        assert!(fluctuation_uniformity(3, 100, 0).is_err());
        assert!(crossing_probability_check(100, 0.01, 1_000_000, 0).is_err());
        assert!(crossing_probability_check(500, 0.02, 1000, 0).is_err());
    }

    #[test]
    fn bound_decreases_in_eps() {
        let b: Vec<f64> = [0.01, 0.02, 0.05].iter().map(|e| crossing_bound(500, *e, 1.0)).collect();
        assert!(b.windows(2).all(|w| w[0] > w[1]));
        assert!((crossing_bound(500, 0.02, 1.0) - 0.005066).abs() < 1e-6);
    }
}
