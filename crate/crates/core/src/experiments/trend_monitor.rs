// SPDX-License-Identifier: MIT OR Apache-2.0

//! Spurious-kink monitoring for ℓ1 trend filtering on piecewise-linear
//! truths. Trend filtering has no consistency theory to test against, so the
//! monitor only measures; it asserts nothing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::{replicate_rng, standard_normal, stream_id};
use crate::error::{FlsaError, Result};
use crate::metrics::spurious_change_points;
use crate::signal::Signal;
use crate::trend::trend_solve;

/// Continuous piecewise-linear truth `f(u)`, `u = t / N`, with `f(0) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinkShape {
    /// Kinks as fractions of `N`, strictly increasing in `(0, 1)`.
    pub kinks: Vec<f64>,
    /// Slope of `f` on each piece, one more than `kinks`.
    pub slopes: Vec<f64>,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
}

fn default_noise_sd() -> f64 {
    1.0
}

impl KinkShape {
    /// Consecutive slopes increase: the trend analogue of a staircase.
    pub fn is_convex(&self) -> bool {
        self.slopes.windows(2).all(|w| w[1] > w[0])
    }

    /// Kink samples `round(f · n)`.
    pub fn kink_points(&self, n: usize) -> Vec<usize> {
        self.kinks.iter().map(|f| (f * n as f64).round() as usize).collect()
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.slopes.len() != self.kinks.len() + 1 {
            return Err(FlsaError::Config(format!(
                "{} kinks need {} slopes, got {}",
                self.kinks.len(),
                self.kinks.len() + 1,
                self.slopes.len()
            )));
        }
        if self.slopes.windows(2).any(|w| w[0] == w[1]) {
            return Err(FlsaError::Config("adjacent slopes must differ".into()));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(FlsaError::Config("noise_sd must be finite and >= 0".into()));
        }
        let points = self.kink_points(n);
        let inside = points.iter().all(|&k| k >= 1 && k + 1 < n);
        if !inside || points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FlsaError::Config(format!(
                "kinks {:?} do not give distinct interior samples at N = {n}",
                self.kinks
            )));
        }
        Ok(())
    }

    /// Noiseless sequence `f(t / N)`, `t = 0, …, N − 1`.
    pub fn mean_sequence(&self, n: usize) -> Result<Vec<f64>> {
        self.validate(n)?;
        let nf = n as f64;
        let points = self.kink_points(n);
        Ok((0..n)
            .map(|t| {
                let mut value = 0.0;
                let mut from = 0usize;
                for (piece, slope) in self.slopes.iter().enumerate() {
                    let to = points.get(piece).copied().unwrap_or(usize::MAX);
                    value += slope * (t.min(to).saturating_sub(from)) as f64 / nf;
                    if t <= to {
                        break;
                    }
                    from = to;
                }
                value
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrendReplicate {
    pub replicate: usize,
    pub kinks: Vec<usize>,
    /// Estimated kinks at least `εN` away from every true kink.
    pub spurious: usize,
    /// Some true kink has no estimated kink within `εN`.
    pub missed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrendMonitorReport {
    pub n: usize,
    pub lambda: f64,
    pub eps: f64,
    pub reps: usize,
    pub convex: bool,
    pub true_kinks: Vec<usize>,
    pub mean_kinks: f64,
    pub mean_spurious: f64,
    /// Fraction of replicates with at least one spurious kink.
    pub spurious_frequency: f64,
    pub missed_frequency: f64,
    pub replicates: Vec<TrendReplicate>,
}

/// Fits `reps` noisy draws of `shape` at length `n` with trend filtering at
/// `λ` and records the estimated kinks. Every fit is certified at `tol`.
pub fn run_trend_monitor(
    shape: &KinkShape,
    n: usize,
    lambda: f64,
    eps: f64,
    reps: usize,
    seed: u64,
    tol: f64,
) -> Result<TrendMonitorReport> {
    if reps == 0 {
        return Err(FlsaError::Config("reps must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(FlsaError::Config(format!("eps must lie in [0, 1), got {eps}")));
    }
    let mean = shape.mean_sequence(n)?;
    let truth = shape.kink_points(n);
    let replicates = (0..reps)
        .into_par_iter()
        .map(|rep| -> Result<TrendReplicate> {
            let mut rng = replicate_rng(seed, stream_id(0, rep));
            let y: Vec<f64> = mean
                .iter()
                .map(|m| m + shape.noise_sd * standard_normal(&mut rng))
                .collect();
            let fit = trend_solve(&Signal::new(y)?, lambda, tol)?;
            let spurious = spurious_change_points(n, &fit.kink_points, &truth, eps).len();
            let missed = truth.iter().any(|&k| {
                !fit.kink_points
                    .iter()
                    .any(|&e| (e.abs_diff(k) as f64) < eps * n as f64)
            });
            Ok(TrendReplicate {
                replicate: rep,
                kinks: fit.kink_points,
                spurious,
                missed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let r = reps as f64;
    Ok(TrendMonitorReport {
        n,
        lambda,
        eps,
        reps,
        convex: shape.is_convex(),
        true_kinks: truth,
        mean_kinks: replicates.iter().map(|x| x.kinks.len() as f64).sum::<f64>() / r,
        mean_spurious: replicates.iter().map(|x| x.spurious as f64).sum::<f64>() / r,
        spurious_frequency: replicates.iter().filter(|x| x.spurious > 0).count() as f64 / r,
        missed_frequency: replicates.iter().filter(|x| x.missed).count() as f64 / r,
        replicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn convex() -> KinkShape {
        KinkShape {
            kinks: vec![0.25, 0.5],
            slopes: vec![0.0, 4.0, 8.0],
            noise_sd: 1.0,
        }
    }

    #[test]
    fn mean_is_continuous_piecewise_linear() {
        let m = convex().mean_sequence(8).unwrap();
        assert_eq!(m, vec![0.0, 0.0, 0.0, 0.5, 1.0, 2.0, 3.0, 4.0]);
        let second: Vec<f64> = m.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect();
        let kinks: Vec<usize> = second
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > 1e-12)
            .map(|(j, _)| j + 1)
            .collect();
        assert_eq!(kinks, convex().kink_points(8));
    }

    #[test]
    fn shape_checks() {
        assert!(convex().is_convex());
        let mut bad = convex();
        bad.slopes.pop();
        assert!(bad.mean_sequence(10).is_err());
        assert!(convex().mean_sequence(3).is_err());
    }

    #[test]
    fn noiseless_truth_has_no_spurious_kinks() {
        let mut shape = convex();
        shape.noise_sd = 0.0;
        let report = run_trend_monitor(&shape, 40, 1e-3, 0.05, 2, 1, 1e-8).unwrap();
        assert_eq!(report.spurious_frequency, 0.0);
        assert_eq!(report.missed_frequency, 0.0);
    }
}
