// SPDX-License-Identifier: MIT OR Apache-2.0

//! Core domain types.
//!
//! Index convention: a change point at position `k` (0-based) means the level
//! differs between samples `k − 1` and `k`, i.e. `k` is the first index of the
//! new segment. Valid positions are `1..n`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{FlsaError, Result};
use crate::sum;

/// An immutable, non-empty sequence of finite observations.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Signal(Vec<f64>);

impl Signal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(FlsaError::Input("signal must contain at least one value".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FlsaError::Input(format!(
                "signal value at index {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        sum::sum(&self.0)
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.len() as f64
    }

    /// `Σ |y_t|`.
    pub fn abs_sum(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    /// Elementwise square; fails only if a square overflows.
    pub fn squared(&self) -> Result<Signal> {
        Signal::new(self.0.iter().map(|v| v * v).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Signal {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Signal {
    type Error = FlsaError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Signal::new(values)
    }
}

/// Sign of a level jump.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "-1")]
    Down,
    #[serde(rename = "+1")]
    Up,
}

impl Sign {
    /// Sign of a nonzero difference; `None` for zero or NaN.
    pub fn of(delta: f64) -> Option<Sign> {
        if delta > 0.0 {
            Some(Sign::Up)
        } else if delta < 0.0 {
            Some(Sign::Down)
        } else {
            None
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Up => 1.0,
            Sign::Down => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Up => 1,
            Sign::Down => -1,
        }
    }

    pub fn from_i8(value: i8) -> Option<Sign> {
        match value {
            1 => Some(Sign::Up),
            -1 => Some(Sign::Down),
            _ => None,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Up => Sign::Down,
            Sign::Down => Sign::Up,
        }
    }
}

/// A change point together with the sign of its jump.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignChange {
    pub position: usize,
    pub sign: Sign,
}

fn validate_structure(n: usize, change_points: &[usize], levels: &[f64]) -> Result<()> {
    if n == 0 {
        return Err(FlsaError::Input("length must be at least 1".into()));
    }
    if levels.len() != change_points.len() + 1 {
        return Err(FlsaError::Input(format!(
            "{} change points need {} levels, got {}",
            change_points.len(),
            change_points.len() + 1,
            levels.len()
        )));
    }
    let mut prev = 0usize;
    for &cp in change_points {
        if cp <= prev || cp >= n {
            return Err(FlsaError::Input(format!(
                "change points must be strictly increasing within 1..{n}, found {cp} after {prev}"
            )));
        }
        prev = cp;
    }
    if let Some(i) = levels.iter().position(|v| !v.is_finite()) {
        return Err(FlsaError::Input(format!("level {i} is not finite")));
    }
    if let Some(i) = levels.windows(2).position(|w| w[0] == w[1]) {
        return Err(FlsaError::Input(format!(
            "levels {i} and {} are equal; change point {} has no jump",
            i + 1,
            change_points[i]
        )));
    }
    Ok(())
}

fn segment_ranges(n: usize, change_points: &[usize]) -> impl Iterator<Item = Range<usize>> + '_ {
    let starts = std::iter::once(0).chain(change_points.iter().copied());
    let ends = change_points.iter().copied().chain(std::iter::once(n));
    starts.zip(ends).map(|(s, e)| s..e)
}

fn expand_levels(n: usize, change_points: &[usize], levels: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    for (range, &level) in segment_ranges(n, change_points).zip(levels) {
        out.extend(std::iter::repeat_n(level, range.len()));
    }
    out
}

fn jump_signs(change_points: &[usize], levels: &[f64]) -> Vec<SignChange> {
    change_points
        .iter()
        .zip(levels.windows(2))
        .map(|(&position, w)| SignChange {
            position,
            // levels are validated to differ
            sign: Sign::of(w[1] - w[0]).unwrap_or(Sign::Up),
        })
        .collect()
}

/// Piecewise-constant fit: change points, per-segment levels and the `λ`
/// that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    n: usize,
    change_points: Vec<usize>,
    levels: Vec<f64>,
    lambda: f64,
}

impl Segmentation {
    pub fn new(n: usize, change_points: Vec<usize>, levels: Vec<f64>, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(FlsaError::Domain(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        validate_structure(n, &change_points, &levels)?;
        Ok(Self {
            n,
            change_points,
            levels,
            lambda,
        })
    }

    /// Compresses a step sequence: a change point is recorded wherever two
    /// consecutive values differ.
    pub fn from_sequence(values: &[f64], lambda: f64) -> Result<Self> {
        Self::from_sequence_with_tolerance(values, lambda, 0.0)
    }

    /// Like [`Segmentation::from_sequence`], but consecutive values within
    /// `tol` belong to the same run; each run's level is its mean.
    pub fn from_sequence_with_tolerance(values: &[f64], lambda: f64, tol: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(FlsaError::Input("cannot segment an empty sequence".into()));
        }
        let mut change_points = Vec::new();
        let mut levels: Vec<f64> = Vec::new();
        let mut start = 0;
        for t in 1..=values.len() {
            if t < values.len() && (values[t] - values[t - 1]).abs() <= tol {
                continue;
            }
            let run = &values[start..t];
            let level = if tol == 0.0 {
                run[0]
            } else {
                sum::sum(run) / run.len() as f64
            };
            // averaged runs can coincide exactly; keep them fused
            if levels.last() != Some(&level) {
                if !levels.is_empty() {
                    change_points.push(start);
                }
                levels.push(level);
            }
            start = t;
        }
        Self::new(values.len(), change_points, levels, lambda)
    }

    /// A single segment at `level`.
    pub fn constant(n: usize, level: f64, lambda: f64) -> Result<Self> {
        Self::new(n, Vec::new(), vec![level], lambda)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn change_points(&self) -> &[usize] {
        &self.change_points
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn num_segments(&self) -> usize {
        self.levels.len()
    }

    /// Half-open index range of every segment.
    pub fn segments(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        segment_ranges(self.n, &self.change_points)
    }

    /// The length-`n` step sequence.
    pub fn expand(&self) -> Vec<f64> {
        expand_levels(self.n, &self.change_points, &self.levels)
    }

    /// Change points with the sign of their jumps.
    pub fn sign_changes(&self) -> Vec<SignChange> {
        jump_signs(&self.change_points, &self.levels)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }
}

/// Piecewise-constant ground truth with additive Gaussian noise of standard
/// deviation `noise_sd`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepModel {
    n: usize,
    change_points: Vec<usize>,
    levels: Vec<f64>,
    noise_sd: f64,
}

impl StepModel {
    pub fn new(n: usize, change_points: Vec<usize>, levels: Vec<f64>, noise_sd: f64) -> Result<Self> {
        validate_structure(n, &change_points, &levels)?;
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(FlsaError::Input(format!("noise_sd must be finite and >= 0, got {noise_sd}")));
        }
        Ok(Self {
            n,
            change_points,
            levels,
            noise_sd,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn change_points(&self) -> &[usize] {
        &self.change_points
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn segments(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        segment_ranges(self.n, &self.change_points)
    }

    /// The noiseless mean sequence `m⁰`.
    pub fn mean_sequence(&self) -> Vec<f64> {
        expand_levels(self.n, &self.change_points, &self.levels)
    }

    pub fn sign_changes(&self) -> Vec<SignChange> {
        jump_signs(&self.change_points, &self.levels)
    }

    /// True when every pair of consecutive jumps has opposite signs.
    pub fn has_alternating_signs(&self) -> bool {
        self.sign_changes().windows(2).all(|w| w[0].sign != w[1].sign)
    }

    /// Length of the shortest segment.
    pub fn min_segment_len(&self) -> usize {
        self.segments().map(|r| r.len()).min().unwrap_or(0)
    }

    pub fn with_noise_sd(mut self, noise_sd: f64) -> Self {
        self.noise_sd = noise_sd;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expand_single_segment() {
        let seg = Segmentation::new(3, vec![], vec![5.0], 0.0).unwrap();
        assert_eq!(seg.expand(), vec![5.0, 5.0, 5.0]);
    }

    #[test]
    fn expand_two_segments() {
        let seg = Segmentation::new(4, vec![2], vec![0.125, 0.875], 0.25).unwrap();
        assert_eq!(seg.expand(), vec![0.125, 0.125, 0.875, 0.875]);
        let seg = Segmentation::new(2, vec![1], vec![1.0, 2.0], 0.0).unwrap();
        assert_eq!(seg.expand(), vec![1.0, 2.0]);
    }

    #[test]
    fn rejects_invalid_structure() {
        assert!(Segmentation::new(4, vec![0], vec![1.0, 2.0], 0.0).is_err());
        assert!(Segmentation::new(4, vec![4], vec![1.0, 2.0], 0.0).is_err());
        assert!(Segmentation::new(4, vec![2, 2], vec![1.0, 2.0, 3.0], 0.0).is_err());
        assert!(Segmentation::new(4, vec![2], vec![1.0], 0.0).is_err());
        assert!(Segmentation::new(4, vec![2], vec![1.0, 1.0], 0.0).is_err());
        assert!(Segmentation::new(4, vec![2], vec![1.0, 2.0], -1.0).is_err());
        assert!(Segmentation::new(0, vec![], vec![1.0], 0.0).is_err());
    }

    #[test]
    fn signal_rejects_non_finite() {
        assert!(Signal::new(vec![]).is_err());
        assert!(Signal::new(vec![1.0, f64::NAN]).is_err());
        assert!(Signal::new(vec![f64::INFINITY]).is_err());
        assert_eq!(Signal::new(vec![1.0, 3.0]).unwrap().mean(), 2.0);
    }

    #[test]
    fn compress_detects_level_changes() {
        let seg = Segmentation::from_sequence(&[1.0, 1.0, 3.0, 3.0, 2.0], 0.0).unwrap();
        assert_eq!(seg.change_points(), &[2, 4]);
        assert_eq!(seg.levels(), &[1.0, 3.0, 2.0]);
        let signs: Vec<_> = seg.sign_changes().iter().map(|c| c.sign).collect();
        assert_eq!(signs, vec![Sign::Up, Sign::Down]);
    }

    #[test]
    fn tolerant_compression_merges_near_ties() {
        let seg =
            Segmentation::from_sequence_with_tolerance(&[1.0, 1.0 + 1e-14, 2.0, 2.0], 0.5, 1e-12)
                .unwrap();
        assert_eq!(seg.change_points(), &[2]);
        assert!((seg.levels()[0] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn step_model_sign_pattern() {
        let staircase = StepModel::new(10, vec![3, 6], vec![1.0, 2.0, 3.0], 1.0).unwrap();
        assert!(!staircase.has_alternating_signs());
        let alternating = StepModel::new(10, vec![3, 6], vec![1.0, 2.0, 1.0], 1.0).unwrap();
        assert!(alternating.has_alternating_signs());
        assert_eq!(alternating.min_segment_len(), 3);
        assert!(StepModel::new(10, vec![3], vec![1.0, 2.0], f64::NAN).is_err());
    }
}
