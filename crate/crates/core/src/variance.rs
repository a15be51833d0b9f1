// SPDX-License-Identifier: MIT OR Apache-2.0

//! Variance-only filtering.
//!
//! For zero-mean data `y_t ~ N(0, σ_t²)` with piecewise constant `σ_t²`, the
//! penalized likelihood estimate of `σ²` is the FLSA applied to `y_t²`. Only
//! this reduction is provided; joint mean and variance segmentation is not.

use serde::Serialize;

use crate::error::{FlsaError, Result};
use crate::signal::{Segmentation, Signal};
use crate::solver::solve;

/// Piecewise constant variance estimate; every level is strictly positive.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarianceSegmentation {
    segmentation: Segmentation,
}

impl VarianceSegmentation {
    pub fn segmentation(&self) -> &Segmentation {
        &self.segmentation
    }

    pub fn into_segmentation(self) -> Segmentation {
        self.segmentation
    }

    pub fn change_points(&self) -> &[usize] {
        self.segmentation.change_points()
    }

    /// Variance levels `σ²`, one per segment.
    pub fn levels(&self) -> &[f64] {
        self.segmentation.levels()
    }

    /// Per-sample variances.
    pub fn expand(&self) -> Vec<f64> {
        self.segmentation.expand()
    }
}

/// Runs the FLSA on the squared data and checks that every level is positive.
pub fn variance_solve(y: &Signal, lambda: f64) -> Result<VarianceSegmentation> {
    let segmentation = solve(&y.squared()?, lambda)?;
    let offending = segmentation
        .levels()
        .iter()
        .position(|&level| level <= 0.0);
    if let Some(segment) = offending {
        let start = segment
            .checked_sub(1)
            .map_or(0, |k| segmentation.change_points()[k]);
        return Err(FlsaError::DegenerateVariance {
            segment,
            start,
            level: segmentation.levels()[segment],
        });
    }
    Ok(VarianceSegmentation { segmentation })
}
