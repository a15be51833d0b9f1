// SPDX-License-Identifier: MIT OR Apache-2.0

//! Declarative experiment configuration.
//!
//! A truth is given in relative form (break fractions and levels) so that one
//! config describes a whole sweep over `N`. Configs deserialize from any serde
//! format; the CLI reads TOML.

use serde::{Deserialize, Serialize};

use crate::error::{FlsaError, Result};
use crate::signal::StepModel;

/// Piecewise constant truth in relative coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthShape {
    /// Change points as fractions of `N`, strictly increasing in `(0, 1)`.
    pub breaks: Vec<f64>,
    pub levels: Vec<f64>,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
}

fn default_noise_sd() -> f64 {
    1.0
}

impl TruthShape {
    /// The step model at length `n`; break `f` lands at `round(f · n)`.
    pub fn model(&self, n: usize) -> Result<StepModel> {
        if self.levels.len() != self.breaks.len() + 1 {
            return Err(FlsaError::Config(format!(
                "{} breaks need {} levels, got {}",
                self.breaks.len(),
                self.breaks.len() + 1,
                self.levels.len()
            )));
        }
        if let Some(f) = self.breaks.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
            return Err(FlsaError::Config(format!("break fraction {f} is outside (0, 1)")));
        }
        let change_points: Vec<usize> = self
            .breaks
            .iter()
            .map(|f| (f * n as f64).round() as usize)
            .collect();
        StepModel::new(n, change_points, self.levels.clone(), self.noise_sd)
            .map_err(|e| FlsaError::Config(format!("truth at N = {n}: {e}")))
    }

    /// Smallest segment length as a fraction of `N`.
    pub fn min_segment_fraction(&self) -> f64 {
        let mut bounds = vec![0.0];
        bounds.extend(self.breaks.iter().copied());
        bounds.push(1.0);
        bounds.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn has_alternating_signs(&self) -> bool {
        let jumps: Vec<f64> = self.levels.windows(2).map(|w| w[1] - w[0]).collect();
        jumps.windows(2).all(|w| w[0] * w[1] < 0.0)
    }
}

/// How `λ` is chosen for each replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaRule {
    Fixed { value: f64 },
    /// `fraction · λ_max(y)` of each replicate's data.
    FractionOfMax { fraction: f64 },
    /// `λ_N = m5 · N^c1`. Without `m5`, it is matched so that `λ` at the
    /// middle `N` of the sweep equals a third of the noiseless `λ_max`.
    Power {
        #[serde(default)]
        m5: Option<f64>,
        c1: f64,
    },
    /// Geometric grid of `points` values strictly inside
    /// `(min_fraction · λ_max, λ_max)`; consistency is granted if any
    /// grid point succeeds.
    Grid {
        points: usize,
        #[serde(default = "default_min_fraction")]
        min_fraction: f64,
    },
}

fn default_min_fraction() -> f64 {
    1e-3
}

/// Free constants of the consistency theorem for alternating truths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremConstants {
    /// Upper bound on the number of change points.
    pub m1: usize,
    /// Lower bound on segment length as a fraction of `N`.
    pub m2: f64,
    /// Lower bound on absolute jump size.
    pub m3: f64,
    /// Upper bound on absolute jump size.
    pub m4: f64,
}

impl Default for TheoremConstants {
    fn default() -> Self {
        Self {
            m1: 5,
            m2: 0.1,
            m3: 0.5,
            m4: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub truth: TruthShape,
    pub n_values: Vec<usize>,
    pub lambda: LambdaRule,
    pub eps: f64,
    pub reps: usize,
    pub seed: u64,
    /// KKT tolerance every solver call must pass.
    #[serde(default = "default_kkt_tol")]
    pub kkt_tol: f64,
    #[serde(default)]
    pub constants: TheoremConstants,
}

fn default_kkt_tol() -> f64 {
    crate::DEFAULT_KKT_TOL
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(FlsaError::Config("reps must be at least 1".into()));
        }
        if self.n_values.is_empty() {
            return Err(FlsaError::Config("n_values must not be empty".into()));
        }
        if !(self.eps >= 0.0 && self.eps < 1.0) {
            return Err(FlsaError::Config(format!("eps must lie in [0, 1), got {}", self.eps)));
        }
        if !(self.kkt_tol > 0.0) {
            return Err(FlsaError::Config("kkt_tol must be positive".into()));
        }
        if !(self.truth.noise_sd >= 0.0 && self.truth.noise_sd.is_finite()) {
            return Err(FlsaError::Config("noise_sd must be finite and >= 0".into()));
        }
        match &self.lambda {
            LambdaRule::Fixed { value } if !(*value >= 0.0 && value.is_finite()) => {
                return Err(FlsaError::Config(format!("fixed lambda must be >= 0, got {value}")));
            }
            LambdaRule::FractionOfMax { fraction } if !(*fraction >= 0.0 && fraction.is_finite()) => {
                return Err(FlsaError::Config(format!("lambda fraction must be >= 0, got {fraction}")));
            }
            LambdaRule::Power { m5, c1 } => {
                if !(*c1 > 0.5 && *c1 < 1.0) {
                    return Err(FlsaError::Config(format!("c1 must lie in (1/2, 1), got {c1}")));
                }
                if let Some(m5) = m5 {
                    if !(*m5 > 0.0 && m5.is_finite()) {
                        return Err(FlsaError::Config(format!("m5 must be positive, got {m5}")));
                    }
                }
            }
            LambdaRule::Grid {
                points,
                min_fraction,
            } => {
                if *points == 0 {
                    return Err(FlsaError::Config("grid needs at least one point".into()));
                }
                if !(*min_fraction > 0.0 && *min_fraction < 1.0) {
                    return Err(FlsaError::Config(format!(
                        "grid min_fraction must lie in (0, 1), got {min_fraction}"
                    )));
                }
            }
            _ => {}
        }
        for &n in &self.n_values {
            self.truth.model(n)?;
        }
        Ok(())
    }

    /// Checks the structural assumptions of the consistency theorem:
    /// bounded change-point count, long segments, bounded jumps and
    /// alternating signs.
    pub fn validate_theorem_assumptions(&self) -> Result<()> {
        let c = &self.constants;
        if !self.truth.has_alternating_signs() {
            return Err(FlsaError::Config(
                "consecutive jumps of the truth must alternate in sign; \
                 same-sign staircases are covered by run_example2"
                    .into(),
            ));
        }
        if self.truth.breaks.len() > c.m1 {
            return Err(FlsaError::Config(format!(
                "{} change points exceed m1 = {}",
                self.truth.breaks.len(),
                c.m1
            )));
        }
        for &n in &self.n_values {
            let model = self.truth.model(n)?;
            if (model.min_segment_len() as f64) < c.m2 * n as f64 {
                return Err(FlsaError::Config(format!(
                    "at N = {n} the shortest segment ({}) is below m2 · N",
                    model.min_segment_len()
                )));
            }
        }
        for w in self.truth.levels.windows(2) {
            let jump = (w[1] - w[0]).abs();
            if jump < c.m3 || jump > c.m4 {
                return Err(FlsaError::Config(format!(
                    "jump size {jump} is outside [m3, m4] = [{}, {}]",
                    c.m3, c.m4
                )));
            }
        }
        if !matches!(self.lambda, LambdaRule::Power { .. }) {
            return Err(FlsaError::Config("the sweep needs the power lambda rule".into()));
        }
        Ok(())
    }
}
