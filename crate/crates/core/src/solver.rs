// SPDX-License-Identifier: MIT OR Apache-2.0

//! Exact FLSA solver and closed-form helpers.

use crate::error::{FlsaError, Result};
use crate::signal::{Segmentation, Sign, Signal};
use crate::sum::{self, CompensatedSum};

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_nan() || lambda < 0.0 || lambda.is_infinite() {
        return Err(FlsaError::Domain(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    Ok(())
}

/// Solves `min ½ Σ (y_t − m_t)² + λ Σ |m_t − m_{t−1}|` exactly.
///
/// Uses a single forward pass of the taut-string method: the dual bridge is
/// kept inside the `[−λ, λ]` tube and a segment is emitted whenever the tube
/// forces a jump. Worst case is quadratic, typical cost is linear.
pub fn solve(y: &Signal, lambda: f64) -> Result<Segmentation> {
    check_lambda(lambda)?;
    let mut fitted = vec![0.0; y.len()];
    taut_string(y.values(), lambda, &mut fitted);
    // jumps at rounding level are artefacts of the running updates
    let scale = y.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let merge_tol = if lambda > 0.0 { ROUNDING_JUMP * scale } else { 0.0 };
    let raw = Segmentation::from_sequence_with_tolerance(&fitted, lambda, merge_tol)?;
    Ok(refine_levels(y, raw))
}

/// Relative size below which a jump of the fitted sequence counts as zero.
const ROUNDING_JUMP: f64 = 1e-12;

// Recomputes the levels from the closed form with compensated sums, which
// removes the drift of the running updates. Kept only if every jump keeps
// its sign.
fn refine_levels(y: &Signal, raw: Segmentation) -> Segmentation {
    let signs: Vec<Sign> = raw.sign_changes().iter().map(|c| c.sign).collect();
    let Ok(levels) = segment_means(y, raw.change_points(), &signs, raw.lambda()) else {
        return raw;
    };
    let keeps_signs = levels
        .windows(2)
        .zip(&signs)
        .all(|(w, s)| Sign::of(w[1] - w[0]) == Some(*s));
    if !keeps_signs {
        return raw;
    }
    Segmentation::new(raw.n(), raw.change_points().to_vec(), levels, raw.lambda()).unwrap_or(raw)
}

/// Same as [`solve`] but returns the length-`n` fitted sequence.
pub fn solve_sequence(y: &Signal, lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    let mut fitted = vec![0.0; y.len()];
    taut_string(y.values(), lambda, &mut fitted);
    Ok(fitted)
}

// Direct taut-string pass. `vmin`/`vmax` are the lowest/highest admissible
// levels for the current segment, `umin`/`umax` the corresponding dual values
// at the current index, and `kminus`/`kplus` the last indices where the lower
// and upper bounds were attained.
fn taut_string(y: &[f64], lambda: f64, out: &mut [f64]) {
    let n = y.len();
    if n == 0 {
        return;
    }
    let two_lambda = 2.0 * lambda;
    let (mut k, mut k0, mut kminus, mut kplus) = (0usize, 0usize, 0usize, 0usize);
    let mut umin = lambda;
    let mut umax = -lambda;
    let mut vmin = y[0] - lambda;
    let mut vmax = y[0] + lambda;

    fn fill(out: &mut [f64], k0: &mut usize, last: usize, value: f64) {
        out[*k0..=last].fill(value);
        *k0 = last + 1;
    }

    loop {
        while k == n - 1 {
            if umin < 0.0 {
                fill(out, &mut k0, kminus, vmin);
                k = k0;
                kminus = k0;
                vmin = y[k0];
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if umax > 0.0 {
                fill(out, &mut k0, kplus, vmax);
                k = k0;
                kplus = k0;
                vmax = y[k0];
                umax = -lambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / (k - k0 + 1) as f64;
                fill(out, &mut k0, k, vmin);
                return;
            }
        }
        umin += y[k + 1] - vmin;
        if umin < -lambda {
            fill(out, &mut k0, kminus, vmin);
            k = k0;
            kminus = k0;
            kplus = k0;
            vmin = y[k0];
            vmax = vmin + two_lambda;
            umin = lambda;
            umax = -lambda;
            continue;
        }
        umax += y[k + 1] - vmax;
        if umax > lambda {
            fill(out, &mut k0, kplus, vmax);
            k = k0;
            kminus = k0;
            kplus = k0;
            vmax = y[k0];
            vmin = vmax - two_lambda;
            umin = lambda;
            umax = -lambda;
            continue;
        }
        k += 1;
        if umin >= lambda {
            kminus = k;
            vmin += (umin - lambda) / (k - k0 + 1) as f64;
            umin = lambda;
        }
        if umax <= -lambda {
            kplus = k;
            vmax += (umax + lambda) / (k - k0 + 1) as f64;
            umax = -lambda;
        }
    }
}

/// Smallest `λ` at which the solution is a single segment at the mean:
/// `max_k k · |mean(y) − mean(y_1..k)|`.
pub fn lambda_max(y: &Signal) -> f64 {
    let n = y.len();
    let mean = y.mean();
    let mut partial = CompensatedSum::new();
    let mut best = 0.0f64;
    for (k, &v) in y.values().iter().enumerate() {
        partial.add(v);
        let count = (k + 1) as f64;
        if k + 1 < n {
            best = best.max((count * mean - partial.value()).abs());
        }
    }
    best
}

/// Closed-form levels for known change points and jump signs:
/// `m_k = avg_k + λ (s_{k+1} − s_k) / len_k`, with `s = 0` at both ends.
pub fn segment_means(y: &Signal, change_points: &[usize], signs: &[Sign], lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    if signs.len() != change_points.len() {
        return Err(FlsaError::Input(format!(
            "{} change points but {} signs",
            change_points.len(),
            signs.len()
        )));
    }
    let n = y.len();
    let mut prev = 0usize;
    for &cp in change_points {
        if cp <= prev || cp >= n {
            return Err(FlsaError::Input(format!(
                "empty segment: change point {cp} after {prev} in a signal of length {n}"
            )));
        }
        prev = cp;
    }
    let bounds: Vec<usize> = std::iter::once(0)
        .chain(change_points.iter().copied())
        .chain(std::iter::once(n))
        .collect();
    let values = y.values();
    let levels = bounds
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let len = (w[1] - w[0]) as f64;
            let left = if k == 0 { 0.0 } else { signs[k - 1].value() };
            let right = signs.get(k).map_or(0.0, |s| s.value());
            (sum::sum(&values[w[0]..w[1]]) + lambda * (right - left)) / len
        })
        .collect();
    Ok(levels)
}

/// Replaces the levels of `seg` by plain segment averages, fusing neighbours
/// whose averages coincide.
pub fn polish(y: &Signal, seg: &Segmentation) -> Result<Segmentation> {
    if seg.n() != y.len() {
        return Err(FlsaError::Input(format!(
            "segmentation length {} does not match signal length {}",
            seg.n(),
            y.len()
        )));
    }
    let values = y.values();
    let averages: Vec<f64> = seg
        .segments()
        .map(|r| sum::sum(&values[r.clone()]) / r.len() as f64)
        .collect();
    let mut change_points = Vec::with_capacity(seg.change_points().len());
    let mut levels: Vec<f64> = Vec::with_capacity(averages.len());
    for (range, level) in seg.segments().zip(averages) {
        if levels.last() == Some(&level) {
            continue;
        }
        if !levels.is_empty() {
            change_points.push(range.start);
        }
        levels.push(level);
    }
    Segmentation::new(seg.n(), change_points, levels, seg.lambda())
}
