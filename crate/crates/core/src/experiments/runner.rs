// SPDX-License-Identifier: MIT OR Apache-2.0

//! Replicate loop, aggregation and the named experiments.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, LambdaRule, TheoremConstants, TruthShape};
use super::rng::{generate_with, replicate_rng, stream_id};
use crate::certificate::{dual_variables, verify_kkt};
use crate::error::{FlsaError, Result};
use crate::metrics::{eps_sign_consistent, set_distance, spurious_change_points};
use crate::signal::{Segmentation, Signal, StepModel};
use crate::solver::{lambda_max, solve};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub n: usize,
    pub replicate: usize,
    /// `λ` of the recorded segmentation.
    pub lambda: f64,
    pub change_points: Vec<usize>,
    pub num_change_points: usize,
    pub spurious: usize,
    pub consistent: bool,
    /// Consistency at every grid point, grid rule only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_consistent: Option<Vec<bool>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPointSummary {
    pub index: usize,
    /// `λ / λ_max(y)` at this grid point.
    pub fraction_of_max: f64,
    pub failures: usize,
    pub failure_frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NSummary {
    pub n: usize,
    pub reps: usize,
    pub failures: usize,
    pub failure_frequency: f64,
    /// Wilson 95% interval for the failure probability.
    pub failure_ci: [f64; 2],
    pub mean_change_points: f64,
    pub mean_spurious: f64,
    /// Mean number of spurious change points inside each true segment.
    pub mean_spurious_by_segment: Vec<f64>,
    /// `λ` used at this `N` when it does not depend on the data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<GridPointSummary>>,
    /// `−ln(P̂) / N^(2 c1 − 1)` with `P̂ = (failures + ½) / (reps + 1)`,
    /// power rule only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_diagnostic: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepVerdict {
    /// Failure frequency is non-increasing in `N` up to at most one inversion
    /// whose confidence intervals overlap.
    pub non_increasing: bool,
    pub inversions: usize,
    /// Every rate diagnostic is finite and at most `rate_ceiling`.
    pub rate_bounded: bool,
    /// `ln(2 (reps + 1)) / N_min^(2 c1 − 1)`, the largest value the
    /// continuity-corrected diagnostic can take on the sweep.
    pub rate_ceiling: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McReport {
    pub name: String,
    pub config: ExperimentConfig,
    /// `1 − π² ε / (c − ε)` when the truth has two consecutive jumps of the
    /// same sign, with `c` the shortest segment fraction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub staircase_failure_bound: Option<f64>,
    pub summaries: Vec<NSummary>,
    pub replicates: Vec<ReplicateRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepVerdict>,
    /// Wall-clock time; kept out of the serialized report so that reruns
    /// are byte-identical.
    #[serde(skip)]
    pub runtime: Duration,
}

impl McReport {
    pub fn summary(&self, n: usize) -> Option<&NSummary> {
        self.summaries.iter().find(|s| s.n == n)
    }

    /// Overall success frequency across all `N`.
    pub fn success_frequency(&self) -> f64 {
        let ok = self.replicates.iter().filter(|r| r.consistent).count();
        ok as f64 / self.replicates.len().max(1) as f64
    }
}

/// Wilson score interval at 95% for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize) -> [f64; 2] {
    if n == 0 {
        return [0.0, 1.0];
    }
    let z = 1.959_963_984_540_054;
    let nf = n as f64;
    let p = k as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    [(centre - half).max(0.0), (centre + half).min(1.0)]
}

/// Geometric grid of `points` values strictly inside `(lo, hi)`: the
/// midpoints of `points` equal steps in `log λ`.
pub fn lambda_grid(lambda_max: f64, points: usize, min_fraction: f64) -> Vec<f64> {
    let lo = min_fraction.ln();
    (0..points)
        .map(|i| lambda_max * (lo * (1.0 - (i as f64 + 0.5) / points as f64)).exp())
        .collect()
}

fn grid_fractions(points: usize, min_fraction: f64) -> Vec<f64> {
    lambda_grid(1.0, points, min_fraction)
}

/// Solves and certifies; any certificate failure aborts the experiment.
fn certified_solve(y: &Signal, lambda: f64, tol: f64, n: usize, rep: usize) -> Result<Segmentation> {
    let seg = solve(y, lambda)?;
    let report = verify_kkt(y, &seg, lambda, tol);
    if !report.feasible {
        return Err(FlsaError::Certificate(format!(
            "N = {n}, replicate {rep}, lambda = {lambda}: box residual {:.3e}, \
             mismatched change points {:?}, stationarity residual {:.3e}",
            report.box_residual, report.active_set_mismatch, report.stationarity_residual
        )));
    }
    Ok(seg)
}

struct Evaluated {
    seg: Segmentation,
    consistent: bool,
}

fn evaluate(
    y: &Signal,
    truth: &StepModel,
    lambda: f64,
    cfg: &ExperimentConfig,
    rep: usize,
) -> Result<Evaluated> {
    let seg = certified_solve(y, lambda, cfg.kkt_tol, truth.n(), rep)?;
    let consistent = eps_sign_consistent(&seg, truth, cfg.eps);
    Ok(Evaluated { seg, consistent })
}

fn run_replicate(
    cfg: &ExperimentConfig,
    truth: &StepModel,
    point: usize,
    rep: usize,
    fixed_lambda: Option<f64>,
) -> Result<ReplicateRecord> {
    let n = truth.n();
    let mut rng = replicate_rng(cfg.seed, stream_id(point, rep));
    let y = generate_with(truth, &mut rng);
    let (chosen, grid_consistent) = match (&cfg.lambda, fixed_lambda) {
        (_, Some(lambda)) => (evaluate(&y, truth, lambda, cfg, rep)?, None),
        (LambdaRule::FractionOfMax { fraction }, None) => {
            (evaluate(&y, truth, fraction * lambda_max(&y), cfg, rep)?, None)
        }
        (
            LambdaRule::Grid {
                points,
                min_fraction,
            },
            None,
        ) => {
            let mut flags = Vec::with_capacity(*points);
            let mut best: Option<(bool, f64, Evaluated)> = None;
            for lambda in lambda_grid(lambda_max(&y), *points, *min_fraction) {
                let ev = evaluate(&y, truth, lambda, cfg, rep)?;
                flags.push(ev.consistent);
                let distance = set_distance(ev.seg.change_points(), truth.change_points());
                let better = match &best {
                    None => true,
                    Some((ok, d, _)) => !ok && (ev.consistent || distance < *d),
                };
                if better {
                    best = Some((ev.consistent, distance, ev));
                }
            }
            let (_, _, ev) = best.expect("grid has at least one point");
            (ev, Some(flags))
        }
        _ => unreachable!("data-independent rules resolve to a fixed lambda"),
    };
    let consistent = match &grid_consistent {
        Some(flags) => flags.iter().any(|f| *f),
        None => chosen.consistent,
    };
    let spurious = spurious_change_points(n, chosen.seg.change_points(), truth.change_points(), cfg.eps);
    Ok(ReplicateRecord {
        n,
        replicate: rep,
        lambda: chosen.seg.lambda(),
        change_points: chosen.seg.change_points().to_vec(),
        num_change_points: chosen.seg.change_points().len(),
        spurious: spurious.len(),
        consistent,
        grid_consistent,
    })
}

/// `m5` of the power rule, matched at the middle `N` when not given.
fn resolve_m5(cfg: &ExperimentConfig, m5: Option<f64>, c1: f64) -> Result<f64> {
    if let Some(m5) = m5 {
        return Ok(m5);
    }
    let mut ns = cfg.n_values.clone();
    ns.sort_unstable();
    let middle = ns[ns.len() / 2];
    let model = cfg.truth.model(middle)?.with_noise_sd(0.0);
    let noiseless = Signal::new(model.mean_sequence())?;
    let target = lambda_max(&noiseless) / 3.0;
    if !(target > 0.0) {
        return Err(FlsaError::Config("cannot match m5 on a constant truth".into()));
    }
    Ok(target / (middle as f64).powf(c1))
}

fn staircase_bound(truth: &TruthShape, eps: f64) -> Option<f64> {
    let jumps: Vec<f64> = truth.levels.windows(2).map(|w| w[1] - w[0]).collect();
    let staircase = jumps.windows(2).any(|w| w[0] * w[1] > 0.0);
    let c = truth.min_segment_fraction();
    (staircase && eps < c).then(|| 1.0 - PI * PI * eps / (c - eps))
}

fn summarize(
    cfg: &ExperimentConfig,
    truth: &StepModel,
    records: &[ReplicateRecord],
    lambda: Option<f64>,
) -> NSummary {
    let n = truth.n();
    let reps = records.len();
    let failures = records.iter().filter(|r| !r.consistent).count();
    let mean = |f: &dyn Fn(&ReplicateRecord) -> f64| records.iter().map(f).sum::<f64>() / reps as f64;
    let segments: Vec<_> = truth.segments().collect();
    let mut by_segment = vec![0usize; segments.len()];
    for r in records {
        for p in spurious_change_points(n, &r.change_points, truth.change_points(), cfg.eps) {
            if let Some(k) = segments.iter().position(|s| s.contains(&p)) {
                by_segment[k] += 1;
            }
        }
    }
    let grid = match &cfg.lambda {
        LambdaRule::Grid {
            points,
            min_fraction,
        } => Some(
            grid_fractions(*points, *min_fraction)
                .into_iter()
                .enumerate()
                .map(|(index, fraction_of_max)| {
                    let failures = records
                        .iter()
                        .filter(|r| r.grid_consistent.as_ref().is_some_and(|g| !g[index]))
                        .count();
                    GridPointSummary {
                        index,
                        fraction_of_max,
                        failures,
                        failure_frequency: failures as f64 / reps as f64,
                    }
                })
                .collect(),
        ),
        _ => None,
    };
    let rate_diagnostic = match &cfg.lambda {
        LambdaRule::Power { c1, .. } => {
            let p_hat = (failures as f64 + 0.5) / (reps as f64 + 1.0);
            Some(-p_hat.ln() / (n as f64).powf(2.0 * c1 - 1.0))
        }
        _ => None,
    };
    NSummary {
        n,
        reps,
        failures,
        failure_frequency: failures as f64 / reps as f64,
        failure_ci: wilson_interval(failures, reps),
        mean_change_points: mean(&|r| r.num_change_points as f64),
        mean_spurious: mean(&|r| r.spurious as f64),
        mean_spurious_by_segment: by_segment.iter().map(|c| *c as f64 / reps as f64).collect(),
        lambda,
        grid,
        rate_diagnostic,
    }
}

/// Runs a configured experiment. Replicates run in parallel on the current
/// rayon pool; results do not depend on the number of threads.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<McReport> {
    cfg.validate()?;
    let started = Instant::now();
    let power = match &cfg.lambda {
        LambdaRule::Power { m5, c1 } => Some((resolve_m5(cfg, *m5, *c1)?, *c1)),
        _ => None,
    };
    let mut summaries = Vec::with_capacity(cfg.n_values.len());
    let mut replicates = Vec::with_capacity(cfg.n_values.len() * cfg.reps);
    for (point, &n) in cfg.n_values.iter().enumerate() {
        let truth = cfg.truth.model(n)?;
        let fixed = match (&cfg.lambda, power) {
            (LambdaRule::Fixed { value }, _) => Some(*value),
            (_, Some((m5, c1))) => Some(m5 * (n as f64).powf(c1)),
            _ => None,
        };
        let records = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| run_replicate(cfg, &truth, point, rep, fixed))
            .collect::<Result<Vec<_>>>()?;
        summaries.push(summarize(cfg, &truth, &records, fixed));
        replicates.extend(records);
    }
    Ok(McReport {
        name: cfg.name.clone(),
        config: cfg.clone(),
        staircase_failure_bound: staircase_bound(&cfg.truth, cfg.eps),
        summaries,
        replicates,
        sweep: None,
        runtime: started.elapsed(),
    })
}

/// Levels 1, 2, 1 with breaks at a quarter and half of `N = 4000`.
pub fn example1_config(reps: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        name: "example1".into(),
        truth: TruthShape {
            breaks: vec![0.25, 0.5],
            levels: vec![1.0, 2.0, 1.0],
            noise_sd: 1.0,
        },
        n_values: vec![4000],
        lambda: LambdaRule::FractionOfMax { fraction: 1.0 / 3.0 },
        eps: 0.02,
        reps,
        seed,
        kkt_tol: crate::DEFAULT_KKT_TOL,
        constants: TheoremConstants::default(),
    }
}

/// The staircase 1, 2, 3 with the same breaks, scored over a 50-point grid.
pub fn example2_config(reps: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        name: "example2".into(),
        truth: TruthShape {
            breaks: vec![0.25, 0.5],
            levels: vec![1.0, 2.0, 3.0],
            noise_sd: 1.0,
        },
        n_values: vec![4000],
        lambda: LambdaRule::Grid {
            points: 50,
            min_fraction: 1e-3,
        },
        eps: 0.01,
        reps,
        seed,
        kkt_tol: crate::DEFAULT_KKT_TOL,
        constants: TheoremConstants::default(),
    }
}

/// Alternating truth 1, 2, 1, 2 on equal segments with `λ_N = m5 N^0.75`.
pub fn sweep_config(reps: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        name: "consistency-sweep".into(),
        truth: TruthShape {
            breaks: vec![0.25, 0.5, 0.75],
            levels: vec![1.0, 2.0, 1.0, 2.0],
            noise_sd: 1.0,
        },
        n_values: vec![250, 500, 1000, 2000, 4000],
        lambda: LambdaRule::Power { m5: None, c1: 0.75 },
        eps: SWEEP_EPS,
        reps,
        seed,
        kkt_tol: crate::DEFAULT_KKT_TOL,
        constants: TheoremConstants::default(),
    }
}

/// Default `ε` of [`sweep_config`].
pub const SWEEP_EPS: f64 = 0.02;

pub fn run_example1(reps: usize, seed: u64) -> Result<McReport> {
    run_experiment(&example1_config(reps, seed))
}

pub fn run_example2(reps: usize, seed: u64) -> Result<McReport> {
    run_experiment(&example2_config(reps, seed))
}

/// Runs a sweep over `N` for a truth with alternating jump signs and judges
/// the trend of the failure frequency and the rate diagnostic.
pub fn run_consistency_sweep(cfg: &ExperimentConfig) -> Result<McReport> {
    cfg.validate()?;
    cfg.validate_theorem_assumptions()?;
    let mut report = run_experiment(cfg)?;
    let mut order: Vec<&NSummary> = report.summaries.iter().collect();
    order.sort_by_key(|s| s.n);
    let mut inversions = 0;
    let mut overlapping = true;
    for w in order.windows(2) {
        if w[1].failure_frequency > w[0].failure_frequency {
            inversions += 1;
            overlapping &= w[1].failure_ci[0] <= w[0].failure_ci[1];
        }
    }
    let c1 = match cfg.lambda {
        LambdaRule::Power { c1, .. } => c1,
        _ => unreachable!("checked by validate_theorem_assumptions"),
    };
    let n_min = order.first().map_or(1, |s| s.n) as f64;
    let rate_ceiling = (2.0 * (cfg.reps as f64 + 1.0)).ln() / n_min.powf(2.0 * c1 - 1.0);
    let rate_bounded = order.iter().all(|s| {
        s.rate_diagnostic
            .is_some_and(|r| r.is_finite() && r <= rate_ceiling * (1.0 + 1e-12))
    });
    report.sweep = Some(SweepVerdict {
        non_increasing: inversions == 0 || (inversions == 1 && overlapping),
        inversions,
        rate_bounded,
        rate_ceiling,
    });
    Ok(report)
}

/// Mean fraction of the interior of true segment `segment` on which the
/// optimal dual sits within `1e−3 λ` of `+λ`, at `λ = fraction · λ_max(y)`.
pub fn boundary_fraction(
    truth: &StepModel,
    segment: usize,
    fraction: f64,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    let range = truth
        .segments()
        .nth(segment)
        .ok_or_else(|| FlsaError::Config(format!("truth has no segment {segment}")))?;
    if range.len() < 2 || reps == 0 {
        return Err(FlsaError::Config("need reps >= 1 and a segment of length >= 2".into()));
    }
    let fractions = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let y = generate_with(truth, &mut replicate_rng(seed, stream_id(0, rep)));
            let lambda = fraction * lambda_max(&y);
            let seg = certified_solve(&y, lambda, crate::DEFAULT_KKT_TOL, truth.n(), rep)?;
            let z = dual_variables(&y, &seg.expand())?.z;
            let interior = range.start + 1..range.end;
            let hits = interior
                .clone()
                .filter(|&t| (z[t] - lambda).abs() <= 1e-3 * lambda)
                .count();
            Ok(hits as f64 / interior.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(fractions.iter().sum::<f64>() / reps as f64)
}
