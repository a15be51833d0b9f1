// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt::Write as _;
use std::path::Path;

use flsa_core::experiments::{generate, run_consistency_sweep, run_experiment, ExperimentConfig};
use flsa_core::{
    dual_variables, irrep_profile, lambda_max, polish, solve, trace_path, trend_solve,
    validate_nesting, variance_solve, verify_kkt, KktReport, Sign, Signal, StepModel,
};
use serde::Serialize;

use crate::document::{
    ExperimentDocument, PathDocument, Provenance, SegmentationDocument, TrendDocument,
    SCHEMA_VERSION,
};
use crate::error::{CliError, Result};
use crate::input::{digest, load_signal, read_bytes};

/// Text to emit, plus an error to report after emitting it.
pub struct Outcome {
    pub body: String,
    pub failure: Option<CliError>,
}

impl Outcome {
    fn ok(body: String) -> Self {
        Self { body, failure: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// `λ` given directly or as a fraction of a reference `λ_max`.
#[derive(Clone, Copy, Debug)]
pub enum LambdaChoice {
    Value(f64),
    Fraction(f64),
}

impl LambdaChoice {
    fn resolve(self, reference: f64) -> Result<f64> {
        let lambda = match self {
            LambdaChoice::Value(v) => v,
            LambdaChoice::Fraction(f) => {
                if !(f >= 0.0 && f.is_finite()) {
                    return Err(CliError::Input(format!(
                        "--lambda-frac must be finite and >= 0, got {f}"
                    )));
                }
                f * reference
            }
        };
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(CliError::Input(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(lambda)
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Input(format!("cannot serialize output: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn values_csv(header: &str, values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 20);
    out.push_str(header);
    out.push('\n');
    for v in values {
        let _ = writeln!(out, "{v}");
    }
    out
}

fn kkt_failure(report: &KktReport) -> CliError {
    CliError::Certificate(format!(
        "KKT conditions violated: box residual {:e}, mismatched change points {:?}, \
         stationarity residual {:e} (tolerance {:e})",
        report.box_residual, report.active_set_mismatch, report.stationarity_residual, report.tolerance
    ))
}

pub struct DenoiseOptions {
    pub lambda: LambdaChoice,
    pub polish: bool,
    pub dual: bool,
    pub tol: f64,
    pub format: Format,
}

pub fn denoise(input: &Path, opts: &DenoiseOptions) -> Result<Outcome> {
    let loaded = load_signal(input)?;
    let y = &loaded.signal;
    let lambda = opts.lambda.resolve(lambda_max(y))?;
    let seg = solve(y, lambda)?;
    let report = verify_kkt(y, &seg, lambda, opts.tol);
    let shown = if opts.polish { polish(y, &seg)? } else { seg.clone() };
    let body = match opts.format {
        Format::Csv => values_csv("fitted", &shown.expand()),
        Format::Json => {
            let provenance = Provenance::new("denoise", None, Some(loaded.digest));
            let mut doc = SegmentationDocument::new(&shown, opts.polish, provenance);
            if opts.dual {
                doc.dual = Some(dual_variables(y, &seg.expand())?.z);
            }
            doc.kkt = Some(report.clone());
            json(&doc)?
        }
    };
    Ok(Outcome {
        body,
        failure: (!report.feasible).then(|| kkt_failure(&report)),
    })
}

pub fn lambda_max_cmd(input: &Path) -> Result<Outcome> {
    let loaded = load_signal(input)?;
    Ok(Outcome::ok(format!("{}\n", lambda_max(&loaded.signal))))
}

pub fn path(input: &Path, format: Format) -> Result<Outcome> {
    let loaded = load_signal(input)?;
    let path = trace_path(&loaded.signal);
    let nesting = validate_nesting(&path);
    let body = match format {
        Format::Json => json(&PathDocument::new(
            &path,
            nesting.holds,
            Provenance::new("path", None, Some(loaded.digest)),
        ))?,
        Format::Csv => {
            let mut out = String::from("lambda,change_points\n");
            for e in path.events() {
                let cps: Vec<String> =
                    e.segmentation.change_points().iter().map(|c| c.to_string()).collect();
                let _ = writeln!(out, "{},{}", e.lambda, cps.join(" "));
            }
            out
        }
    };
    let failure = (!nesting.holds).then(|| {
        CliError::Certificate(format!("path violates nesting: {:?}", nesting.first_violation))
    });
    Ok(Outcome { body, failure })
}

pub fn variance(input: &Path, lambda: LambdaChoice, tol: f64) -> Result<Outcome> {
    let loaded = load_signal(input)?;
    let squared = loaded.signal.squared()?;
    let lambda = lambda.resolve(lambda_max(&squared))?;
    let fit = variance_solve(&loaded.signal, lambda)?;
    let report = verify_kkt(&squared, fit.segmentation(), lambda, tol);
    let mut doc = SegmentationDocument::new(
        fit.segmentation(),
        false,
        Provenance::new("variance", None, Some(loaded.digest)),
    );
    doc.kkt = Some(report.clone());
    Ok(Outcome {
        body: json(&doc)?,
        failure: (!report.feasible).then(|| kkt_failure(&report)),
    })
}

pub fn trend(input: &Path, lambda: f64, tol: f64) -> Result<Outcome> {
    let loaded = load_signal(input)?;
    let fit = trend_solve(&loaded.signal, lambda, tol)?;
    let doc = TrendDocument {
        schema_version: SCHEMA_VERSION,
        n: loaded.signal.len(),
        lambda,
        fitted: fit.fitted,
        kink_points: fit.kink_points,
        dual: fit.dual,
        kkt: fit.kkt,
        provenance: Provenance::new("trend", None, Some(loaded.digest)),
    };
    Ok(Outcome::ok(json(&doc)?))
}

pub fn parse_sign(s: &str) -> std::result::Result<Sign, String> {
    match s.trim() {
        "+" | "1" | "+1" | "up" => Ok(Sign::Up),
        "-" | "-1" | "down" => Ok(Sign::Down),
        other => Err(format!("expected a sign (+, -, 1, -1, up, down), got {other:?}")),
    }
}

pub fn irrep(n: usize, knots: &[usize], signs: &[Sign]) -> Result<Outcome> {
    let mut knots_sorted = knots.to_vec();
    knots_sorted.sort_unstable();
    if knots_sorted != knots {
        return Err(CliError::Input("knots must be given in increasing order".into()));
    }
    let profile = irrep_profile(n, knots, signs)?;
    let mut out = String::from("t,value,knot\n");
    for t in 1..n {
        let is_knot = knots.binary_search(&t).is_ok();
        let _ = writeln!(out, "{t},{},{}", profile.value_at(t), is_knot as u8);
    }
    Ok(Outcome::ok(out))
}

pub fn simulate(
    n: usize,
    change_points: Vec<usize>,
    levels: Vec<f64>,
    noise_sd: f64,
    seed: u64,
) -> Result<Outcome> {
    let truth = StepModel::new(n, change_points, levels, noise_sd)?;
    let y: Signal = generate(&truth, seed);
    Ok(Outcome::ok(values_csv("y", y.values())))
}

pub struct ExperimentOptions {
    pub seed: u64,
    pub threads: Option<usize>,
    pub sweep: bool,
    pub replicates: bool,
}

/// Parses a TOML experiment config, taking the seed from the command line.
pub fn load_config(text: &str, seed: u64) -> Result<ExperimentConfig> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    match table.get("seed") {
        None => {
            let seed = i64::try_from(seed)
                .map_err(|_| CliError::Config(format!("seed {seed} does not fit a TOML integer")))?;
            table.insert("seed".into(), toml::Value::Integer(seed));
        }
        Some(toml::Value::Integer(s)) if u64::try_from(*s).ok() == Some(seed) => {}
        Some(other) => {
            return Err(CliError::Config(format!(
                "config sets seed = {other} but --seed is {seed}; remove one of them"
            )))
        }
    }
    let cfg: ExperimentConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn experiment(config: &Path, opts: &ExperimentOptions) -> Result<Outcome> {
    let bytes = read_bytes(config)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| CliError::Config(format!("{} is not UTF-8: {e}", config.display())))?;
    let cfg = load_config(text, opts.seed)?;
    let run = || if opts.sweep { run_consistency_sweep(&cfg) } else { run_experiment(&cfg) };
    let mut report = match opts.threads {
        None => run()?,
        Some(0) => return Err(CliError::Config("--threads must be at least 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(run)?,
    };
    if !opts.replicates {
        report.replicates.clear();
    }
    let doc = ExperimentDocument {
        schema_version: SCHEMA_VERSION,
        report,
        provenance: Provenance::new("experiment", Some(opts.seed), Some(digest(&bytes))),
    };
    Ok(Outcome::ok(json(&doc)?))
}
