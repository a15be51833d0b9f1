// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flsa_core::{Sign, DEFAULT_KKT_TOL};

use crate::commands::{self, DenoiseOptions, ExperimentOptions, Format, LambdaChoice, Outcome};
use crate::error::Result;

/// Exact 1-D fused lasso signal approximation with optimality certificates.
///
/// Exit codes: 0 success, 1 input error, 2 certificate or convergence
/// failure, 3 configuration error.
#[derive(Debug, Parser)]
#[command(name = "flsa", version)]
struct Cli {
    /// Write the result to this file instead of standard output.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct LambdaArgs {
    /// Penalty λ.
    #[arg(long)]
    lambda: Option<f64>,
    /// Penalty as a fraction of λ_max of the input.
    #[arg(long)]
    lambda_frac: Option<f64>,
}

impl LambdaArgs {
    fn choice(&self) -> LambdaChoice {
        match (self.lambda, self.lambda_frac) {
            (Some(v), _) => LambdaChoice::Value(v),
            (None, Some(f)) => LambdaChoice::Fraction(f),
            (None, None) => unreachable!("clap requires one of the two"),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Piecewise-constant fit of a signal, certified by its KKT conditions.
    Denoise {
        /// CSV file with one value per line, or `-` for standard input.
        input: PathBuf,
        #[command(flatten)]
        lambda: LambdaArgs,
        /// Replace penalized levels by plain segment averages.
        #[arg(long)]
        polish: bool,
        /// Attach the N + 1 dual values.
        #[arg(long)]
        dual: bool,
        /// KKT tolerance.
        #[arg(long, default_value_t = DEFAULT_KKT_TOL)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Smallest λ that fuses the whole signal into one segment.
    LambdaMax { input: PathBuf },
    /// All breakpoints of the solution path in λ.
    Path {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Variance change points: the fit of the squared signal.
    Variance {
        input: PathBuf,
        /// `--lambda-frac` refers to λ_max of the squared signal.
        #[command(flatten)]
        lambda: LambdaArgs,
        #[arg(long, default_value_t = DEFAULT_KKT_TOL)]
        tol: f64,
    },
    /// ℓ1 trend filtering (piecewise-linear fit).
    Trend {
        input: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = DEFAULT_KKT_TOL)]
        tol: f64,
    },
    /// Irrepresentable-condition profile of the lasso form as CSV.
    Irrep {
        #[arg(long)]
        n: usize,
        /// Increasing knots in 1..N, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        knots: Vec<usize>,
        /// One sign per knot: +, -, 1, -1, up or down.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true,
              value_parser = commands::parse_sign)]
        signs: Vec<Sign>,
    },
    /// Draw a noisy step signal as CSV.
    Simulate {
        #[arg(long)]
        n: usize,
        /// 0-based change points, comma separated.
        #[arg(long, value_delimiter = ',')]
        change_points: Vec<usize>,
        /// Segment levels, comma separated.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        levels: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        noise_sd: f64,
        #[arg(long)]
        seed: u64,
    },
    /// Run a Monte-Carlo experiment from a TOML config and print a JSON report.
    Experiment {
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Worker threads; the report does not depend on this.
        #[arg(long)]
        threads: Option<usize>,
        /// Also judge the failure trend over N (alternating-sign truths only).
        #[arg(long)]
        sweep: bool,
        /// Leave per-replicate records out of the report.
        #[arg(long)]
        no_replicates: bool,
    },
}

fn dispatch(command: Command) -> Result<Outcome> {
    match command {
        Command::Denoise {
            input,
            lambda,
            polish,
            dual,
            tol,
            format,
        } => commands::denoise(
            &input,
            &DenoiseOptions {
                lambda: lambda.choice(),
                polish,
                dual,
                tol,
                format,
            },
        ),
        Command::LambdaMax { input } => commands::lambda_max_cmd(&input),
        Command::Path { input, format } => commands::path(&input, format),
        Command::Variance { input, lambda, tol } => commands::variance(&input, lambda.choice(), tol),
        Command::Trend { input, lambda, tol } => commands::trend(&input, lambda, tol),
        Command::Irrep { n, knots, signs } => commands::irrep(n, &knots, &signs),
        Command::Simulate {
            n,
            change_points,
            levels,
            noise_sd,
            seed,
        } => commands::simulate(n, change_points, levels, noise_sd, seed),
        Command::Experiment {
            config,
            seed,
            threads,
            sweep,
            no_replicates,
        } => commands::experiment(
            &config,
            &ExperimentOptions {
                seed,
                threads,
                sweep,
                replicates: !no_replicates,
            },
        ),
    }
}

fn emit(output: Option<&PathBuf>, body: &str) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, body)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let outcome = dispatch(cli.command)?;
    emit(cli.output.as_ref(), &outcome.body)?;
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Parses the process arguments, runs the command and maps the outcome to
/// an exit code.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("flsa: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::CliError;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Input(String::new()).exit_code(), 1);
        assert_eq!(CliError::Certificate(String::new()).exit_code(), 2);
        assert_eq!(CliError::Config(String::new()).exit_code(), 3);
    }
}
