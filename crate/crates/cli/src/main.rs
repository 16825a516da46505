//! `infosell`: solve, certify, sweep and simulate information-selling
//! mechanisms described by TOML scenario files.
//!
//! Exit codes: 0 success, 1 certification failure, 2 input error. Input errors
//! print a JSON object `{"error": {"kind", "message"}}` on stderr.

mod check;
mod error;
mod mc;
mod output;
mod scenario;
mod simulate;
mod solve;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{CliError, CliResult};
use crate::output::{emit, to_json};

#[derive(Debug, Parser)]
#[command(name = "infosell", version, about = "Optimal Gaussian information mechanisms for LQG games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the optimal mechanism and its payment schedule.
    Solve {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Certify a mechanism: obedience, feasibility, truthfulness, IC and IR.
    Check {
        /// Solve output, a six-moment symmetric mechanism, or `{mu, K}`.
        mechanism: PathBuf,
        /// Required unless the mechanism file is solve output.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Compare against the brute-force optimum.
        #[arg(long)]
        oracle: bool,
        /// Monte Carlo deviation test with this many samples.
        #[arg(long, value_name = "SAMPLES")]
        mc: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve over a parameter grid.
    Sweep {
        scenario: PathBuf,
        /// `name=start:stop:count` or `name=v1,v2,...`; name is one of
        /// n, r, s, t, var_theta, var_omega. Repeatable, first is outermost.
        #[arg(long = "axis", value_name = "SPEC")]
        axes: Vec<String>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo welfare, payments and deviation gains at the optimum.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Side of the affine deviation grid.
        #[arg(long, default_value_t = 5)]
        deviations: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Prints failures to stderr and maps them to the exit code.
fn verdict(failures: &[String]) -> ExitCode {
    for f in failures {
        eprintln!("failure: {f}");
    }
    if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cmd: Command) -> CliResult<ExitCode> {
    match cmd {
        Command::Solve { scenario, out, tol } => {
            let mut sc = scenario::load(&scenario)?;
            sc.override_options(tol, None, None)?;
            let res = solve::run(&sc)?;
            emit(&to_json(&res)?, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { mechanism, scenario, oracle, mc, seed, tol, out } => {
            let args = check::CheckArgs { mechanism: &mechanism, scenario: scenario.as_deref(), oracle, mc, seed, tol };
            let res = check::run(&args)?;
            emit(&to_json(&res)?, out.as_deref())?;
            Ok(verdict(&res.failures()))
        }
        Command::Sweep { scenario, axes, format, out } => {
            let sc = scenario::load(&scenario)?;
            let axes = axes.iter().map(|a| a.parse()).collect::<CliResult<Vec<sweep::Axis>>>()?;
            let rows = sweep::run(&sc, &axes);
            let text = match format {
                Format::Csv => sweep::to_csv(&rows)?,
                Format::Json => to_json(&sweep::to_json(&rows))?,
            };
            emit(&text, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { scenario, samples, seed, deviations, out } => {
            if deviations == 0 {
                return Err(CliError::Usage("--deviations must be at least 1".into()));
            }
            let mut sc = scenario::load(&scenario)?;
            sc.override_options(None, samples, seed)?;
            let res = simulate::run(&sc, deviations)?;
            emit(&to_json(&res)?, out.as_deref())?;
            let failures: Vec<String> = res
                .profitable()
                .map(|d| format!("profitable deviation kappa={} offset={} report_shift={}", d.kappa, d.offset, d.report_shift))
                .collect();
            Ok(verdict(&failures))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(2)
        }
    }
}
