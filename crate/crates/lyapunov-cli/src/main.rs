//! `lyapunov` — batch front door for the fixed-point solver.
//!
//! Reads a JSON experiment config, runs one of the commands, and emits
//! a JSON (or, for sweeps, CSV) report to stdout or `--output`. Human
//! progress lines go to stderr so reports stay machine-readable.
//!
//! Exit codes: 0 success, 2 config error, 3 no convergence,
//! 4 tree feasibility guard.

mod config;
mod report;
mod run;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::ExperimentConfig;
use report::{RunReport, Timings};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    NoConvergence(String),
    Feasibility(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::NoConvergence(m) => write!(f, "no convergence: {m}"),
            CliError::Feasibility(m) => write!(f, "feasibility: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::NoConvergence(_) => 3,
            CliError::Feasibility(_) => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Report format; csv is available for sweep only.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Overrides solver.seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Omit wall-clock timings (for byte-identical reports).
    #[arg(long)]
    no_timings: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Multi-start fixed-point solve for H and 𝓛.
    Solve(CommonArgs),
    /// Kernel bounds ω, Ω and their ratio.
    Bounds(CommonArgs),
    /// Bounds plus the uniqueness condition Ω/ω < c_max.
    CheckUniqueness(CommonArgs),
    /// Solve, then check Gibbs compatibility and consistency on the tree.
    VerifyConsistency {
        #[command(flatten)]
        common: CommonArgs,
        /// Use this expression in t as the boundary field instead of solving.
        #[arg(long, value_name = "EXPR")]
        field_override: Option<String>,
    },
    /// Bounds + solve per point of the config's sweep block.
    Sweep(CommonArgs),
}

#[derive(Debug, Parser)]
#[command(
    name = "lyapunov",
    version,
    about = "Fixed points of Lyapunov integral operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let (common, field_override, name) = match &cli.command {
        Command::Solve(c) => (c, None, "solve"),
        Command::Bounds(c) => (c, None, "bounds"),
        Command::CheckUniqueness(c) => (c, None, "check-uniqueness"),
        Command::VerifyConsistency {
            common,
            field_override,
        } => (common, field_override.as_deref(), "verify-consistency"),
        Command::Sweep(c) => (c, None, "sweep"),
    };

    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.solver.seed = seed;
    }

    let mut report = RunReport::new(name, cfg.clone());
    match &cli.command {
        Command::Solve(_) => {
            let solve = run::run_solve(&cfg)?;
            eprintln!(
                "solve: {}/{} starts converged, {} distinct, min residual {:e}",
                solve.converged_count, solve.starts, solve.distinct_count, solve.min_residual
            );
            report.solve = Some(solve);
        }
        Command::Bounds(_) => {
            let bounds = run::run_bounds(&cfg, false)?;
            eprintln!(
                "bounds: omega={:e} Omega={:e} ratio={}",
                bounds.omega, bounds.big_omega, bounds.ratio
            );
            report.bounds = Some(bounds);
        }
        Command::CheckUniqueness(_) => {
            let bounds = run::run_bounds(&cfg, true)?;
            eprintln!(
                "check-uniqueness: ratio={} c_max={:.10} satisfied={}",
                bounds.ratio,
                bounds.c_max.unwrap(),
                bounds.satisfied.unwrap()
            );
            report.bounds = Some(bounds);
        }
        Command::VerifyConsistency { .. } => {
            let verify = run::run_verify(&cfg, field_override)?;
            eprintln!(
                "verify-consistency: compatibility={:e} ({}) consistency={:e} ({})",
                verify.compatibility_residual,
                if verify.compatibility_pass {
                    "pass"
                } else {
                    "fail"
                },
                verify.consistency_residual,
                if verify.consistency_pass {
                    "pass"
                } else {
                    "fail"
                },
            );
            report.verify = Some(verify);
        }
        Command::Sweep(_) => {
            let rows = run::run_sweep(&cfg)?;
            eprintln!("sweep: {} points", rows.len());
            report.sweep = Some(rows);
        }
    }

    if !common.no_timings {
        report.timings = Some(Timings {
            total_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }

    let body = match common.format {
        Format::Json => report.to_json()?,
        Format::Csv => report.to_csv()?,
    };
    match &common.output {
        Some(path) => fs::write(path, body)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{body}"),
    }
    Ok(())
}
