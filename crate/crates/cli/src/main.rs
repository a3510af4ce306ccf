//! `ouc`: batch front door for the barrier-consumption solver.
//!
//! Subcommands: `solve-barrier`, `value-surface`, `paths`, `verify`, `scan`.
//! One JSON config document drives a run; `--seed` and `--out` override it.
//! Exit codes: 0 success, 1 validation error (bad flags, config, or model
//! parameters), 2 numerical failure, 3 verification failure.

mod commands;
mod config;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ou_consumption::Error;

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "ouc",
    version,
    about = "Optimal barrier consumption under an Ornstein-Uhlenbeck short rate"
)]
struct Cli {
    /// JSON run configuration; built-in defaults (the worked example
    /// parameters) apply to every field the file omits.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override the Monte Carlo seed from the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Directory for CSV and JSON outputs; created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve both candidate pasting roots and let a policy scan arbitrate.
    SolveBarrier,
    /// Export the value surface v(r, x) with branch labels as CSV.
    ValueSurface,
    /// Simulate (r, U) sample paths from each configured starting rate.
    Paths,
    /// Run the release check battery, one pass/fail line per criterion.
    Verify,
    /// Rank a barrier grid by simulated policy value on common randomness.
    Scan,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Keep --help/--version on the conventional success path; real
            // parse errors are caller mistakes, i.e. validation failures.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let mut cfg = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(cfg) => cfg,
            Err(e) => return exit_for(&e),
        },
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.mc.seed = seed;
    }
    if let Err(e) = fs::create_dir_all(&cli.out) {
        eprintln!("error: cannot create output directory {}: {e}", cli.out.display());
        return ExitCode::from(2);
    }

    let result = match cli.command {
        Command::SolveBarrier => commands::solve_barrier(&cfg, &cli.out),
        Command::ValueSurface => commands::value_surface(&cfg, &cli.out),
        Command::Paths => commands::paths(&cfg, &cli.out),
        Command::Verify => {
            return match commands::verify(&cfg, &cli.out) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::from(3),
                Err(e) => exit_for(&e),
            }
        }
        Command::Scan => commands::scan(&cfg, &cli.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => exit_for(&e),
    }
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Validation(_) => ExitCode::from(1),
        _ => ExitCode::from(2),
    }
}
