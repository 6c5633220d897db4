//! `dhym`: angle evaluation, fuzz suites, dHYM fields and weak geodesics.
//!
//! Reports go to stdout as `key=value` lines. Exit codes: 0 success,
//! 1 validation failure, 2 precondition or configuration error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dhym_core::geodesic::Mode;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "dhym", version, about = "Lagrangian angles, dHYM fields and weak geodesics on flat tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// RNG seed for the fuzz suites
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Directory for output files
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker cap for parallel sweeps
    #[arg(long)]
    pub threads: Option<usize>,
    /// Relative band for the singular set
    #[arg(long)]
    pub eps_singular: Option<f64>,
    /// Timing and progress on stderr
    #[arg(short, long)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Angles of a Hermitian matrix given inline (`"1 0; 0 1"`) or in a file
    Angles {
        matrix: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Seeded property suites
    Fuzz {
        #[arg(long)]
        suite: commands::Suite,
        #[arg(long)]
        trials: Option<usize>,
        /// Branch for the convexity suites
        #[arg(long, allow_hyphen_values = true)]
        c: Option<f64>,
        /// Complex dimension for the convexity suites
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Angle field, residual, Z and branch of one potential
    Dhym {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Weak geodesic between two potentials
    Geodesic {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mode: Option<Mode>,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Angles { matrix, config, common } => commands::angles(matrix.as_deref(), config.as_deref(), &common),
        Command::Fuzz { suite, trials, c, n, common } => commands::fuzz(suite, trials, c, n, &common),
        Command::Dhym { config, common } => commands::dhym(&config, &common),
        Command::Geodesic { config, mode, common } => commands::geodesic(&config, mode, &common),
    };
    match result {
        Ok(out) => {
            print!("{}", out.report);
            if out.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
