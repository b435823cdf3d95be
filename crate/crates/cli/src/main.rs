//! `bcanneal` experiment runner.
//!
//! Exit codes: 0 success, 1 output I/O error, 2 configuration error,
//! 3 numerical failure, 4 verification failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::config::{Config, Overrides};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "bcanneal", version, about = "Boundary-cancellation quantum annealing simulator")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Gap curves along the physical schedule (gaps.csv).
    Spectrum {
        /// Number of gaps Δ_{n,n+1} to record.
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
    /// Control schedule construction.
    Schedule {
        #[command(subcommand)]
        action: ScheduleAction,
    },
    /// Ground-state transition rates W_0n(s) (rates.csv).
    Rates {
        /// Number of excited levels n_A.
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
    /// Freezing point s0 for every anneal time (freeze.csv).
    Freeze {
        #[arg(long, default_value_t = 1)]
        levels: usize,
    },
    /// Single anneal with trajectory output (trajectory.csv).
    Evolve,
    /// Anneal over every (k, s_BC, t_f) and fit the scaling (sweep.csv, fit.csv).
    Sweep,
    /// Fit a sweep CSV; repeated anneal times are bootstrap replicates (fit.csv).
    Fit {
        #[arg(long = "in", value_name = "CSV")]
        input: PathBuf,
    },
    /// Built-in verification suites: appB, appC, appD, props (all by default).
    Verify { suites: Vec<String> },
}

#[derive(Debug, Subcommand)]
enum ScheduleAction {
    /// Export the control schedule knots (schedule.csv).
    Build,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Context::new(Config::resolve(&cli.overrides)?)?;
    if let Some(jobs) = ctx.config.output.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match &cli.command {
        Command::Spectrum { levels, points } => commands::spectrum(&ctx, *levels, *points),
        Command::Schedule { action: ScheduleAction::Build } => commands::schedule_build(&ctx),
        Command::Rates { levels, points } => commands::rates(&ctx, *levels, *points),
        Command::Freeze { levels } => commands::freeze(&ctx, *levels),
        Command::Evolve => commands::evolve(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::Fit { input } => commands::fit(&ctx, input),
        Command::Verify { suites } => commands::verify(suites),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
