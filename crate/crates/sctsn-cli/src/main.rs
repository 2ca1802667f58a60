//! Experiment harness: single runs, parameter sweeps, offline learner
//! tests, standalone optimization and input validation.

mod commands;
mod experiment;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Exit codes: 0 success, 1 validation failure, 2 infeasible optimization,
/// 3 internal error.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Infeasible(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Infeasible(m) | CliError::Internal(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "sctsn",
    about = "Self-configuring TSN simulator and optimizer harness",
    version
)]
struct Cli {
    /// Output directory (falls back to $SCTSN_OUT, then ./results).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its metric reports.
    Run {
        scenario: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario mode.
        #[arg(long, value_parser = ["sctsn", "srp"])]
        mode: Option<String>,
        /// Override the candidate-path count.
        #[arg(long)]
        k_paths: Option<usize>,
        /// Also write the per-frame trace CSV.
        #[arg(long)]
        trace: bool,
    },
    /// Run an experiment grid and write per-cell and aggregated CSVs.
    Sweep { experiment: PathBuf },
    /// Estimate periods of offline arrival traces.
    #[command(name = "learn-test")]
    LearnTest {
        traces: Vec<PathBuf>,
        /// Restrict estimation to the most recent N arrivals.
        #[arg(long)]
        window: Option<usize>,
    },
    /// Solve an optimization instance file.
    Solve {
        instance: PathBuf,
        /// Cross-check against the exhaustive reference solver.
        #[arg(long)]
        brute: bool,
    },
    /// Validate a topology (.topo), scenario (.scn) or instance (.tsi) file.
    Validate { file: PathBuf },
}

fn out_dir(cli_out: &Option<PathBuf>) -> PathBuf {
    cli_out
        .clone()
        .or_else(|| std::env::var_os("SCTSN_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = out_dir(&cli.out);
    let result = match cli.command {
        Command::Run {
            scenario,
            seed,
            mode,
            k_paths,
            trace,
        } => commands::cmd_run(&scenario, seed, mode.as_deref(), k_paths, trace, &out),
        Command::Sweep { experiment } => commands::cmd_sweep(&experiment, &out),
        Command::LearnTest { traces, window } => commands::cmd_learn_test(&traces, window, &out),
        Command::Solve { instance, brute } => commands::cmd_solve(&instance, brute, &out),
        Command::Validate { file } => commands::cmd_validate(&file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
