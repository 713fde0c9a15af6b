//! `layered442`: state generation, count simulation, estimation, witnesses
//! and key rates for the (4,4,2) layered state.
//!
//! Exit codes: 0 success, 1 certification negative (output still written),
//! 2 usage or I/O error, 3 internal consistency failure.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{
    ConsistencyError, CountSource, FmaxArgs, QkdArgs, Status, SubspaceArgs, WitnessArgs,
};
use config::{GlobalArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "layered442", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the state from the optical circuit and report its rank vector
    GenState,
    /// Simulate Poissonian counts for every measurement setting
    SimulateCounts,
    /// Estimate density-matrix elements with Monte Carlo errors
    Estimate(CountSource),
    /// Fidelity witness against the (4,3,2) bound
    Witness(WitnessArgs),
    /// Two-level GHZ fidelities and GME decisions
    Subspace(SubspaceArgs),
    /// Per-layer QBERs and key rates
    Qkd(QkdArgs),
    /// Maximal overlap for a rank-vector class
    Fmax(FmaxArgs),
}

fn run(cli: &Cli) -> anyhow::Result<Status> {
    let cfg = RunConfig::resolve(&cli.global)?;
    match &cli.command {
        Command::GenState => commands::gen_state(&cfg),
        Command::SimulateCounts => commands::simulate(&cfg),
        Command::Estimate(source) => commands::estimate(&cfg, source),
        Command::Witness(args) => commands::witness(&cfg, args),
        Command::Subspace(args) => commands::subspace(&cfg, args),
        Command::Qkd(args) => commands::qkd(&cfg, args),
        Command::Fmax(args) => commands::fmax(&cfg, args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::NotCertified) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConsistencyError>().is_some() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
