//! `bigjump`: reproducible experiment driver.
//!
//! Exit codes: 0 success, 1 `--assert` tolerance violated (or replay
//! mismatch), 2 usage error, 3 runtime failure.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{CondLawArgs, DistArgs, HrvPpArgs, MonitorArgs, ResidualTailArgs, SimulateArgs};
use crate::output::Failure;

#[derive(Debug, Parser)]
#[command(name = "bigjump", version, about = "Heavy-tailed marked point process experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample one marked pattern and its risk path.
    Simulate(SimulateArgs),
    /// Convergence of n^(k+1) P(k+1 rescaled marks exceed r) to its limit.
    HrvPp(HrvPpArgs),
    /// Tail of the residual risk after ceding the k largest claims.
    ResidualTail(ResidualTailArgs),
    /// Conditional growth of the residual risk between two monitoring times.
    Monitor(MonitorArgs),
    /// Paths with a large residual against the conditional limit law.
    CondLaw(CondLawArgs),
    /// Distances of a pure-jump path to the k-jump cones.
    Dist(DistArgs),
    /// Re-run a manifest and compare output digests.
    Replay(ReplayArgs),
}

#[derive(Debug, clap::Args)]
struct ReplayArgs {
    /// manifest.json written by an earlier run.
    #[arg(long)]
    manifest: PathBuf,
    /// Directory for the replayed outputs.
    #[arg(long)]
    out: PathBuf,
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Simulate(a) => output::execute(a.common.clone(), "simulate", a),
        Command::HrvPp(a) => output::execute(a.common.clone(), "hrv-pp", a),
        Command::ResidualTail(a) => output::execute(a.common.clone(), "residual-tail", a),
        Command::Monitor(a) => output::execute(a.common.clone(), "monitor", a),
        Command::CondLaw(a) => output::execute(a.common.clone(), "cond-law", a),
        Command::Dist(a) => output::execute(a.common.clone(), "dist", a),
        Command::Replay(a) => output::replay(&a.manifest, &a.out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(failure) => {
            eprintln!("error: {:#}", failure.error());
            ExitCode::from(failure.code())
        }
    }
}
