//! `dcim` — drive the macro simulator from the shell.
//!
//! Subcommands: characterize (adder-tree error/cost tables), map (layer
//! allocation plans), infer (CNN/SNN inference through the macro),
//! montecarlo (variability sweeps), report (analytical cost estimates).
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 property
//! violation (Monte Carlo failures found).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "dcim", version, about = "ReRAM digital compute-in-memory macro simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Simulator configuration JSON (macro geometry, device, sense, cost).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; DCIM_OUT_DIR overrides the default "out".
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Characterize adder-tree presets: error metrics and fabric cost.
    Characterize(commands::characterize::CharacterizeArgs),
    /// Prune a network and map it onto banks.
    Map(commands::map::MapArgs),
    /// Run CNN or spiking inference through the simulated macro.
    Infer(commands::infer::InferArgs),
    /// Monte Carlo read/MAC robustness sweep; exits 3 on failures.
    Montecarlo(commands::montecarlo::MontecarloArgs),
    /// Analytical latency/throughput/energy estimate.
    Report(commands::report::ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Characterize(args) => commands::characterize::run(args),
        Command::Map(args) => commands::map::run(args),
        Command::Infer(args) => commands::infer::run(args),
        Command::Montecarlo(args) => commands::montecarlo::run(args),
        Command::Report(args) => commands::report::run(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

/// Resolves the output directory: flag, then DCIM_OUT_DIR, then "out".
pub(crate) fn output_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os("DCIM_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}
