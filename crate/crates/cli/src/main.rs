//! `rydspec`: ensemble campaigns, spacing statistics, locator curves and
//! analytic tables driven by TOML run configurations.

mod commands;
mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use config::{Command, Overrides, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rydspec", version, about = "Spectral statistics of dipolar Rydberg-gas Hamiltonians")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Diagonalize an ensemble and write the pooled density of states.
    Spectra(Flags),
    /// As `spectra`, plus unfolded level-spacing histograms per window.
    Spacing(Flags),
    /// As `spacing`, plus the Poisson/Wigner-Dyson transition energies.
    Transition(Flags),
    /// Solve the self-consistent locator approximations on a λ grid.
    Locator(Flags),
    /// Tabulate an analytic density.
    TabulateAnalytic(Flags),
    /// Overlay DOS curves from several runs with matching parameters.
    Compare(Flags),
    /// Combine ensemble runs into one.
    Merge(Flags),
}

#[derive(Args)]
struct Flags {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (command, flags) = match cli.command {
        Cmd::Spectra(f) => (Command::Spectra, f),
        Cmd::Spacing(f) => (Command::Spacing, f),
        Cmd::Transition(f) => (Command::Transition, f),
        Cmd::Locator(f) => (Command::Locator, f),
        Cmd::TabulateAnalytic(f) => (Command::TabulateAnalytic, f),
        Cmd::Compare(f) => (Command::Compare, f),
        Cmd::Merge(f) => (Command::Merge, f),
    };
    let overrides = Overrides {
        seed: flags.seed,
        realizations: flags.realizations,
        workers: flags.workers,
        out: flags.out,
    };
    let result = RunConfig::load(&flags.config, command, &overrides).and_then(|cfg| commands::execute(command, &cfg));
    match result {
        Ok(summary) => {
            log::info!("done: {} (config hash {})", command.name(), summary.get("config_hash").unwrap_or(""));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
