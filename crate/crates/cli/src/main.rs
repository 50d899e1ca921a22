mod commands;
mod config;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use config::{thread_cap, Command, Overrides, RunConfig};

/// Studies for variable-order fractional diffusion: convergence tables,
/// TLR memory and rank reports, factorization benchmarks and solves.
#[derive(Parser)]
#[command(name = "fradi", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Successive-grid convergence table.
    Converge(Overrides),
    /// Convergence of the flux form with and without the singular correction.
    ConvergeNonsym(Overrides),
    /// TLR memory and rank statistics per grid.
    TlrReport(Overrides),
    /// Build, factor and solve timings (median of 3).
    FactorBench(Overrides),
    /// Solution on the first grid as `x,y,u` rows.
    Solve(Overrides),
}

enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let (command, flags) = match cli.command {
        Cmd::Converge(o) => (Command::Converge, o),
        Cmd::ConvergeNonsym(o) => (Command::ConvergeNonsym, o),
        Cmd::TlrReport(o) => (Command::TlrReport, o),
        Cmd::FactorBench(o) => (Command::FactorBench, o),
        Cmd::Solve(o) => (Command::Solve, o),
    };
    if let Some(n) = thread_cap().map_err(Failure::Config)? {
        fradi::par::init_threads(n);
    }
    let cfg = RunConfig::resolve(command, flags).map_err(Failure::Config)?;
    let table = commands::run(&cfg).map_err(Failure::Run)?;
    emit(&cfg, &table).map_err(Failure::Run)
}

fn emit(cfg: &RunConfig, table: &commands::Table) -> Result<()> {
    match &cfg.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            let path = dir.join(format!("{}.csv", cfg.command.name()));
            let file = std::fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
            table.write(std::io::BufWriter::new(file))
        }
        None => table.write(std::io::stdout().lock()),
    }
}

fn one_line(e: &anyhow::Error) -> String {
    format!("{e:#}").replace('\n', " ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("fradi: configuration error: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("fradi: configuration error: {}", one_line(&e));
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("fradi: {}", one_line(&e));
            ExitCode::FAILURE
        }
    }
}
