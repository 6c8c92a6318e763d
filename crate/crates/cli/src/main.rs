//! `varboot` command-line interface.

mod commands;
mod config;
mod error;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Output;
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "varboot", version, about = "Conditional VaR estimation and bootstrap intervals for GARCH-type models")]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "VAR_BOOT_THREADS")]
    threads: Option<usize>,

    /// Write the output here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    /// TOML or JSON config file; flags override its values.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a return path and write it as `date,return` CSV.
    Simulate(commands::SimulateOpts),
    /// Fit the two-step estimator to a series.
    Fit(commands::FitOpts),
    /// Bootstrap EP, RT and SY intervals for a series.
    Bootstrap(commands::BootstrapOpts),
    /// Run a Monte Carlo coverage experiment.
    Mc(commands::McOpts),
    /// Rolling-window VaR and intervals.
    Rolling(commands::RollingOpts),
    /// Tabulate the population quantities of the asymptotic covariance.
    Zeta(commands::ZetaOpts),
}

fn run(cli: Cli) -> CliResult<Output> {
    let file = cli.config.as_deref();
    match cli.command {
        Command::Simulate(o) => commands::simulate(o.overlay(config::load(file)?)),
        Command::Fit(o) => commands::fit(o.overlay(config::load(file)?)),
        Command::Bootstrap(o) => commands::bootstrap(o.overlay(config::load(file)?)),
        Command::Mc(o) => commands::mc(o.overlay(config::load(file)?)),
        Command::Rolling(o) => commands::rolling(o.overlay(config::load(file)?)),
        Command::Zeta(o) => commands::zeta(o.overlay(config::load(file)?)),
    }
}

fn emit(out: Output, path: Option<&PathBuf>) -> io::Result<()> {
    let text = match out {
        Output::Json(s) | Output::Text(s) => s,
    };
    match path {
        Some(p) => fs::write(p, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads.filter(|n| *n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    let output = cli.output.clone();
    match run(cli) {
        Ok(out) => match emit(out, output.as_ref()) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error (output): {e}");
                ExitCode::from(6)
            }
        },
        Err(e) => {
            eprintln!("error ({}): {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
