mod args;
mod checks;
mod cmd_approx;
mod cmd_bench;
mod cmd_recover;
mod cmd_sweep;
mod output;
mod source;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use args::{Cli, Command};

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("OTNS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("OTNS_THREADS must be a positive integer, got `{raw}`"))?;
    if n == 0 {
        anyhow::bail!("OTNS_THREADS must be a positive integer, got 0");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the worker pool")?;
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    configure_threads()?;
    match &cli.command {
        Command::Approx(a) => cmd_approx::run(a),
        Command::RatioSweep(a) => cmd_sweep::run(a),
        Command::Recover(a) => cmd_recover::run(a),
        Command::Bench(a) => cmd_bench::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: invariant checks failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
