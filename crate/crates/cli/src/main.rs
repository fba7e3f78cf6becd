//! `sdpolicy`: solve, estimate and optimize policy rules, rank them by
//! stochastic dominance, analyse portfolios and run the attestation demo.
//!
//! Every command writes its results under `--out` and prints a JSON summary
//! on stdout. Exit status: 0 success, 1 usage or input error, 2 numerical
//! infeasibility, 3 protocol rejection.

mod cmd;
mod config;
mod context;
mod error;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use context::Context;

#[derive(Debug, Parser)]
#[command(name = "sdpolicy", version, about = "Rank monetary-policy rules by stochastic dominance")]
struct Cli {
    /// Master seed for every random stream (default 42).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a model under one rule: transition matrices, determinacy, IRFs.
    Solve(cmd::solve::Args),
    /// Random-walk Metropolis posterior from observed or simulated data.
    Estimate(cmd::estimate::Args),
    /// Minimised welfare loss of one rule across prior draws.
    Optimize(cmd::optimize::Args),
    /// Optimise several rules on common draws and rank their loss distributions.
    Rank(cmd::rank::Args),
    /// Stochastic-dominance efficiency of a portfolio.
    Portfolio(cmd::portfolio::Args),
    /// Omega curve, VaR and CVaR of a return series.
    Omega(cmd::omega::Args),
    /// Signed data, committed policy outputs and a verified ledger.
    ProtocolDemo(cmd::protocol::Args),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { error::EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(error::exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let ctx = Context::new(cli.seed, cli.out, cli.config.as_deref())?;
    let summary = match cli.command {
        Command::Solve(a) => cmd::solve::run(&ctx, a),
        Command::Estimate(a) => cmd::estimate::run(&ctx, a),
        Command::Optimize(a) => cmd::optimize::run(&ctx, a),
        Command::Rank(a) => cmd::rank::run(&ctx, a),
        Command::Portfolio(a) => cmd::portfolio::run(&ctx, a),
        Command::Omega(a) => cmd::omega::run(&ctx, a),
        Command::ProtocolDemo(a) => cmd::protocol::run(&ctx, a),
    }?;
    print_summary(&summary)
}

/// Writes to stdout, treating a closed pipe as success.
pub fn print_summary(summary: &serde_json::Value) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{}", serde_json::to_string_pretty(summary)?) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}
