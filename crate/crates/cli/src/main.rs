//! `vsew`: batch driver for axiom checks, correlators, sewing checks,
//! convergence scans and seminorms.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Outcome;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "vsew", version, about = "Heisenberg vertex algebra correlators and disk sewing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Vacuum, creation, translation and locality checks on all basis states.
    Axioms(Common),
    /// Exact rational correlator as canonical JSON.
    Correlator(Common),
    /// Shifted-correlator sewing identity over a disk grid (CSV).
    SewCheck(Common),
    /// Tail ratios of the diamond product fed into g_k over a disk grid (CSV).
    ConvergeScan(Common),
    /// Sampled seminorms of a stored correlator (CSV).
    Seminorm(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_weight: Option<u32>,
    #[arg(long)]
    tol: Option<f64>,
    /// Keep grid rows outside the valid-disk region (marked, not evaluated).
    #[arg(long)]
    include_invalid: bool,
}

fn run(cmd: Command) -> Result<(), Outcome> {
    let (Command::Axioms(c) | Command::Correlator(c) | Command::SewCheck(c) | Command::ConvergeScan(c) | Command::Seminorm(c)) = &cmd;
    let mut cfg = RunConfig::load(c.config.as_deref())?;
    commands::apply_flags(&mut cfg, c.seed, c.max_weight, c.tol);
    cfg.validate()?;
    let out = c.out.as_deref();
    match &cmd {
        Command::Axioms(_) => commands::axioms(&cfg, out),
        Command::Correlator(_) => commands::correlator(&cfg, out),
        Command::SewCheck(_) => commands::sew_check(&cfg, out, c.include_invalid),
        Command::ConvergeScan(_) => commands::converge_scan(&cfg, out, c.include_invalid),
        Command::Seminorm(_) => commands::seminorm(&cfg, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Outcome::Failed(msg)) => {
            eprintln!("vsew: {msg}");
            ExitCode::from(1)
        }
        Err(Outcome::Usage(msg)) => {
            eprintln!("vsew: {msg}");
            ExitCode::from(2)
        }
    }
}
