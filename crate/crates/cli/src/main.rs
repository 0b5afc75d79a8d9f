//! `gmwb`: batch pricing, hedging and verification runs from an INI configuration.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::{Breach, Pipeline};
use config::{ConfigError, RunConfig};

#[derive(Parser)]
#[command(
    name = "gmwb",
    version,
    about = "Static hedges and prices of withdrawal guarantees"
)]
struct Cli {
    /// Run configuration (INI).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides [output] directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Monte-Carlo seed; overrides [numerics] seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Pipeline::Weights)]
    pipeline: Pipeline,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Value the guarantee; writes price_<pipeline>.json.
    Price,
    /// Put weights of every period; writes weights_t<t>.csv.
    Weights,
    /// Hedge portfolio bought at one roll date; writes hedge_t<t>.csv.
    Hedge {
        #[arg(long, default_value_t = 0)]
        t: usize,
        /// Fund value at the roll date (defaults to the initial capital).
        #[arg(long)]
        fund: Option<f64>,
        /// Current withdrawal level of a roll-up contract (defaults to the withdrawal).
        #[arg(long)]
        level: Option<f64>,
    },
    /// Forward vega, volga and net volga by moneyness; writes volga.csv.
    Sensitivities {
        #[arg(long, value_delimiter = ',')]
        moneyness: Vec<f64>,
    },
    /// Run the invariant checks; exits 2 if any fails.
    Verify,
    /// Static values against Monte Carlo per (maturity, moneyness).
    CompareMc,
}

fn run(cli: Cli) -> Result<()> {
    let path = cli
        .config
        .ok_or_else(|| ConfigError("--config <path> is required".into()))?;
    let mut cfg = RunConfig::load(&path)?;
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(seed) = cli.seed {
        cfg.mc.seed = seed;
    }
    match cli.command {
        Command::Price => commands::price(&cfg, cli.pipeline),
        Command::Weights => commands::weights(&cfg),
        Command::Hedge { t, fund, level } => commands::hedge(&cfg, t, fund, level),
        Command::Sensitivities { moneyness } => commands::sensitivities(&cfg, &moneyness),
        Command::Verify => commands::verify(&cfg),
        Command::CompareMc => commands::compare_mc(&cfg),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Breach>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<gmwb_core::Error>() {
            return if e.is_numerical() { 2 } else { 1 };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
