mod commands;
mod config;
mod error;
mod verify;

use std::path::PathBuf;

use clap::Parser;

use crate::commands::{resolve_base, Context};
use crate::config::{Command, RunConfig};
use crate::error::CliError;

/// Simulate, relax and analyse nonlinear Schrödinger flows on graphs.
#[derive(Debug, Parser)]
#[command(name = "graph-nls", version)]
struct Args {
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's "out".
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized commands; overrides the config's "seed".
    #[arg(long)]
    seed: Option<u64>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("GRAPH_NLS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("GRAPH_NLS_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn run(args: Args) -> Result<(), CliError> {
    configure_threads()?;
    let cfg = RunConfig::load(&args.config)?;
    if let Some(declared) = cfg.command {
        if declared != args.command {
            return Err(CliError::Config(format!(
                "config is written for {declared:?} but {:?} was requested",
                args.command
            )));
        }
    }
    let ctx = Context {
        base: resolve_base(&args.config),
        out: args.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
        seed: args.seed.or(cfg.seed).unwrap_or(0),
        cfg,
    };
    match args.command {
        Command::Simulate => commands::simulate(&ctx),
        Command::GroundState => commands::ground_state(&ctx),
        Command::Stability => commands::stability(&ctx),
        Command::Dispersion => commands::dispersion(&ctx),
        Command::Verify => verify::verify(&ctx),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Args::parse()) {
        eprintln!("graph-nls: {e}");
        std::process::exit(e.exit_code());
    }
}
