//! Command-line orchestration for the `ensemble-lab` experiments.
//!
//! Exit codes: 0 success, 1 an invariant check failed, 2 usage,
//! configuration or I/O error.

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::RunConfig;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVARIANT: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub fn config(e: impl ToString) -> Self {
        Self::Config(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "ensemble-lab", version, about = "Locality, EPR and ensemble-dynamics experiments")]
pub struct Cli {
    /// TOML run configuration; missing keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the one in the configuration.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory for the result bundle.
    #[arg(long, global = true, value_name = "DIR", default_value = "results")]
    pub out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Conditional CHSH bound scan, determinism lemma battery and quantum-model locality audit.
    VerifyTheorem,
    /// Conditional CHSH bound scan on its own.
    ChshScan,
    /// Paired-source experiment: counts, correlations, CHSH, no-signaling and factorization.
    Epr,
    /// Entanglement swapping with wings drawn from two sources.
    Swap,
    /// Gaussian packet: trajectory ensemble against the Schrödinger oracle.
    Density,
    /// Disturbance sweep on one wing of the equal-axis experiment.
    Disturbance,
}

/// Reads the configuration and applies command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = Some(seed);
    }
    cfg.seed()?;
    Ok(cfg)
}

/// Runs the command and returns its exit code.
pub fn run(cli: &Cli) -> u8 {
    let outcome = resolve_config(cli).and_then(|cfg| {
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cli.threads {
            pool = pool.num_threads(n as usize);
        }
        let pool = pool.build().map_err(CliError::config)?;
        pool.install(|| commands::execute(cli.command, &cfg, &cli.out))
    });
    if let Ok(report) = &outcome {
        for line in &report.lines {
            println!("{line}");
        }
    }
    match &outcome {
        Ok(r) if !r.invariants_hold => eprintln!("invariant check failed; see {}", cli.out.display()),
        Err(e) => eprintln!("error: {e}"),
        Ok(_) => {}
    }
    exit_code(&outcome)
}

pub fn exit_code(outcome: &Result<commands::Report, CliError>) -> u8 {
    match outcome {
        Ok(r) if r.invariants_hold => EXIT_OK,
        Ok(_) => EXIT_INVARIANT,
        Err(_) => EXIT_USAGE,
    }
}
