//! Command-line front end for the link simulator: scenario loading, seeded
//! runs, paired comparisons, surface calibration and trace replay.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use terra_core::protocol::ProtocolSelector;
use thiserror::Error;

pub mod bundle;
pub mod commands;
pub mod config;

/// Environment variable holding the worker count for `compare`.
pub const WORKERS_ENV: &str = "TERRA_WORKERS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Runtime(_) | CliError::Invariant(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "terra",
    version,
    about = "60 GHz link simulator with ground-reflection fallback"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ScenarioArgs {
    /// Scenario TOML file, or the name of a bundled scenario.
    #[arg(long)]
    pub config: Option<String>,
    /// Override a config key, e.g. `--set radio.noise_floor_dbm=-75`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_protocol)]
    pub protocol: Option<ProtocolSelector>,
}

impl ScenarioArgs {
    pub fn overrides(&self) -> config::Overrides {
        config::Overrides {
            sets: self.sets.clone(),
            seed: self.seed,
            protocol: self.protocol,
        }
    }
}

fn parse_protocol(s: &str) -> Result<ProtocolSelector, String> {
    s.parse()
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario and write an output bundle.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "terra-out")]
        out: PathBuf,
        /// Also write the per-beam RSS trace of the run.
        #[arg(long, value_name = "PATH")]
        export_trace: Option<PathBuf>,
    },
    /// Paired Terra and baseline runs over a seed list.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "terra-out")]
        out: PathBuf,
        /// Comma-separated seeds and inclusive ranges, e.g. `1-50` or `1,4,7-9`.
        #[arg(long)]
        seeds: String,
    },
    /// Solve for the reflection loss matching a measured extra ground loss.
    Calibrate {
        /// concrete, gravel, ceramic-tile or custom.
        #[arg(long)]
        surface: String,
        /// Target median extra loss in dB; defaults to the measured value.
        #[arg(long)]
        target: Option<f64>,
        #[arg(long)]
        config: Option<String>,
    },
    /// Run the configured protocol against a recorded RSS trace.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "terra-out")]
        out: PathBuf,
    },
}

/// Parse arguments, run, print diagnostics and return the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("terra: {e}");
            e.exit_code()
        }
    }
}
