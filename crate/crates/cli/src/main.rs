//! `ufcsim`: command-line front end for the UFC transition simulator.
//!
//! Exit codes: 0 success, 1 internal or I/O failure, 2 invalid input or
//! configuration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or input files.
    Usage(String),
    Core(ufc_core::Error),
    Internal(String),
}

impl From<ufc_core::Error> for CliError {
    fn from(e: ufc_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_user_error() => 2,
            CliError::Core(_) | CliError::Internal(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ufcsim", version, about = "Level-2 to ultra-fast charger transition simulator")]
pub struct Cli {
    /// TOML run config; command-line flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads for scenario evaluation (1 = sequential).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one UFC share: power profile, billing profile and scenario JSON.
    Simulate(SimulateArgs),
    /// Sweep the UFC share from 0 to 1.
    Sweep(SweepArgs),
    /// Value of time at which all-L2 and all-UFC cost the EV user the same.
    TippingPoint(TippingArgs),
    /// Battery peak shaving on a fleet or supplied load profile.
    PeakShave(PeakShaveArgs),
    /// Ingest a charger inventory and report its power-rating distribution.
    IngestStations(IngestArgs),
}

#[derive(Debug, Clone, Args, Default)]
pub struct ScenarioArgs {
    /// Arrival CSV (`hour,count` or `slot,count`), or `fixture` for the bundled
    /// bimodal profile.
    #[arg(long)]
    pub arrivals: Option<String>,
    /// Tariff config JSON (defaults to the bundled E-19/E-20 reconstruction).
    #[arg(long)]
    pub tariffs: Option<PathBuf>,
    /// Regional share correction applied to arrivals.
    #[arg(long)]
    pub region_share: Option<f64>,
    /// Fleet growth correction applied to arrivals.
    #[arg(long)]
    pub growth_factor: Option<f64>,
    /// Multiplier on demand charges for the simulated horizon (e.g. 0.2333 for 7/30).
    #[arg(long)]
    pub demand_proration: Option<f64>,
    /// Output directory (default `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// UFC share in [0, 1].
    #[arg(long)]
    pub share: Option<f64>,
    /// summer or winter.
    #[arg(long)]
    pub season: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Number of shares, evenly spaced from 0 to 1 (default 11).
    #[arg(long)]
    pub steps: Option<usize>,
    /// summer or winter; both when omitted.
    #[arg(long)]
    pub season: Option<String>,
}

#[derive(Debug, Args)]
pub struct TippingArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// summer or winter; both when omitted.
    #[arg(long)]
    pub season: Option<String>,
    /// Compare energy charges only instead of total station cost.
    #[arg(long)]
    pub energy_only: bool,
}

#[derive(Debug, Args)]
pub struct PeakShaveArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// UFC share of the fleet profile to shave (default 1).
    #[arg(long)]
    pub share: Option<f64>,
    /// summer (default) or winter.
    #[arg(long)]
    pub season: Option<String>,
    /// Shave this `slot_start_minute,kw` 15-minute profile instead of the fleet.
    #[arg(long)]
    pub load: Option<PathBuf>,
    /// Usable storage capacity.
    #[arg(long)]
    pub battery_kwh: Option<f64>,
    /// Charge and discharge power limit.
    #[arg(long)]
    pub battery_kw: Option<f64>,
    /// Round-trip efficiency in (0, 1].
    #[arg(long)]
    pub efficiency: Option<f64>,
    /// Initial (and, for cyclic dispatch, terminal) SoC; default half of capacity.
    #[arg(long)]
    pub initial_soc: Option<f64>,
    /// peak or cost.
    #[arg(long)]
    pub objective: Option<String>,
    /// Let the terminal SoC float instead of returning to the initial SoC.
    #[arg(long)]
    pub free_terminal: bool,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// URL or snapshot file. The API key, if any, is read from UFCSIM_API_KEY.
    #[arg(long)]
    pub source: Option<String>,
    /// Write the distribution JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            let retry = matches!(&e, CliError::Core(ufc_core::Error::Fetch(_)));
            eprintln!("error: {e}");
            if retry {
                eprintln!("the request can be retried");
            }
            ExitCode::from(code)
        }
    }
}
