//! Run configuration: an optional TOML file whose values are overridden by
//! command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ufc_core::inventory::FieldMapping;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub arrivals: Option<String>,
    pub tariffs: Option<PathBuf>,
    pub season: Option<String>,
    pub share: Option<f64>,
    pub steps: Option<usize>,
    pub out: Option<PathBuf>,
    pub region_share: Option<f64>,
    pub growth_factor: Option<f64>,
    pub demand_proration: Option<f64>,
    pub energy_only: Option<bool>,
    pub jobs: Option<usize>,
    pub battery: BatteryConfig,
    pub stations: StationsConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryConfig {
    pub kwh: Option<f64>,
    pub kw: Option<f64>,
    pub efficiency: Option<f64>,
    pub initial_soc: Option<f64>,
    pub objective: Option<String>,
    pub free_terminal: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationsConfig {
    pub source: Option<String>,
    pub api_key_header: Option<String>,
    pub mapping: Option<FieldMapping>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("run config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("run config {}: {e}", path.display())))
    }
}

/// `flag` if given, else the config value.
pub fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>) -> Option<T> {
    flag.clone().or_else(|| file.clone())
}
