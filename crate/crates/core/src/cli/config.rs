//! JSON configuration file. Every key is optional; unknown keys are errors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::gridmap::MetricSpec;
use crate::sim::{Crater, SimConfig};
use crate::transport::SolverChoice;
use crate::triplets::DEFAULT_OFFSET_DISTANCE;

/// Environment variable naming a default config file.
pub const CONFIG_ENV: &str = "REGRADE_CONFIG";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub metrics: MetricSpec,
    pub plan: PlanConfig,
    pub sim: SimConfig,
    pub site: SiteConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub threshold: f64,
    /// Minimum source spacing after decimation, m; 0 keeps every source.
    pub decimate: f64,
    pub heading_threshold_deg: f64,
    pub offset: f64,
    /// Fine cells per side of a planning cell.
    pub block: usize,
    pub solver: SolverChoice,
    /// Cell size for PGM input, m.
    pub resolution: Option<f64>,
    /// Meters per map unit (PGM pixel value or CSV number).
    pub scale: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            threshold: 0.01,
            decimate: 0.0,
            heading_threshold_deg: 15.0,
            offset: DEFAULT_OFFSET_DISTANCE,
            block: 1,
            solver: SolverChoice::Auto,
            resolution: None,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SiteConfig {
    pub width: f64,
    pub height: f64,
    pub resolution: f64,
    pub craters: Vec<Crater>,
}

impl Default for SiteConfig {
    fn default() -> Self {
        SiteConfig {
            width: 5.0,
            height: 5.0,
            resolution: 0.05,
            craters: vec![Crater { cx: 2.5, cy: 2.5, diameter: 1.0 }],
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Config, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Config, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Config::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// The file named by `explicit`, else by `$REGRADE_CONFIG`, else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Config, String> {
        match explicit {
            Some(p) => Config::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Config::load(Path::new(&p)),
                _ => Ok(Config::default()),
            },
        }
    }
}
