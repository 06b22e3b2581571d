//! JSON run configuration and its merge with command-line flags.

use std::path::Path;

use anyhow::{Context, Result};
use langevin_core::mcmc::{McmcConfig, DEFAULT_GRID_POINTS};
use langevin_core::regimes::{ClassifyConfig, TrackConfig, DEFAULT_EXCLUSION_THRESHOLD};
use langevin_core::replicate::{OrderRecoveryConfig, ParameterRecoveryConfig};
use langevin_core::simulate::GridStyle;
use langevin_core::timeseries::{SeriesFormat, DEFAULT_BAR_MINUTES, DEFAULT_SPREAD_CAP};
use langevin_core::{FitOptions, WindowMode, MAX_ORDER};
use serde::Deserialize;

use crate::Common;

/// Contents of a `--config` file. Every field is optional; flags win.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub q_max: Option<usize>,
    pub window: Option<WindowMode>,
    pub mcmc: Option<McmcConfig>,
    pub grid_points: Option<usize>,
    pub threshold: Option<f64>,
    pub restarts: Option<usize>,
    /// Bar length for quote input, in minutes.
    pub bar_minutes: Option<i64>,
    pub spread_cap: Option<f64>,
    pub simulate: SimulateFile,
    pub order_recovery: Option<OrderRecoveryConfig>,
    pub parameter_recovery: Option<ParameterRecoveryConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateFile {
    pub q: Option<usize>,
    pub alpha: Option<Vec<f64>>,
    pub sigma2: Option<f64>,
    pub n: Option<usize>,
    pub len: Option<usize>,
    pub dt: Option<f64>,
    pub s0: Option<f64>,
    pub grid: Option<GridStyle>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Settings shared by the window-based subcommands after merging.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub seed: u64,
    pub q_max: usize,
    pub window: WindowMode,
    pub mcmc: McmcConfig,
    pub fit: FitOptions,
    pub grid_points: usize,
    pub threshold: f64,
    pub quotes: SeriesFormat,
}

impl Resolved {
    pub fn new(flags: &Common, file: &FileConfig) -> Self {
        let seed = flags.seed.or(file.seed).unwrap_or(0);
        let mut mcmc = file.mcmc.unwrap_or_default();
        mcmc.seed = seed;
        if let Some(w) = flags.walkers {
            mcmc.walkers = Some(w);
        }
        if let Some(s) = flags.steps {
            mcmc.steps = s;
        }
        if let Some(b) = flags.burnin {
            mcmc.burn_in = b;
        }
        let mut fit = FitOptions { seed, ..FitOptions::default() };
        if let Some(r) = file.restarts {
            fit.restarts = r;
        }
        let quotes = SeriesFormat::quotes(file.spread_cap.unwrap_or(DEFAULT_SPREAD_CAP), file.bar_minutes.unwrap_or(DEFAULT_BAR_MINUTES));
        Self {
            seed,
            q_max: flags.qmax.or(file.q_max).unwrap_or(MAX_ORDER),
            window: flags.window.map(Into::into).or(file.window).unwrap_or(WindowMode::Monthly),
            mcmc,
            fit,
            grid_points: file.grid_points.unwrap_or(DEFAULT_GRID_POINTS),
            threshold: file.threshold.unwrap_or(DEFAULT_EXCLUSION_THRESHOLD),
            quotes,
        }
    }

    pub fn track(&self) -> TrackConfig {
        TrackConfig {
            window: self.window,
            q_max: self.q_max,
            fit: self.fit,
            mcmc: self.mcmc,
            classify: ClassifyConfig { threshold: self.threshold },
            grid_points: self.grid_points,
        }
    }
}
