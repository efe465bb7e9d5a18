//! One JSON config drives every subcommand; each field group has defaults
//! matching the built-in reference setup, and a handful of flags can
//! override the common knobs without editing the file.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use hetnet_core::sim::SimConfig;
use hetnet_core::topology::LogBase;
use hetnet_core::{RadioParams, SolverOptions};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub area_width_m: f64,
    pub area_height_m: f64,
    pub spacing_m: f64,
    pub num_bts: usize,
    pub seed: u64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig {
            area_width_m: 100.0,
            area_height_m: 100.0,
            spacing_m: 20.0,
            num_bts: 7,
            seed: 7,
        }
    }
}

/// How a sweep's scalar load maps to per-station arrival rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TrafficMode {
    /// Every station gets the same rate.
    Uniform,
    /// Rates proportional to the number of cells each station serves.
    Proportional,
}

/// Whether the load figure is per station or a network-wide total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LoadScale {
    PerStation,
    NetworkTotal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub mode: TrafficMode,
    pub scale: LoadScale,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            mode: TrafficMode::Uniform,
            scale: LoadScale::PerStation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Optimal,
    Orthogonal,
    FullReuse,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Optimal => "optimal",
            Scheme::Orthogonal => "orthogonal",
            Scheme::FullReuse => "full-reuse",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Average arrival rates to evaluate, strictly increasing.
    pub loads: Vec<f64>,
    pub schemes: Vec<Scheme>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            loads: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            schemes: vec![Scheme::Optimal, Scheme::Orthogonal, Scheme::FullReuse],
        }
    }
}

fn default_sim() -> SimConfig {
    SimConfig {
        horizon: 2e4,
        warmup_fraction: 0.05,
        replications: 10,
        seed: 1,
        divergence_cap: 1_000_000,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologyConfig,
    pub radio: RadioParams,
    pub traffic: TrafficConfig,
    pub sweep: SweepConfig,
    pub sim: SimConfig,
    pub solver: SolverOptions,
    /// CSV destination; stdout when absent.
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            topology: TopologyConfig::default(),
            radio: RadioParams::default(),
            traffic: TrafficConfig::default(),
            sweep: SweepConfig::default(),
            sim: default_sim(),
            solver: SolverOptions::default(),
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<ExperimentConfig, CliError> {
        let Some(path) = path else {
            return Ok(ExperimentConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let t = &self.topology;
        if t.num_bts == 0 {
            return bad("topology.num_bts must be at least 1".into());
        }
        if self.sweep.schemes.is_empty() {
            return bad("sweep.schemes must not be empty".into());
        }
        let mut seen = self.sweep.schemes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.sweep.schemes.len() {
            return bad("sweep.schemes contains duplicates".into());
        }
        if self.sweep.loads.is_empty() {
            return bad("sweep.loads must not be empty".into());
        }
        if self
            .sweep
            .loads
            .iter()
            .any(|l| !(l.is_finite() && *l > 0.0))
        {
            return bad("sweep.loads must be positive and finite".into());
        }
        // All finite from here, so the plain comparison is exact.
        for w in self.sweep.loads.windows(2) {
            if w[1] <= w[0] {
                return bad(format!(
                    "sweep.loads must be strictly increasing ({} then {})",
                    w[0], w[1]
                ));
            }
        }
        self.radio
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let s = &self.sim;
        if !(s.horizon > 0.0 && s.horizon.is_finite()) {
            return bad(format!("sim.horizon must be positive, got {}", s.horizon));
        }
        if !(0.0..1.0).contains(&s.warmup_fraction) {
            return bad(format!(
                "sim.warmup_fraction must be in [0, 1), got {}",
                s.warmup_fraction
            ));
        }
        if s.replications == 0 {
            return bad("sim.replications must be at least 1".into());
        }
        Ok(())
    }
}

/// Flag-level overrides shared by every subcommand.
#[derive(Debug, Clone, clap::Args)]
pub struct Overrides {
    /// JSON experiment config; built-in defaults when omitted.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Area width in meters.
    #[arg(long)]
    pub area_width: Option<f64>,
    /// Area height in meters.
    #[arg(long)]
    pub area_height: Option<f64>,
    /// Hexagon center spacing in meters.
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Number of base stations.
    #[arg(long)]
    pub num_bts: Option<usize>,
    /// Station-placement seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pathloss exponent alpha.
    #[arg(long)]
    pub pathloss_exp: Option<f64>,
    /// Transmit power spectral density, W/Hz.
    #[arg(long)]
    pub tx_psd: Option<f64>,
    /// Noise power spectral density, W/Hz.
    #[arg(long)]
    pub noise_psd: Option<f64>,
    /// Rate logarithm base: natural or base2.
    #[arg(long)]
    pub log_base: Option<String>,
    /// How the load maps to per-station rates.
    #[arg(long, value_enum)]
    pub traffic_mode: Option<TrafficMode>,
    /// Whether the load is per station or a network total.
    #[arg(long, value_enum)]
    pub load_scale: Option<LoadScale>,
    /// Sweep loads, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub loads: Option<Vec<f64>>,
    /// Sweep schemes, comma separated.
    #[arg(long, value_delimiter = ',', value_enum)]
    pub schemes: Option<Vec<Scheme>>,
    /// Simulated time per replication.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Simulation replications per point.
    #[arg(long)]
    pub replications: Option<usize>,
    /// Simulation master seed.
    #[arg(long)]
    pub sim_seed: Option<u64>,
    /// CSV destination (stdout when neither this nor the config sets one).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

impl Overrides {
    pub fn build(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::load(self.config.as_deref())?;
        let t = &mut cfg.topology;
        if let Some(v) = self.area_width {
            t.area_width_m = v;
        }
        if let Some(v) = self.area_height {
            t.area_height_m = v;
        }
        if let Some(v) = self.spacing {
            t.spacing_m = v;
        }
        if let Some(v) = self.num_bts {
            t.num_bts = v;
        }
        if let Some(v) = self.seed {
            t.seed = v;
        }
        if let Some(v) = self.pathloss_exp {
            cfg.radio.pathloss_exponent = v;
        }
        if let Some(v) = self.tx_psd {
            cfg.radio.tx_psd_w_per_hz = v;
        }
        if let Some(v) = self.noise_psd {
            cfg.radio.noise_psd_w_per_hz = v;
        }
        if let Some(v) = self.log_base.as_deref() {
            cfg.radio.log_base = match v {
                "natural" => LogBase::Natural,
                "base2" => LogBase::Base2,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown log base {other:?}; use natural or base2"
                    )))
                }
            };
        }
        if let Some(v) = self.traffic_mode {
            cfg.traffic.mode = v;
        }
        if let Some(v) = self.load_scale {
            cfg.traffic.scale = v;
        }
        if let Some(v) = &self.loads {
            cfg.sweep.loads = v.clone();
        }
        if let Some(v) = &self.schemes {
            cfg.sweep.schemes = v.clone();
        }
        if let Some(v) = self.horizon {
            cfg.sim.horizon = v;
        }
        if let Some(v) = self.replications {
            cfg.sim.replications = v;
        }
        if let Some(v) = self.sim_seed {
            cfg.sim.seed = v;
        }
        if let Some(v) = &self.output {
            cfg.output = Some(v.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
