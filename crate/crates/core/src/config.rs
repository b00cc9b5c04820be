//! Run configuration: a TOML file with one table per stage.
//!
//! ```toml
//! [grid]
//! lat = 13
//! lon = 36
//!
//! [taam]
//! k = 7
//! n = 10
//! hidden = 32
//! ```
//!
//! Every key is optional; unknown keys are rejected.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, SynthParams, Variable, OLR, SST, U200, U850};
use crate::metrics::PhaseMode;
use crate::pipeline::DataConfig;
use crate::srcm::SrcmConfig;
use crate::taam::TaamConfig;
use crate::training::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub lat: usize,
    pub lon: usize,
    pub variables: Vec<String>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            lat: 13,
            lon: 144,
            variables: [OLR, U200, U850, SST].map(String::from).to_vec(),
        }
    }
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::regular(
            self.lat,
            self.lon,
            self.variables.iter().map(|v| Variable::named(v)).collect(),
        )
    }
}

/// Synthetic stand-ins for reanalysis and model archives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub reanalysis_days: usize,
    pub model_days: usize,
    /// Number of emulated model series.
    pub model_series: usize,
    pub seed: u64,
    pub start_date: NaiveDate,
    pub wave_period: f64,
    pub wave_scale: f64,
    pub noise_scale: f64,
    pub drift_scale: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let p = SynthParams::for_spec(&GridSpec::desk());
        Self {
            reanalysis_days: 1200,
            model_days: 1200,
            model_series: 1,
            seed: 1,
            start_date: p.start_date,
            wave_period: p.wave_period,
            wave_scale: p.wave_scale,
            noise_scale: p.noise_scale,
            drift_scale: p.drift_scale,
        }
    }
}

impl SynthConfig {
    pub fn params(&self, spec: &GridSpec) -> SynthParams {
        SynthParams {
            start_date: self.start_date,
            wave_period: self.wave_period,
            wave_scale: self.wave_scale,
            noise_scale: self.noise_scale,
            drift_scale: self.drift_scale,
            ..SynthParams::for_spec(spec)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DkpmConfig {
    /// Zero SST anomalies at land-masked cells.
    pub mask_sst: bool,
}

impl Default for DkpmConfig {
    fn default() -> Self {
        Self { mask_sst: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub phase_mode: PhaseMode,
    pub seasonal: bool,
    pub cor_threshold: f64,
    pub rmse_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            phase_mode: PhaseMode::Literal,
            seasonal: true,
            cor_threshold: crate::metrics::COR_THRESHOLD,
            rmse_threshold: crate::metrics::RMSE_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub synth: SynthConfig,
    pub dkpm: DkpmConfig,
    pub data: DataConfig,
    pub srcm: SrcmConfig,
    pub taam: TaamConfig,
    pub training: TrainConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            let msg = e.message().replace('\n', " ");
            Error::Parse(match line {
                Some(l) => format!("line {l}: {msg}"),
                None => msg,
            })
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.spec()?;
        self.srcm.validate()?;
        self.taam.validate()?;
        self.training.validate()?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    /// SHA-256 of the canonical serialization, so formatting and key order
    /// in the source file do not matter.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
