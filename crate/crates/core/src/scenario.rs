//! JSON scenario files.
//!
//! ```json
//! {
//!   "num_wds": 20,
//!   "num_rx_antennas": 1,
//!   "power_budget": 10.0,
//!   "est_error_var": 0.1,
//!   "noise_var": 1.0,
//!   "channel_var": [0.8, 1.2, ...],
//!   "master_seed": 7
//! }
//! ```
//!
//! An optional `est_channel` pins the channel estimates, one list of
//! `[re, im]` pairs per device, instead of drawing them from the seed.
//! Per-device fields take either an array of length `num_wds` or a single
//! number broadcast to every device. When `channel_var` is omitted the
//! variances are drawn once, uniformly from `channel_var_range`
//! (default `[0.5, 1.5]`), using a stream derived from `master_seed`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::SystemConfig;
use crate::rng::stream;
use crate::{CVector, Complex};

pub const DEFAULT_CHANNEL_VAR_RANGE: [f64; 2] = [0.5, 1.5];

/// Stream id for drawing large-scale variances.
const CHANNEL_VAR_STREAM: u64 = 0xC4A7;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Config(#[from] crate::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerDevice {
    Scalar(f64),
    List(Vec<f64>),
}

impl PerDevice {
    fn expand(&self, k: usize) -> Vec<f64> {
        match self {
            Self::Scalar(v) => vec![*v; k],
            Self::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub num_wds: usize,
    pub num_rx_antennas: usize,
    pub power_budget: PerDevice,
    pub est_error_var: PerDevice,
    pub noise_var: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_var: Option<PerDevice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_var_range: Option<[f64; 2]>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub est_channel: Option<Vec<Vec<[f64; 2]>>>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Scenario with every field spelled out, so it reloads to `config`.
    pub fn from_config(config: &SystemConfig<f64>, master_seed: u64) -> Self {
        Self {
            num_wds: config.num_wds,
            num_rx_antennas: config.num_rx_antennas,
            power_budget: PerDevice::List(config.power_budget.clone()),
            est_error_var: PerDevice::List(config.est_error_var.clone()),
            noise_var: config.noise_var,
            channel_var: Some(PerDevice::List(config.channel_var.clone())),
            channel_var_range: None,
            master_seed,
            est_channel: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    /// The pinned channel estimates, checked against `config`.
    pub fn pinned_channels(&self, config: &SystemConfig<f64>) -> Result<Option<Vec<CVector<f64>>>, ScenarioError> {
        let Some(rows) = &self.est_channel else {
            return Ok(None);
        };
        let channels: Vec<CVector<f64>> = rows
            .iter()
            .map(|row| row.iter().map(|&[re, im]| Complex::new(re, im)).collect())
            .collect();
        config.check_channels(&channels)?;
        Ok(Some(channels))
    }

    /// Expands broadcasts, draws missing channel variances and validates.
    pub fn resolve(&self) -> Result<SystemConfig<f64>, ScenarioError> {
        let k = self.num_wds;
        let channel_var = match &self.channel_var {
            Some(v) => v.expand(k),
            None => {
                let [lo, hi] = self.channel_var_range.unwrap_or(DEFAULT_CHANNEL_VAR_RANGE);
                if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
                    return Err(crate::Error::InvalidArgument(format!(
                        "channel_var_range [{lo}, {hi}] must satisfy 0 <= min <= max"
                    ))
                    .into());
                }
                let mut rng = stream(self.master_seed, &[CHANNEL_VAR_STREAM]);
                (0..k)
                    .map(|_| if lo == hi { lo } else { rng.random_range(lo..hi) })
                    .collect()
            }
        };
        let config = SystemConfig {
            num_wds: k,
            num_rx_antennas: self.num_rx_antennas,
            power_budget: self.power_budget.expand(k),
            est_error_var: self.est_error_var.expand(k),
            noise_var: self.noise_var,
            channel_var,
        };
        config.validate()?;
        Ok(config)
    }
}
