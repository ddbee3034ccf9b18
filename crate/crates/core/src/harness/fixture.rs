//! Ensemble recipes: a compact TOML description of a set of observed
//! records of one modal system, synthesized on demand.

use serde::{Deserialize, Serialize};

use super::scenario::ScenarioConfig;
use super::sweep::trial_records;
use crate::error::{Error, Result};
use crate::signal_model::{ModalMode, ModalSystem, ObservationConfig, TimeRecord};

/// Noise-free single-mode ensemble shipped with the binary.
pub const BUNDLED_NOISELESS: &str = include_str!("../../fixtures/noiseless_single_mode.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleRecipe {
    pub modes: Vec<ModalMode>,
    pub target_mode_index: usize,
    pub n_records: usize,
    pub n_samples: usize,
    pub sample_rate_hz: f64,
    /// Absent for noise-free records.
    #[serde(default)]
    pub snr_db: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub observation: ObservationConfig,
}

impl EnsembleRecipe {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn bundled() -> Self {
        Self::from_toml_str(BUNDLED_NOISELESS).expect("bundled fixture parses")
    }

    pub fn target(&self) -> Result<&ModalMode> {
        self.modes.get(self.target_mode_index).ok_or(Error::IndexOutOfRange {
            index: self.target_mode_index,
            len: self.modes.len(),
        })
    }

    fn scenario(&self) -> Result<ScenarioConfig> {
        let cfg = ScenarioConfig {
            name: "fixture".into(),
            modes: ModalSystem::new(self.modes.clone())?,
            target_mode_index: self.target_mode_index,
            snr_grid_db: vec![self.snr_db],
            n_recordings: self.n_records,
            n_trials: 1,
            rng_seed: self.seed,
            n_samples: self.n_samples,
            sample_rate_hz: self.sample_rate_hz,
            observation: self.observation,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The observed records, drawn exactly as one sweep cell would be.
    pub fn records(&self) -> Result<Vec<TimeRecord>> {
        trial_records(&self.scenario()?, 0, 0)
    }
}
