//! Experiment configuration files.
//!
//! A config is TOML with a mandatory `config_version = 1`. Every section is
//! optional and unknown keys are rejected:
//!
//! ```toml
//! config_version = 1
//! seed = 7
//! methods = ["top", "lsrf"]
//!
//! [scenario]
//! preset = "s1"                 # or frequencies_hz / damping_ratios / amplitudes
//! target_mode_index = 1
//! snr_grid_db = [-5, 0, 5, 10, 15, 20, 25, 30]
//! noiseless = false             # adds a noise-free cell
//! n_recordings = 20
//! n_trials = 50
//!
//! [observation]
//! scale_range = [1.0, 5.0]
//! shift_range_s = [0.0, 2.0]
//!
//! [segment]
//! floor_fraction = 0.05
//! cycles = 10.0
//!
//! [training]
//! zeta_range = [0.001, 0.1]
//! [training.optimizer]
//! split = [500, 500]
//!
//! [interference]
//! delta_f_grid_hz = [10, 9, 8, 7, 6, 5, 4, 3, 2, 1]
//!
//! [baselines]
//! lsrf_iters = 20
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scenario::{builtin_system, InterferenceConfig, Method, ScenarioConfig, DEFAULT_SNR_GRID_DB};
use super::sweep::BaselineConfig;
use super::training::TrainingSetup;
use crate::error::{Error, Result};
use crate::optimizer::TrainConfig;
use crate::segment::SegmentPolicy;
use crate::signal_model::{ModalMode, ModalSystem, ObservationConfig};

pub const CONFIG_VERSION: u32 = 1;

/// Environment variable holding the default seed.
pub const SEED_ENV: &str = "ENVDAMP_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub config_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Method ids or the groups `all`, `forms`, `baselines`, `top`.
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub observation: ObservationConfig,
    #[serde(default)]
    pub segment: SegmentPolicy,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub interference: InterferenceSection,
    #[serde(default)]
    pub baselines: BaselineConfig,
}

fn default_methods() -> Vec<String> {
    vec!["all".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    /// `s1`, `s2` or `s3`; mutually exclusive with the explicit mode lists.
    pub preset: Option<String>,
    /// Defaults to the preset name, or `custom`.
    pub name: Option<String>,
    pub frequencies_hz: Option<Vec<f64>>,
    pub damping_ratios: Option<Vec<f64>>,
    pub amplitudes: Option<Vec<f64>>,
    pub target_mode_index: usize,
    pub snr_grid_db: Vec<f64>,
    /// Appends a noise-free cell to the SNR grid.
    pub noiseless: bool,
    pub n_recordings: usize,
    pub n_trials: usize,
    pub n_samples: usize,
    pub sample_rate_hz: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            preset: None,
            name: None,
            frequencies_hz: None,
            damping_ratios: None,
            amplitudes: None,
            target_mode_index: 1,
            snr_grid_db: DEFAULT_SNR_GRID_DB.to_vec(),
            noiseless: false,
            n_recordings: 20,
            n_trials: 50,
            n_samples: 4096,
            sample_rate_hz: 800.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub zeta_range: (f64, f64),
    pub amplitude_range: (f64, f64),
    /// Omit for the default; `noiseless = true` drops the noise entirely.
    pub snr_range_db: (f64, f64),
    pub noiseless: bool,
    pub optimizer: TrainConfig,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainingSetup::default();
        Self {
            zeta_range: t.zeta_range,
            amplitude_range: t.amplitude_range,
            snr_range_db: t.snr_range_db.unwrap_or((10.0, 30.0)),
            noiseless: false,
            optimizer: t.optimizer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterferenceSection {
    pub target_freq_hz: f64,
    pub target_zeta: f64,
    pub target_amplitude: f64,
    pub interferer_zeta: f64,
    pub interferer_amp: f64,
    pub delta_f_grid_hz: Vec<f64>,
    pub snr_points_db: Vec<f64>,
    pub n_recordings: usize,
    pub n_trials: usize,
    /// Registry scenario shared by every separation; unset means one fit
    /// per separation.
    pub fit_scenario: Option<String>,
}

impl Default for InterferenceSection {
    fn default() -> Self {
        let d = InterferenceConfig::desk(0);
        Self {
            target_freq_hz: d.target.damped_freq_hz,
            target_zeta: d.target.damping_ratio,
            target_amplitude: d.target.amplitude,
            interferer_zeta: d.interferer_zeta,
            interferer_amp: d.interferer_amp,
            delta_f_grid_hz: d.delta_f_grid_hz,
            snr_points_db: d.snr_points_db,
            n_recordings: d.n_recordings,
            n_trials: d.n_trials,
            fit_scenario: None,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            config_version: CONFIG_VERSION,
            seed: None,
            methods: default_methods(),
            scenario: ScenarioSection::default(),
            observation: ObservationConfig::default(),
            segment: SegmentPolicy::default(),
            training: TrainingSection::default(),
            interference: InterferenceSection::default(),
            baselines: BaselineConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.config_version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config_version {} (expected {CONFIG_VERSION})",
                self.config_version
            )));
        }
        self.method_list()?;
        self.segment.validate()?;
        self.baselines.validate()?;
        self.training.optimizer.validate()?;
        let (z0, z1) = self.training.zeta_range;
        if !(z0 > 0.0 && z0 <= z1 && z1 < 1.0) {
            return Err(Error::Config(format!("training zeta_range must lie in (0, 1), got ({z0}, {z1})")));
        }
        self.scenario_config(0)?.validate()?;
        self.interference_config(0).validate()
    }

    pub fn method_list(&self) -> Result<Vec<Method>> {
        Method::parse_list(&self.methods.join(","))
    }

    /// Full-size run: 7000/1500 training split and
    /// 100 recordings per ensemble.
    pub fn apply_full_scale(&mut self) {
        self.training.optimizer.split = (7000, 1500);
        self.scenario.n_recordings = 100;
        self.interference.n_recordings = 100;
    }

    pub fn modal_system(&self) -> Result<ModalSystem> {
        let s = &self.scenario;
        match (&s.preset, &s.frequencies_hz, &s.damping_ratios, &s.amplitudes) {
            (Some(p), None, None, None) => builtin_system(p),
            (None, None, None, None) => builtin_system("s1"),
            (None, Some(f), Some(z), Some(a)) => ModalSystem::from_parts(f, z, a),
            (Some(_), _, _, _) => Err(Error::Config("scenario.preset excludes explicit mode lists".into())),
            _ => Err(Error::Config(
                "custom scenarios need frequencies_hz, damping_ratios and amplitudes".into(),
            )),
        }
    }

    pub fn scenario_name(&self) -> String {
        let s = &self.scenario;
        s.name
            .clone()
            .or_else(|| s.preset.clone())
            .unwrap_or_else(|| if s.frequencies_hz.is_some() { "custom".into() } else { "s1".into() })
    }

    pub fn scenario_config(&self, seed: u64) -> Result<ScenarioConfig> {
        let s = &self.scenario;
        let mut grid: Vec<Option<f64>> = s.snr_grid_db.iter().map(|&v| Some(v)).collect();
        if s.noiseless {
            grid.push(None);
        }
        Ok(ScenarioConfig {
            name: self.scenario_name(),
            modes: self.modal_system()?,
            target_mode_index: s.target_mode_index,
            snr_grid_db: grid,
            n_recordings: s.n_recordings,
            n_trials: s.n_trials,
            rng_seed: seed,
            n_samples: s.n_samples,
            sample_rate_hz: s.sample_rate_hz,
            observation: self.observation,
        })
    }

    pub fn interference_config(&self, seed: u64) -> InterferenceConfig {
        let i = &self.interference;
        InterferenceConfig {
            target: ModalMode {
                damped_freq_hz: i.target_freq_hz,
                damping_ratio: i.target_zeta,
                amplitude: i.target_amplitude,
            },
            interferer_zeta: i.interferer_zeta,
            interferer_amp: i.interferer_amp,
            delta_f_grid_hz: i.delta_f_grid_hz.clone(),
            snr_points_db: i.snr_points_db.clone(),
            n_recordings: i.n_recordings,
            n_trials: i.n_trials,
            rng_seed: seed,
            n_samples: self.scenario.n_samples,
            sample_rate_hz: self.scenario.sample_rate_hz,
            observation: self.observation,
            fit_scenario: i.fit_scenario.clone(),
        }
    }

    pub fn training_setup(&self) -> TrainingSetup {
        let t = &self.training;
        TrainingSetup {
            zeta_range: t.zeta_range,
            amplitude_range: t.amplitude_range,
            snr_range_db: (!t.noiseless).then_some(t.snr_range_db),
            n_samples: self.scenario.n_samples,
            sample_rate_hz: self.scenario.sample_rate_hz,
            optimizer: t.optimizer.clone(),
        }
    }

    /// Seed precedence: explicit flag, then the environment, then the
    /// config file, then 0.
    pub fn resolve_seed(&self, flag: Option<u64>, env: Option<&str>) -> Result<u64> {
        if let Some(s) = flag {
            return Ok(s);
        }
        if let Some(v) = env.map(str::trim).filter(|v| !v.is_empty()) {
            return v
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}='{v}' is not an unsigned integer")));
        }
        Ok(self.seed.unwrap_or(0))
    }
}
