//! Built-in test systems and study definitions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelForm;
use crate::signal_model::{ModalMode, ModalSystem, ObservationConfig};

/// SNR grid shared by the scenario sweeps, dB.
pub const DEFAULT_SNR_GRID_DB: [f64; 8] = [-5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0];

/// Names of the three built-in scenarios.
pub const SCENARIOS: [&str; 3] = ["s1", "s2", "s3"];

/// Modal parameters of a built-in scenario.
pub fn builtin_system(name: &str) -> Result<ModalSystem> {
    let (f, z, a): (&[f64], &[f64], &[f64]) = match name {
        "s1" => (&[3.27, 15.56, 26.50], &[0.015, 0.010, 0.008], &[1.5, 2.5, 1.0]),
        "s2" => (&[1.15, 6.33, 10.95], &[0.015, 0.010, 0.008], &[2.8, 1.5, 4.7]),
        "s3" => (&[3.27, 15.56, 26.50], &[0.035, 0.040, 0.030], &[1.5, 2.5, 1.0]),
        other => return Err(Error::Config(format!("unknown scenario '{other}' (expected s1, s2 or s3)"))),
    };
    ModalSystem::from_parts(f, z, a)
}

/// One damping estimation method in a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Envelope(KernelForm),
    PeakPicking,
    SdofFit,
    Yoshida,
    Lsrf,
    Plscf,
}

impl Method {
    pub const BASELINES: [Method; 5] = [
        Method::PeakPicking,
        Method::SdofFit,
        Method::Yoshida,
        Method::Lsrf,
        Method::Plscf,
    ];

    /// Envelope methods singled out as the strongest performers.
    pub const TOP_TIER: [Method; 4] = [
        Method::Envelope(KernelForm::GaussianWindow),
        Method::Envelope(KernelForm::TriangleWindow),
        Method::Envelope(KernelForm::WelchWindow),
        Method::Envelope(KernelForm::BlackmanFilter),
    ];

    pub fn all() -> Vec<Method> {
        KernelForm::ALL
            .iter()
            .map(|&f| Method::Envelope(f))
            .chain(Method::BASELINES)
            .collect()
    }

    pub fn id(self) -> &'static str {
        match self {
            Method::Envelope(f) => f.name(),
            Method::PeakPicking => "pp",
            Method::SdofFit => "sdof_fit",
            Method::Yoshida => "yoshida",
            Method::Lsrf => "lsrf",
            Method::Plscf => "plscf",
        }
    }

    pub fn form(self) -> Option<KernelForm> {
        match self {
            Method::Envelope(f) => Some(f),
            _ => None,
        }
    }

    /// Parses a comma separated list; `all`, `forms`, `baselines` and
    /// `top` expand to groups.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let mut out = Vec::new();
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match tok {
                "all" => out.extend(Method::all()),
                "forms" => out.extend(KernelForm::ALL.iter().map(|&f| Method::Envelope(f))),
                "baselines" => out.extend(Method::BASELINES),
                "top" => out.extend(Method::TOP_TIER),
                t => out.push(t.parse()?),
            }
        }
        if out.is_empty() {
            return Err(Error::Config("empty method list".into()));
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if let Ok(f) = s.parse::<KernelForm>() {
            return Ok(Method::Envelope(f));
        }
        Method::BASELINES
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A Monte-Carlo SNR sweep over one modal system.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub modes: ModalSystem,
    pub target_mode_index: usize,
    /// `None` entries are noiseless.
    pub snr_grid_db: Vec<Option<f64>>,
    pub n_recordings: usize,
    pub n_trials: usize,
    pub rng_seed: u64,
    pub n_samples: usize,
    pub sample_rate_hz: f64,
    pub observation: ObservationConfig,
}

impl ScenarioConfig {
    /// Desk-scale defaults for a built-in scenario.
    pub fn builtin(name: &str, seed: u64) -> Result<Self> {
        Ok(Self {
            name: name.to_string(),
            modes: builtin_system(name)?,
            target_mode_index: 1,
            snr_grid_db: DEFAULT_SNR_GRID_DB.iter().map(|&s| Some(s)).collect(),
            n_recordings: 20,
            n_trials: 50,
            rng_seed: seed,
            n_samples: 4096,
            sample_rate_hz: 800.0,
            observation: ObservationConfig::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_mode_index >= self.modes.len() {
            return Err(Error::Config(format!(
                "target mode {} out of range for {} modes",
                self.target_mode_index,
                self.modes.len()
            )));
        }
        if self.snr_grid_db.is_empty() || self.n_recordings == 0 || self.n_trials == 0 {
            return Err(Error::Config("SNR grid, recordings and trials must be nonempty".into()));
        }
        if self.n_samples < 16 || !(self.sample_rate_hz > 0.0) {
            return Err(Error::Config("record needs >= 16 samples and a positive rate".into()));
        }
        let nyquist = self.sample_rate_hz / 2.0;
        if let Some(f) = self.modes.frequencies_hz().into_iter().find(|&f| f >= nyquist) {
            return Err(Error::AboveNyquist { freq_hz: f, nyquist_hz: nyquist });
        }
        self.observation
            .validate(self.n_samples as f64 / self.sample_rate_hz)
    }

    pub fn target(&self) -> &ModalMode {
        &self.modes.modes()[self.target_mode_index]
    }
}

/// Closely spaced mode study: a target flanked by two interferers at
/// `+-delta_f`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceConfig {
    pub target: ModalMode,
    pub interferer_zeta: f64,
    pub interferer_amp: f64,
    pub delta_f_grid_hz: Vec<f64>,
    pub snr_points_db: Vec<f64>,
    pub n_recordings: usize,
    pub n_trials: usize,
    pub rng_seed: u64,
    pub n_samples: usize,
    pub sample_rate_hz: f64,
    pub observation: ObservationConfig,
    /// Registry scenario holding the envelope widths for every separation;
    /// `None` looks them up under each separation's own scenario name.
    pub fit_scenario: Option<String>,
}

impl InterferenceConfig {
    pub fn desk(seed: u64) -> Self {
        Self {
            target: ModalMode {
                damped_freq_hz: 15.56,
                damping_ratio: 0.01,
                amplitude: 1.0,
            },
            interferer_zeta: 0.04,
            interferer_amp: 5.0,
            delta_f_grid_hz: (1..=10).rev().map(f64::from).collect(),
            snr_points_db: vec![0.0, 10.0],
            n_recordings: 20,
            n_trials: 50,
            rng_seed: seed,
            n_samples: 4096,
            sample_rate_hz: 800.0,
            observation: ObservationConfig::default(),
            fit_scenario: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.target.validate()?;
        if self.delta_f_grid_hz.is_empty() || self.snr_points_db.is_empty() {
            return Err(Error::Config("interference grids must be nonempty".into()));
        }
        if let Some(d) = self
            .delta_f_grid_hz
            .iter()
            .find(|&&d| !(d > 0.0 && d < self.target.damped_freq_hz))
        {
            return Err(Error::Config(format!(
                "delta_f {d} Hz must be positive and below the target frequency"
            )));
        }
        if self.n_recordings == 0 || self.n_trials == 0 {
            return Err(Error::Config("recordings and trials must be positive".into()));
        }
        self.observation
            .validate(self.n_samples as f64 / self.sample_rate_hz)
    }

    /// The target with interferers at `+-delta_f`; the target is index 1.
    pub fn system(&self, delta_f_hz: f64) -> Result<ModalSystem> {
        let t = &self.target;
        ModalSystem::from_parts(
            &[t.damped_freq_hz - delta_f_hz, t.damped_freq_hz, t.damped_freq_hz + delta_f_hz],
            &[self.interferer_zeta, t.damping_ratio, self.interferer_zeta],
            &[self.interferer_amp, t.amplitude, self.interferer_amp],
        )
    }

    /// Scenario name used in result rows for one separation.
    pub fn scenario_name(delta_f_hz: f64) -> String {
        format!("interference_df{delta_f_hz}")
    }

    /// Sweep configuration for one separation.
    pub fn scenario(&self, delta_f_hz: f64, index: usize) -> Result<ScenarioConfig> {
        Ok(ScenarioConfig {
            name: Self::scenario_name(delta_f_hz),
            modes: self.system(delta_f_hz)?,
            target_mode_index: 1,
            snr_grid_db: self.snr_points_db.iter().map(|&s| Some(s)).collect(),
            n_recordings: self.n_recordings,
            n_trials: self.n_trials,
            rng_seed: crate::rng::derive_seed(self.rng_seed, &[index as u64]),
            n_samples: self.n_samples,
            sample_rate_hz: self.sample_rate_hz,
            observation: self.observation,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_values() {
        let s1 = builtin_system("s1").unwrap();
        assert_eq!(s1.frequencies_hz(), vec![3.27, 15.56, 26.50]);
        let s3 = builtin_system("s3").unwrap();
        assert_eq!(s3.modes()[1].damping_ratio, 0.04);
        let s2 = builtin_system("s2").unwrap();
        assert_eq!(s2.modes()[2].amplitude, 4.7);
        assert!(builtin_system("s4").is_err());
    }

    #[test]
    fn method_lists() {
        assert_eq!(Method::all().len(), 14);
        let m = Method::parse_list("lsrf, top,lsrf").unwrap();
        assert_eq!(m.len(), 5);
        assert!("nope".parse::<Method>().is_err());
        for m in Method::all() {
            assert_eq!(m.id().parse::<Method>().unwrap(), m);
        }
    }

    #[test]
    fn interference_grid() {
        let c = InterferenceConfig::desk(0);
        for d in [6.0, 5.0, 3.0, 2.0, 1.0] {
            assert!(c.delta_f_grid_hz.contains(&d));
        }
        let sys = c.system(3.0).unwrap();
        let f = sys.frequencies_hz();
        assert!((f[0] - 12.56).abs() < 1e-12 && f[1] == 15.56 && (f[2] - 18.56).abs() < 1e-12);
        assert_eq!(sys.modes()[1].damping_ratio, 0.01);
    }
}
