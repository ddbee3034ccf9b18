//! Width fitting for a study system: dataset generation, preparation and
//! one multi-start fit per requested form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelForm;
use crate::optimizer::{default_theta_bounds, optimize_theta, FitEntry, FitRegistry, FitResult, PreparedSet, TrainConfig};
use crate::rng::derive_seed;
use crate::segment::SegmentPolicy;
use crate::signal_model::{generate_dataset, DatasetSpec};

/// Labeled-dataset ranges and optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSetup {
    pub zeta_range: (f64, f64),
    pub amplitude_range: (f64, f64),
    pub snr_range_db: Option<(f64, f64)>,
    pub n_samples: usize,
    pub sample_rate_hz: f64,
    pub optimizer: TrainConfig,
}

impl Default for TrainingSetup {
    fn default() -> Self {
        Self {
            zeta_range: (0.001, 0.10),
            amplitude_range: (1.0, 5.0),
            snr_range_db: Some((10.0, 30.0)),
            n_samples: 4096,
            sample_rate_hz: 800.0,
            optimizer: TrainConfig::default(),
        }
    }
}

/// Dataset recipes for the training and validation splits.
pub fn dataset_specs(freqs_hz: &[f64], setup: &TrainingSetup, seed: u64) -> (DatasetSpec, DatasetSpec) {
    let spec = |n_records: usize, split: u64| DatasetSpec {
        system_frequencies: freqs_hz.to_vec(),
        zeta_range: setup.zeta_range,
        amplitude_range: setup.amplitude_range,
        snr_range_db: setup.snr_range_db,
        n_samples_per_record: setup.n_samples,
        sample_rate_hz: setup.sample_rate_hz,
        n_records,
        rng_seed: derive_seed(seed, &[split]),
    };
    (spec(setup.optimizer.split.0, 0), spec(setup.optimizer.split.1, 1))
}

/// Generates and prepares both splits for the target mode.
pub fn prepare_sets(
    freqs_hz: &[f64],
    target_mode_index: usize,
    setup: &TrainingSetup,
    policy: &SegmentPolicy,
    seed: u64,
) -> Result<(PreparedSet, PreparedSet)> {
    let f = *freqs_hz.get(target_mode_index).ok_or(Error::IndexOutOfRange {
        index: target_mode_index,
        len: freqs_hz.len(),
    })?;
    let (train_spec, val_spec) = dataset_specs(freqs_hz, setup, seed);
    let train = PreparedSet::new(&generate_dataset(&train_spec)?, target_mode_index, f, policy)?;
    let val = PreparedSet::new(&generate_dataset(&val_spec)?, target_mode_index, f, policy)?;
    Ok((train, val))
}

/// Search interval for `form` on a system, honouring a configured override.
pub fn bounds_for(form: KernelForm, freqs_hz: &[f64], target_mode_index: usize, setup: &TrainingSetup) -> (f64, f64) {
    setup.optimizer.theta_bounds.unwrap_or_else(|| {
        let duration = setup.n_samples as f64 / setup.sample_rate_hz;
        default_theta_bounds(form, freqs_hz[target_mode_index], freqs_hz, duration)
    })
}

/// Fits every form and returns registry entries keyed by `scenario`.
#[allow(clippy::too_many_arguments)]
pub fn train_forms(
    scenario: &str,
    freqs_hz: &[f64],
    target_mode_index: usize,
    forms: &[KernelForm],
    setup: &TrainingSetup,
    policy: &SegmentPolicy,
    seed: u64,
    mut progress: impl FnMut(&FitResult),
) -> Result<FitRegistry> {
    let (train, val) = prepare_sets(freqs_hz, target_mode_index, setup, policy, seed)?;
    let mut reg = FitRegistry::new();
    for &form in forms {
        let bounds = bounds_for(form, freqs_hz, target_mode_index, setup);
        let fit = optimize_theta(form, &train, &val, &setup.optimizer, bounds, seed)?;
        progress(&fit);
        reg.insert(FitEntry {
            scenario: scenario.to_string(),
            mode_index: target_mode_index,
            form,
            center_freq_hz: freqs_hz[target_mode_index],
            theta_opt: fit.theta_opt,
            train_loss: fit.train_loss,
            val_loss: fit.val_loss,
            bounds,
            seed,
            train_count: setup.optimizer.split.0,
            val_count: setup.optimizer.split.1,
        });
    }
    Ok(reg)
}
