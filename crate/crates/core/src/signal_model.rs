//! Modal impulse-response synthesis and the observation model.
//!
//! A structure is described directly by its modal parameters: each mode
//! contributes `amp * exp(-zeta * wn * t) * sin(wd * t)` to the response.
//! Observed records add an unknown gain, an unknown impact delay and white
//! Gaussian noise at a prescribed SNR on top of that clean response.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Envelope;
use crate::rng;

/// One underdamped mode: damped frequency, damping ratio and modal amplitude
/// (the product of mode-shape entry and modal amplitude).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalMode {
    pub damped_freq_hz: f64,
    pub damping_ratio: f64,
    pub amplitude: f64,
}

impl ModalMode {
    pub fn new(damped_freq_hz: f64, damping_ratio: f64, amplitude: f64) -> Result<Self> {
        let mode = Self {
            damped_freq_hz,
            damping_ratio,
            amplitude,
        };
        mode.validate()?;
        Ok(mode)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.damped_freq_hz > 0.0 && self.damped_freq_hz.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "damped frequency must be positive, got {}",
                self.damped_freq_hz
            )));
        }
        if !(self.damping_ratio > 0.0 && self.damping_ratio < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "damping ratio must lie in (0, 1), got {}",
                self.damping_ratio
            )));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "modal amplitude must be positive, got {}",
                self.amplitude
            )));
        }
        Ok(())
    }

    /// Damped angular frequency in rad/s.
    pub fn damped_freq_rad(&self) -> f64 {
        2.0 * PI * self.damped_freq_hz
    }

    pub fn natural_freq_rad(&self) -> f64 {
        natural_freq_rad(self)
    }

    /// Exponential decay rate `zeta * wn` in 1/s.
    pub fn decay_rate(&self) -> f64 {
        self.damping_ratio * self.natural_freq_rad()
    }
}

/// Undamped natural frequency `wn = wd / sqrt(1 - zeta^2)` in rad/s.
pub fn natural_freq_rad(mode: &ModalMode) -> f64 {
    mode.damped_freq_rad() / (1.0 - mode.damping_ratio * mode.damping_ratio).sqrt()
}

/// Ordered, nonempty set of modes with strictly increasing frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ModalMode>", into = "Vec<ModalMode>")]
pub struct ModalSystem {
    modes: Vec<ModalMode>,
}

impl ModalSystem {
    pub fn new(modes: Vec<ModalMode>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::Empty("modal system"));
        }
        for m in &modes {
            m.validate()?;
        }
        if modes
            .windows(2)
            .any(|w| w[1].damped_freq_hz <= w[0].damped_freq_hz)
        {
            return Err(Error::InvalidParameter(
                "modal frequencies must be strictly increasing".into(),
            ));
        }
        Ok(Self { modes })
    }

    /// Builds a system from parallel lists of frequencies, damping ratios and
    /// amplitudes.
    pub fn from_parts(freqs_hz: &[f64], zetas: &[f64], amplitudes: &[f64]) -> Result<Self> {
        if freqs_hz.len() != zetas.len() {
            return Err(Error::LengthMismatch {
                expected: freqs_hz.len(),
                got: zetas.len(),
            });
        }
        if freqs_hz.len() != amplitudes.len() {
            return Err(Error::LengthMismatch {
                expected: freqs_hz.len(),
                got: amplitudes.len(),
            });
        }
        let modes = freqs_hz
            .iter()
            .zip(zetas)
            .zip(amplitudes)
            .map(|((&f, &z), &a)| ModalMode::new(f, z, a))
            .collect::<Result<Vec<_>>>()?;
        Self::new(modes)
    }

    pub fn modes(&self) -> &[ModalMode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn frequencies_hz(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.damped_freq_hz).collect()
    }

    /// Same system with every amplitude multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.modes
                .iter()
                .map(|m| ModalMode {
                    amplitude: m.amplitude * c,
                    ..*m
                })
                .collect(),
        )
    }
}

impl TryFrom<Vec<ModalMode>> for ModalSystem {
    type Error = Error;
    fn try_from(modes: Vec<ModalMode>) -> Result<Self> {
        Self::new(modes)
    }
}

impl From<ModalSystem> for Vec<ModalMode> {
    fn from(s: ModalSystem) -> Self {
        s.modes
    }
}

/// Uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeRecord {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl TimeRecord {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if samples.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "a record needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Mean square over the full record.
    pub fn power(&self) -> f64 {
        mean_square(&self.samples)
    }
}

pub(crate) fn mean_square(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Clean modal superposition sampled at `fs`; sample 0 is exactly zero.
pub fn synthesize_response(system: &ModalSystem, n: usize, fs: f64) -> Result<TimeRecord> {
    let nyquist = fs / 2.0;
    for m in system.modes() {
        if m.damped_freq_hz >= nyquist {
            return Err(Error::AboveNyquist {
                freq_hz: m.damped_freq_hz,
                nyquist_hz: nyquist,
            });
        }
    }
    let mut samples = vec![0.0; n];
    for m in system.modes() {
        let decay = m.decay_rate();
        let wd = m.damped_freq_rad();
        for (k, s) in samples.iter_mut().enumerate() {
            let t = k as f64 / fs;
            *s += m.amplitude * (-decay * t).exp() * (wd * t).sin();
        }
    }
    TimeRecord::new(samples, fs)
}

/// Ground-truth amplitude envelope `amp * exp(-zeta * wn * t)` of one mode.
pub fn true_envelope(mode: &ModalMode, n: usize, fs: f64) -> Envelope {
    let decay = mode.decay_rate();
    let values = (0..n)
        .map(|k| mode.amplitude * (-decay * k as f64 / fs).exp())
        .collect();
    Envelope::new(values, fs)
}

/// Ranges from which the unknown gain, impact delay and SNR of an observed
/// record are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservationConfig {
    pub scale_range: (f64, f64),
    pub shift_range_s: (f64, f64),
    pub snr_range_db: (f64, f64),
}

impl Default for ObservationConfig {
    fn default() -> Self {
        Self {
            scale_range: (1.0, 5.0),
            shift_range_s: (0.0, 2.0),
            snr_range_db: (-5.0, 30.0),
        }
    }
}

impl ObservationConfig {
    pub fn validate(&self, duration_s: f64) -> Result<()> {
        let (b0, b1) = self.scale_range;
        if !(b0 > 0.0 && b0 <= b1) {
            return Err(Error::InvalidParameter(format!(
                "scale range must satisfy 0 < min <= max, got ({b0}, {b1})"
            )));
        }
        let (s0, s1) = self.shift_range_s;
        if !(s0 >= 0.0 && s0 <= s1) {
            return Err(Error::InvalidParameter(format!(
                "shift range must satisfy 0 <= min <= max, got ({s0}, {s1})"
            )));
        }
        if s1 >= duration_s {
            return Err(Error::InvalidParameter(format!(
                "maximum shift {s1} s is not shorter than the record ({duration_s} s)"
            )));
        }
        let (n0, n1) = self.snr_range_db;
        if n0 > n1 {
            return Err(Error::InvalidParameter(format!(
                "SNR range must be ordered, got ({n0}, {n1})"
            )));
        }
        Ok(())
    }
}

/// One concrete draw of the observation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub scale: f64,
    pub shift_s: f64,
    /// `None` means no noise is added.
    pub snr_db: Option<f64>,
    pub noise_seed: u64,
}

/// Applies `B * x(t - tau0) + noise` to a clean record.
///
/// The delay is rounded to whole samples; the vacated prefix is zero and the
/// tail is truncated so the length is preserved. Noise is white Gaussian,
/// rescaled so that its realized mean square equals
/// `P_signal / 10^(snr/10)`, where `P_signal` is the mean square of the
/// delayed and scaled record over its full length.
pub fn apply_observation(
    record: &TimeRecord,
    scale: f64,
    shift_s: f64,
    snr_db: Option<f64>,
    seed: u64,
) -> Result<TimeRecord> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "scale must be positive, got {scale}"
        )));
    }
    if !(shift_s >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "shift must be nonnegative, got {shift_s}"
        )));
    }
    let n = record.len();
    let fs = record.sample_rate_hz();
    let shift = round_half_up(shift_s * fs);
    if shift >= n {
        return Err(Error::InvalidParameter(format!(
            "shift of {shift} samples exceeds the record length {n}"
        )));
    }
    let mut out = vec![0.0; n];
    for (dst, src) in out[shift..].iter_mut().zip(record.samples()) {
        *dst = scale * src;
    }
    if let Some(snr) = snr_db {
        if !snr.is_finite() {
            return Err(Error::InvalidParameter(format!("SNR must be finite, got {snr}")));
        }
        let target = mean_square(&out) / 10f64.powf(snr / 10.0);
        let mut rng = rng::stream(seed, &[]);
        let mut noise: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let realized = mean_square(&noise);
        let gain = if realized > 0.0 {
            (target / realized).sqrt()
        } else {
            0.0
        };
        for (o, e) in out.iter_mut().zip(noise.iter_mut()) {
            *o += gain * *e;
        }
    }
    TimeRecord::new(out, fs)
}

/// Draws observation parameters uniformly from `cfg`.
pub fn draw_observation<R: Rng>(cfg: &ObservationConfig, rng: &mut R, noiseless: bool) -> Observation {
    let scale = uniform(rng, cfg.scale_range);
    let shift_s = uniform(rng, cfg.shift_range_s);
    let snr = uniform(rng, cfg.snr_range_db);
    let noise_seed = rng.random();
    Observation {
        scale,
        shift_s,
        snr_db: (!noiseless).then_some(snr),
        noise_seed,
    }
}

pub(crate) fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    // always consume one draw so streams stay aligned for degenerate ranges
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}

/// `floor(x + 0.5)` for nonnegative `x`.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// Recipe for a labeled synthetic training/validation dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub system_frequencies: Vec<f64>,
    pub zeta_range: (f64, f64),
    pub amplitude_range: (f64, f64),
    /// `None` generates noiseless records.
    pub snr_range_db: Option<(f64, f64)>,
    pub n_samples_per_record: usize,
    pub sample_rate_hz: f64,
    pub n_records: usize,
    pub rng_seed: u64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.system_frequencies.is_empty() {
            return Err(Error::Empty("dataset frequencies"));
        }
        let (z0, z1) = self.zeta_range;
        if !(z0 > 0.0 && z0 <= z1 && z1 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "zeta range must lie within (0, 1) and be ordered, got ({z0}, {z1})"
            )));
        }
        let (a0, a1) = self.amplitude_range;
        if !(a0 > 0.0 && a0 <= a1) {
            return Err(Error::InvalidParameter(format!(
                "amplitude range must be positive and ordered, got ({a0}, {a1})"
            )));
        }
        if let Some((s0, s1)) = self.snr_range_db {
            if s0 > s1 {
                return Err(Error::InvalidParameter(format!(
                    "SNR range must be ordered, got ({s0}, {s1})"
                )));
            }
        }
        if self.n_samples_per_record < 2 || self.n_records == 0 {
            return Err(Error::InvalidParameter(
                "record length must be >= 2 and record count positive".into(),
            ));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidParameter("sample rate must be positive".into()));
        }
        Ok(())
    }
}

/// A synthetic record together with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecord {
    pub record: TimeRecord,
    pub envelopes: Vec<Envelope>,
    pub zetas: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub snr_db: Option<f64>,
}

impl LabeledRecord {
    #[allow(clippy::too_many_arguments)]
    fn from_labels(
        freqs: &[f64],
        zetas: Vec<f64>,
        amplitudes: Vec<f64>,
        snr_db: Option<f64>,
        samples: Option<Vec<f64>>,
        n: usize,
        fs: f64,
        noise_seed: u64,
    ) -> Result<Self> {
        let system = ModalSystem::from_parts(freqs, &zetas, &amplitudes)?;
        let envelopes = system
            .modes()
            .iter()
            .map(|m| true_envelope(m, n, fs))
            .collect();
        let record = match samples {
            Some(s) => TimeRecord::new(s, fs)?,
            None => {
                let clean = synthesize_response(&system, n, fs)?;
                apply_observation(&clean, 1.0, 0.0, snr_db, noise_seed)?
            }
        };
        Ok(Self {
            record,
            envelopes,
            zetas,
            amplitudes,
            snr_db,
        })
    }
}

/// Generates `spec.n_records` labeled records. Record `i` depends only on
/// `(spec.rng_seed, i)`, so the output is identical regardless of thread
/// scheduling.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Vec<LabeledRecord>> {
    spec.validate()?;
    (0..spec.n_records)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(spec.rng_seed, &[i as u64]);
            let n_modes = spec.system_frequencies.len();
            let zetas: Vec<f64> = (0..n_modes).map(|_| uniform(&mut r, spec.zeta_range)).collect();
            let amps: Vec<f64> = (0..n_modes)
                .map(|_| uniform(&mut r, spec.amplitude_range))
                .collect();
            let snr_draw = spec
                .snr_range_db
                .map(|range| uniform(&mut r, range));
            let noise_seed: u64 = r.random();
            LabeledRecord::from_labels(
                &spec.system_frequencies,
                zetas,
                amps,
                snr_draw,
                None,
                spec.n_samples_per_record,
                spec.sample_rate_hz,
                noise_seed,
            )
        })
        .collect()
}

const DATASET_FORMAT: &str = "envdamp-dataset";
const DATASET_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    format: String,
    version: u32,
    sample_rate_hz: f64,
    n_samples: usize,
    frequencies_hz: Vec<f64>,
    records: Vec<DatasetFileRecord>,
}

#[derive(Serialize, Deserialize)]
struct DatasetFileRecord {
    index: usize,
    zetas: Vec<f64>,
    amplitudes: Vec<f64>,
    snr_db: Option<f64>,
    samples: Vec<f64>,
}

/// Writes `dataset.json` and `manifest.toml` into `dir`.
///
/// `dataset.json` schema (version 1):
///
/// ```text
/// { "format": "envdamp-dataset", "version": 1,
///   "sample_rate_hz": f64, "n_samples": usize, "frequencies_hz": [f64],
///   "records": [ { "index": usize, "zetas": [f64], "amplitudes": [f64],
///                  "snr_db": f64 | null, "samples": [f64; n_samples] } ] }
/// ```
///
/// Ground-truth envelopes are not stored; they follow exactly from
/// `frequencies_hz`, `zetas` and `amplitudes`.
pub fn write_dataset(dir: &Path, spec: &DatasetSpec, records: &[LabeledRecord]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let file = DatasetFile {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        sample_rate_hz: spec.sample_rate_hz,
        n_samples: spec.n_samples_per_record,
        frequencies_hz: spec.system_frequencies.clone(),
        records: records
            .iter()
            .enumerate()
            .map(|(index, r)| DatasetFileRecord {
                index,
                zetas: r.zetas.clone(),
                amplitudes: r.amplitudes.clone(),
                snr_db: r.snr_db,
                samples: r.record.samples().to_vec(),
            })
            .collect(),
    };
    fs::write(dir.join("dataset.json"), serde_json::to_string(&file)?)?;
    let manifest = toml::to_string(&Manifest {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        spec: spec.clone(),
    })
    .map_err(|e| Error::Config(e.to_string()))?;
    fs::write(dir.join("manifest.toml"), manifest)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    spec: DatasetSpec,
}

/// Reads a `dataset.json` written by [`write_dataset`].
pub fn read_dataset(path: &Path) -> Result<(Vec<f64>, Vec<LabeledRecord>)> {
    let text = fs::read_to_string(path)?;
    let file: DatasetFile = serde_json::from_str(&text)?;
    if file.format != DATASET_FORMAT || file.version != DATASET_VERSION {
        return Err(Error::Config(format!(
            "unsupported dataset format {} v{}",
            file.format, file.version
        )));
    }
    let records = file
        .records
        .into_iter()
        .map(|r| {
            if r.samples.len() != file.n_samples {
                return Err(Error::LengthMismatch {
                    expected: file.n_samples,
                    got: r.samples.len(),
                });
            }
            LabeledRecord::from_labels(
                &file.frequencies_hz,
                r.zetas,
                r.amplitudes,
                r.snr_db,
                Some(r.samples),
                file.n_samples,
                file.sample_rate_hz,
                0,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((file.frequencies_hz, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario1() -> ModalSystem {
        ModalSystem::from_parts(
            &[3.27, 15.56, 26.50],
            &[0.015, 0.010, 0.008],
            &[1.5, 2.5, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn natural_frequency_examples() {
        let m = ModalMode::new(15.56, 0.01, 1.0).unwrap();
        let wn = natural_freq_rad(&m);
        assert!((wn - 97.77125206453776).abs() < 1e-10);
        // back-substitution
        assert!((wn * (1.0f64 - 1e-4).sqrt() - 2.0 * PI * 15.56).abs() < 1e-12);

        let m = ModalMode::new(1.0, 1e-12, 1.0).unwrap();
        assert!((natural_freq_rad(&m) - 2.0 * PI).abs() < 1e-12);

        let m = ModalMode::new(10.0, 0.6, 1.0).unwrap();
        assert!((natural_freq_rad(&m) - 25.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn mode_rejects_out_of_range_damping() {
        assert!(ModalMode::new(1.0, 0.0, 1.0).is_err());
        assert!(ModalMode::new(1.0, 1.0, 1.0).is_err());
        assert!(ModalMode::new(-1.0, 0.1, 1.0).is_err());
        assert!(ModalMode::new(1.0, 0.1, 0.0).is_err());
    }

    #[test]
    fn system_requires_increasing_frequencies() {
        assert!(ModalSystem::from_parts(&[2.0, 1.0], &[0.01, 0.01], &[1.0, 1.0]).is_err());
        assert!(ModalSystem::new(vec![]).is_err());
    }

    #[test]
    fn weakly_damped_mode_is_a_sine() {
        let sys = ModalSystem::from_parts(&[1.0], &[1e-9], &[2.0]).unwrap();
        let rec = synthesize_response(&sys, 400, 100.0).unwrap();
        for (k, &s) in rec.samples().iter().enumerate() {
            let expected = 2.0 * (2.0 * PI * k as f64 / 100.0).sin();
            assert!((s - expected).abs() < 1e-6);
        }
        assert_eq!(rec.samples()[0], 0.0);
    }

    #[test]
    fn synthesis_rejects_modes_above_nyquist() {
        let sys = ModalSystem::from_parts(&[400.0], &[0.01], &[1.0]).unwrap();
        assert!(matches!(
            synthesize_response(&sys, 64, 800.0),
            Err(Error::AboveNyquist { .. })
        ));
    }

    #[test]
    fn scenario_one_spectrum_peaks_at_modal_frequencies() {
        let rec = synthesize_response(&scenario1(), 4096, 800.0).unwrap();
        let spec = crate::spectral::forward_transform(&rec);
        let mags: Vec<f64> = spec.bins()[..2048].iter().map(|c| c.norm()).collect();
        let df = spec.bin_spacing_hz();
        // local maxima above 5% of the global maximum
        let max = mags.iter().cloned().fold(0.0, f64::max);
        let peaks: Vec<f64> = (1..2047)
            .filter(|&k| mags[k] > mags[k - 1] && mags[k] >= mags[k + 1] && mags[k] > 0.05 * max)
            .map(|k| k as f64 * df)
            .collect();
        assert_eq!(peaks.len(), 3, "{peaks:?}");
        for (p, f) in peaks.iter().zip([3.27, 15.56, 26.50]) {
            assert!((p - f).abs() <= df, "{p} vs {f}");
        }
    }

    #[test]
    fn dyadic_envelope() {
        // zeta * wn = ln 2 per second
        let zeta: f64 = 0.05;
        let wn = std::f64::consts::LN_2 / zeta;
        let wd = wn * (1.0 - zeta * zeta).sqrt();
        let mode = ModalMode::new(wd / (2.0 * PI), zeta, 1.0).unwrap();
        let env = true_envelope(&mode, 5, 1.0);
        for (k, v) in env.values().iter().enumerate() {
            assert!((v - 0.5f64.powi(k as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn envelope_decay_ratio() {
        let mode = ModalMode::new(15.56, 0.01, 2.5).unwrap();
        let env = true_envelope(&mode, 1000, 800.0);
        assert_eq!(env.values()[0], 2.5);
        let ratio = env.values()[800] / env.values()[0];
        assert!((ratio - 0.37617059790997687).abs() < 1e-12);
        assert!(env.values().windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
    }

    #[test]
    fn observation_identity_and_shift() {
        let rec = synthesize_response(&scenario1(), 4096, 800.0).unwrap();
        let same = apply_observation(&rec, 1.0, 0.0, None, 3).unwrap();
        assert_eq!(same, rec);

        let shifted = apply_observation(&rec, 2.0, 2.0, None, 3).unwrap();
        assert!(shifted.samples()[..1600].iter().all(|&v| v == 0.0));
        assert_eq!(shifted.samples()[1601], 2.0 * rec.samples()[1]);
        assert_eq!(shifted.len(), rec.len());

        assert!(apply_observation(&rec, 1.0, 5.12, None, 0).is_err());
    }

    #[test]
    fn dataset_is_deterministic_and_in_range() {
        let spec = DatasetSpec {
            system_frequencies: vec![3.27, 15.56, 26.50],
            zeta_range: (0.001, 0.10),
            amplitude_range: (1.0, 5.0),
            snr_range_db: Some((10.0, 30.0)),
            n_samples_per_record: 512,
            sample_rate_hz: 800.0,
            n_records: 50,
            rng_seed: 11,
        };
        let a = generate_dataset(&spec).unwrap();
        let b = generate_dataset(&spec).unwrap();
        assert_eq!(a.len(), 50);
        assert_eq!(a, b);
        for r in &a {
            assert!(r.zetas.iter().all(|&z| (0.001..=0.10).contains(&z)));
            assert!(r.amplitudes.iter().all(|&x| (1.0..=5.0).contains(&x)));
            let snr = r.snr_db.unwrap();
            assert!((10.0..=30.0).contains(&snr));
        }
    }

    #[test]
    fn dataset_roundtrips_through_files() {
        let spec = DatasetSpec {
            system_frequencies: vec![15.56],
            zeta_range: (0.005, 0.02),
            amplitude_range: (1.0, 2.0),
            snr_range_db: None,
            n_samples_per_record: 64,
            sample_rate_hz: 800.0,
            n_records: 3,
            rng_seed: 5,
        };
        let data = generate_dataset(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &spec, &data).unwrap();
        assert!(dir.path().join("manifest.toml").exists());
        let (freqs, back) = read_dataset(&dir.path().join("dataset.json")).unwrap();
        assert_eq!(freqs, vec![15.56]);
        assert_eq!(back, data);
    }
}
