//! The nine envelope estimators and envelope extraction.
//!
//! Every estimator is realized as a one-sided (analytic) frequency response
//! of the record length, centered on a mode's damped frequency and scaled to
//! unit peak magnitude. Frequency-domain filters place their real shape
//! directly on the positive-frequency bins. Time-domain windows are
//! modulated to the center frequency, centered at sample 0 of the circular
//! buffer (zero phase, so the envelope has no group delay), transformed, and
//! stripped of their negative-frequency residue.
//!
//! Width parameter `theta` per form:
//!
//! | form              | theta        | shape on `x = t/L` or `w/L`, `|x| <= 1/2` |
//! |-------------------|--------------|-------------------------------------------|
//! | `GaussianWindow`  | sigma (s)    | `exp(-t^2 / (2 sigma^2))`                 |
//! | `RectWindow`      | L_t (s)      | `1`                                       |
//! | `ShannonFilter`   | L_w (rad/s)  | `1`                                       |
//! | `Triangle*`       | L (s, rad/s) | `1 - |2x|`                                |
//! | `Welch*`          | L (s, rad/s) | `1 - (2x)^2`                              |
//! | `Blackman*`       | L (s, rad/s) | `a0 - a1 cos(2pi(x+1/2)) + a2 cos(4pi(x+1/2))` |

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_model::TimeRecord;
use crate::spectral::{self, fft_in_place};

pub const BLACKMAN_A0: f64 = 7938.0 / 18608.0;
pub const BLACKMAN_A1: f64 = 9240.0 / 18608.0;
pub const BLACKMAN_A2: f64 = 1430.0 / 18608.0;

/// Slack on the closed rect boundary `|x| <= 1/2`.
const RECT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelForm {
    GaussianWindow,
    RectWindow,
    ShannonFilter,
    TriangleFilter,
    TriangleWindow,
    WelchFilter,
    WelchWindow,
    BlackmanFilter,
    BlackmanWindow,
}

impl KernelForm {
    pub const ALL: [KernelForm; 9] = [
        KernelForm::GaussianWindow,
        KernelForm::RectWindow,
        KernelForm::ShannonFilter,
        KernelForm::TriangleFilter,
        KernelForm::TriangleWindow,
        KernelForm::WelchFilter,
        KernelForm::WelchWindow,
        KernelForm::BlackmanFilter,
        KernelForm::BlackmanWindow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelForm::GaussianWindow => "gaussian_window",
            KernelForm::RectWindow => "rect_window",
            KernelForm::ShannonFilter => "shannon_filter",
            KernelForm::TriangleFilter => "triangle_filter",
            KernelForm::TriangleWindow => "triangle_window",
            KernelForm::WelchFilter => "welch_filter",
            KernelForm::WelchWindow => "welch_window",
            KernelForm::BlackmanFilter => "blackman_filter",
            KernelForm::BlackmanWindow => "blackman_window",
        }
    }

    /// True for forms defined in the frequency domain (theta in rad/s).
    pub fn is_filter(self) -> bool {
        matches!(
            self,
            KernelForm::ShannonFilter
                | KernelForm::TriangleFilter
                | KernelForm::WelchFilter
                | KernelForm::BlackmanFilter
        )
    }

    /// Compact shape on `|x| <= 1/2` (zero outside). Not used for the Gaussian.
    fn shape(self, x: f64) -> f64 {
        if x.abs() > 0.5 + RECT_EPS {
            return 0.0;
        }
        let x = x.clamp(-0.5, 0.5);
        match self {
            KernelForm::RectWindow | KernelForm::ShannonFilter => 1.0,
            KernelForm::TriangleFilter | KernelForm::TriangleWindow => 1.0 - (2.0 * x).abs(),
            KernelForm::WelchFilter | KernelForm::WelchWindow => 1.0 - (2.0 * x) * (2.0 * x),
            KernelForm::BlackmanFilter | KernelForm::BlackmanWindow => {
                let u = x + 0.5;
                BLACKMAN_A0 - BLACKMAN_A1 * (2.0 * PI * u).cos() + BLACKMAN_A2 * (4.0 * PI * u).cos()
            }
            KernelForm::GaussianWindow => unreachable!("gaussian has no compact shape"),
        }
    }
}

impl fmt::Display for KernelForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        KernelForm::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown kernel form '{s}'")))
    }
}

/// Fully specified envelope estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub form: KernelForm,
    pub theta: f64,
    pub center_freq_hz: f64,
}

impl KernelSpec {
    pub fn new(form: KernelForm, theta: f64, center_freq_hz: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidParameter(format!("theta must be positive, got {theta}")));
        }
        if !(center_freq_hz > 0.0 && center_freq_hz.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "center frequency must be positive, got {center_freq_hz}"
            )));
        }
        Ok(Self {
            form,
            theta,
            center_freq_hz,
        })
    }
}

/// Nonnegative amplitude envelope with an optional evaluation segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    values: Vec<f64>,
    sample_rate_hz: f64,
    segment: Option<(usize, usize)>,
}

impl Envelope {
    pub fn new(values: Vec<f64>, sample_rate_hz: f64) -> Self {
        Self {
            values,
            sample_rate_hz,
            segment: None,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn segment(&self) -> Option<(usize, usize)> {
        self.segment
    }

    pub fn with_segment(mut self, segment: (usize, usize)) -> Result<Self> {
        let (n1, n2) = segment;
        if !(n1 < n2 && n2 < self.values.len()) {
            return Err(Error::InvalidParameter(format!(
                "segment ({n1}, {n2}) invalid for envelope of length {}",
                self.values.len()
            )));
        }
        self.segment = Some(segment);
        Ok(self)
    }

    /// Index of the first maximum.
    pub fn argmax(&self) -> usize {
        argmax(&self.values)
    }

    pub fn scaled(&self, c: f64) -> Envelope {
        Envelope {
            values: self.values.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }
}

pub(crate) fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[best] {
            best = i;
        }
    }
    best
}

/// Builds the one-sided, unit-peak frequency response of `spec` on an
/// `n`-point DFT grid at sample rate `fs`.
pub fn build_freq_response(spec: &KernelSpec, n: usize, fs: f64) -> Result<Vec<Complex64>> {
    if n < 2 || !(fs > 0.0) {
        return Err(Error::InvalidParameter("grid needs n >= 2 and fs > 0".into()));
    }
    if spec.center_freq_hz >= fs / 2.0 {
        return Err(Error::KernelSupport(format!(
            "center {} Hz is not below Nyquist",
            spec.center_freq_hz
        )));
    }
    let mut h = if spec.form.is_filter() {
        filter_response(spec, n, fs)?
    } else {
        window_response(spec, n, fs)?
    };
    let peak = h.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::KernelSupport("empty passband on this grid".into()));
    }
    let inv = 1.0 / peak;
    for v in h.iter_mut() {
        *v *= inv;
    }
    Ok(h)
}

fn filter_response(spec: &KernelSpec, n: usize, fs: f64) -> Result<Vec<Complex64>> {
    let width = spec.theta;
    let center = 2.0 * PI * spec.center_freq_hz;
    if width / 2.0 >= center {
        return Err(Error::KernelSupport(format!(
            "half-width {} rad/s reaches negative frequencies (center {center} rad/s)",
            width / 2.0
        )));
    }
    // work in bin units so boundary bins are hit exactly
    let bin_rad = 2.0 * PI * fs / n as f64;
    let center_bins = center / bin_rad;
    let width_bins = width / bin_rad;
    let mut h = vec![Complex64::new(0.0, 0.0); n];
    for (k, v) in h.iter_mut().enumerate().take(n / 2 + 1) {
        let x = (k as f64 - center_bins) / width_bins;
        *v = Complex64::new(spec.form.shape(x), 0.0);
    }
    Ok(h)
}

fn window_response(spec: &KernelSpec, n: usize, fs: f64) -> Result<Vec<Complex64>> {
    let carrier = 2.0 * PI * spec.center_freq_hz;
    let mut h = vec![Complex64::new(0.0, 0.0); n];
    for (j, v) in h.iter_mut().enumerate() {
        // signed circular offset from sample 0
        let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
        let t = m / fs;
        let w = match spec.form {
            KernelForm::GaussianWindow => (-t * t / (2.0 * spec.theta * spec.theta)).exp(),
            form => form.shape(t / spec.theta),
        };
        if w != 0.0 {
            *v = Complex64::from_polar(w, carrier * t);
        }
    }
    fft_in_place(&mut h);

    let bandwidth = half_power_bandwidth_hz(&h, fs);
    if bandwidth >= spec.center_freq_hz {
        return Err(Error::KernelSupport(format!(
            "-3 dB bandwidth {bandwidth:.4} Hz is not below the center frequency {} Hz",
            spec.center_freq_hz
        )));
    }
    for v in h.iter_mut().skip(n / 2 + 1) {
        *v = Complex64::new(0.0, 0.0);
    }
    Ok(h)
}

/// Width of the contiguous region around the magnitude peak where the
/// response stays at or above `peak / sqrt(2)`, walking circularly.
fn half_power_bandwidth_hz(h: &[Complex64], fs: f64) -> f64 {
    let n = h.len();
    let mags: Vec<f64> = h.iter().map(|v| v.norm()).collect();
    let p = argmax(&mags);
    let level = mags[p] / 2f64.sqrt();
    let mut span = 1;
    let mut right = 1;
    while right < n && mags[(p + right) % n] >= level {
        right += 1;
        span += 1;
    }
    let mut left = 1;
    while left < n - right + 1 && mags[(p + n - left) % n] >= level {
        left += 1;
        span += 1;
    }
    span.min(n) as f64 * fs / n as f64
}

/// `|x * psi|`: magnitude of the analytic band-pass output.
pub fn extract_envelope(record: &TimeRecord, spec: &KernelSpec) -> Result<Envelope> {
    let h = build_freq_response(spec, record.len(), record.sample_rate_hz())?;
    let y = spectral::fast_filter(record, &h)?;
    Ok(Envelope::new(
        y.iter().map(|v| v.norm()).collect(),
        record.sample_rate_hz(),
    ))
}

/// Envelope of a record given its precomputed spectrum and a prebuilt
/// frequency response.
pub fn envelope_from_spectrum(
    spectrum: &[Complex64],
    freq_response: &[Complex64],
    fs: f64,
) -> Result<Envelope> {
    let y = spectral::filter_spectrum(spectrum, freq_response)?;
    Ok(Envelope::new(y.iter().map(|v| v.norm()).collect(), fs))
}

/// Divides the envelope by its value at the segment start.
pub fn normalize_to_segment_start(env: &Envelope) -> Result<Envelope> {
    let (n1, _) = env
        .segment
        .ok_or_else(|| Error::InvalidParameter("envelope has no segment".into()))?;
    let v = env.values[n1];
    if !(v > 0.0) {
        return Err(Error::ZeroAtSegmentStart);
    }
    Ok(env.scaled(1.0 / v))
}

type CacheKey = (KernelForm, u64, u64, usize, u64);

/// Thread-safe memo of built frequency responses keyed by
/// `(form, theta, center, n, fs)`.
#[derive(Debug, Default)]
pub struct KernelCache {
    map: RwLock<HashMap<CacheKey, Arc<Vec<Complex64>>>>,
}

impl KernelCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_build(&self, spec: &KernelSpec, n: usize, fs: f64) -> Result<Arc<Vec<Complex64>>> {
        let key = (
            spec.form,
            spec.theta.to_bits(),
            spec.center_freq_hz.to_bits(),
            n,
            fs.to_bits(),
        );
        if let Some(h) = self.map.read().expect("kernel cache poisoned").get(&key) {
            return Ok(Arc::clone(h));
        }
        let h = Arc::new(build_freq_response(spec, n, fs)?);
        self.map
            .write()
            .expect("kernel cache poisoned")
            .entry(key)
            .or_insert_with(|| Arc::clone(&h));
        Ok(h)
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("kernel cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
