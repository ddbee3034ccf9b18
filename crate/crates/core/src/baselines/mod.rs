//! Frequency-domain damping identification used as comparison baselines.
//!
//! - [`half_power_damping`]: peak picking with the half-power bandwidth
//! - [`sdof_local_fit`]: least-squares SDOF fit of `1/|H|^2` around a peak
//! - [`yoshida_three_point`]: the same SDOF model solved on three bins
//! - [`lsrf_fit`]: rational fit of the FRF magnitude with SK reweighting
//! - [`plscf_fit`]: common-denominator fit in the discrete `z` basis
//!
//! The three-point method is a reconstruction: the SDOF magnitude identity
//! `1/|H|^2 = k (w^4 + (4 zeta^2 - 2) w_n^2 w^2 + w_n^4)` is solved exactly on
//! the peak bin and its two neighbours.

mod lsrf;
mod plscf;
mod sdof;

use std::f64::consts::PI;

use num_complex::Complex64;
use crate::error::{Error, Result};

pub use lsrf::lsrf_fit;
pub use plscf::{plscf_fit, plscf_fit_with_interval};
pub use sdof::{half_power_damping, sdof_local_fit, yoshida_three_point, SdofFitWindowSpec};

/// Continuous-time poles in rad/s; stable poles have negative real part.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleSet {
    pub poles: Vec<Complex64>,
    pub model_order: usize,
}

impl PoleSet {
    pub fn new(poles: Vec<Complex64>, model_order: usize) -> Self {
        Self { poles, model_order }
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    pub fn len(&self) -> usize {
        self.poles.len()
    }

    /// Stable poles with positive imaginary part, ordered by frequency.
    pub fn oscillatory(&self) -> Vec<Complex64> {
        let mut v: Vec<Complex64> = self
            .poles
            .iter()
            .copied()
            .filter(|p| p.re < 0.0 && p.im > 0.0)
            .collect();
        v.sort_by(|a, b| a.im.total_cmp(&b.im));
        v
    }
}

/// `-Re(p) / |p|`; a real negative pole gives 1.
pub fn pole_zeta(p: Complex64) -> f64 {
    -p.re / p.norm()
}

/// Damped frequency `Im(p) / 2pi` in Hz.
pub fn pole_freq_hz(p: Complex64) -> f64 {
    p.im / (2.0 * PI)
}

/// Stable pole whose frequency is nearest `target_freq_hz` within 20 %
/// relative; ties go to the lower frequency.
pub fn match_pole_to_mode(poles: &PoleSet, target_freq_hz: f64) -> Result<(Complex64, f64)> {
    if poles.is_empty() {
        return Err(Error::NoPoleNearTarget { target_hz: target_freq_hz });
    }
    let window = 0.2 * target_freq_hz;
    let mut best: Option<(Complex64, f64)> = None;
    for p in poles.oscillatory() {
        let d = (pole_freq_hz(p) - target_freq_hz).abs();
        if d > window {
            continue;
        }
        // oscillatory() is sorted ascending, so a strict improvement keeps
        // the lower pole on (rounding-level) ties
        if best.is_none_or(|(_, bd)| d < bd - 1e-9 * target_freq_hz) {
            best = Some((p, d));
        }
    }
    best.map(|(p, _)| (p, pole_zeta(p)))
        .ok_or(Error::NoPoleNearTarget { target_hz: target_freq_hz })
}

/// Pole of a mode with damped frequency `f_d` and damping ratio `zeta`.
pub fn modal_pole(damped_freq_hz: f64, zeta: f64) -> Complex64 {
    let wd = 2.0 * PI * damped_freq_hz;
    let wn = wd / (1.0 - zeta * zeta).sqrt();
    Complex64::new(-zeta * wn, wd)
}
