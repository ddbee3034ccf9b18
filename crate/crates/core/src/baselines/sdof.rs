use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::spectral::FrfData;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SdofFitWindowSpec {
    /// Bins on each side of the peak.
    pub half_width_bins: usize,
}

impl Default for SdofFitWindowSpec {
    fn default() -> Self {
        Self { half_width_bins: 3 }
    }
}

impl SdofFitWindowSpec {
    pub fn new(half_width_bins: usize) -> Result<Self> {
        if half_width_bins == 0 {
            return Err(Error::InvalidParameter("half_width_bins must be at least 1".into()));
        }
        Ok(Self { half_width_bins })
    }
}

/// `zeta = (f_hi - f_lo) / (2 f_r)` from linearly interpolated crossings of
/// `|H_peak| / sqrt(2)`.
pub fn half_power_damping(frf: &FrfData, peak_index: usize) -> Result<f64> {
    let m = frf.magnitudes();
    let f = frf.freqs_hz();
    let n = m.len();
    if peak_index >= n {
        return Err(Error::IndexOutOfRange { index: peak_index, len: n });
    }
    let p = peak_index;
    if (p > 0 && m[p - 1] > m[p]) || (p + 1 < n && m[p + 1] > m[p]) {
        return Err(Error::DegeneratePeak(format!("bin {p} is not a local maximum")));
    }
    if !(m[p] > 0.0) || !(f[p] > 0.0) {
        return Err(Error::DegeneratePeak("zero peak magnitude or frequency".into()));
    }
    let level = m[p] / 2f64.sqrt();
    let interp = |a: usize, b: usize| f[a] + (level - m[a]) / (m[b] - m[a]) * (f[b] - f[a]);

    let mut lo = None;
    let mut i = p;
    while i > 0 {
        if m[i - 1] > m[i] {
            return Err(Error::DegeneratePeak("another maximum below the lower crossing".into()));
        }
        if m[i - 1] < level {
            lo = Some(interp(i - 1, i));
            break;
        }
        i -= 1;
    }
    let mut hi = None;
    let mut i = p;
    while i + 1 < n {
        if m[i + 1] > m[i] {
            return Err(Error::DegeneratePeak("another maximum below the upper crossing".into()));
        }
        if m[i + 1] < level {
            hi = Some(interp(i + 1, i));
            break;
        }
        i += 1;
    }
    let lo = lo.ok_or(Error::CrossingNotFound("lower"))?;
    let hi = hi.ok_or(Error::CrossingNotFound("upper"))?;
    Ok((hi - lo) / (2.0 * f[p]))
}

/// Fits `|H_p|^2 / |H|^2 = a u^4 + b u^2 + c`, `u = w / w_peak`, over the
/// window and returns the natural frequency (Hz) and damping ratio.
pub fn sdof_local_fit(frf: &FrfData, peak_index: usize, window: SdofFitWindowSpec) -> Result<(f64, f64)> {
    let hw = window.half_width_bins;
    if hw == 0 {
        return Err(Error::InvalidParameter("half_width_bins must be at least 1".into()));
    }
    if peak_index < hw || peak_index + hw >= frf.len() {
        return Err(Error::IndexOutOfRange {
            index: peak_index,
            len: frf.len(),
        });
    }
    let f = frf.freqs_hz();
    let f_ref = f[peak_index];
    if !(f_ref > 0.0) {
        return Err(Error::DegeneratePeak("peak at zero frequency".into()));
    }
    let mags = frf.magnitudes();
    let hp2 = mags[peak_index] * mags[peak_index];
    let range = peak_index - hw..=peak_index + hw;
    if range.clone().any(|k| !(mags[k] > 0.0)) {
        return Err(Error::DegeneratePeak("zero magnitude in fit window".into()));
    }
    let rows: Vec<(f64, f64)> = range
        .map(|k| {
            let u2 = (f[k] / f_ref).powi(2);
            (u2, hp2 / (mags[k] * mags[k]))
        })
        .collect();

    let coef = if rows.len() == 3 {
        let a = Matrix3::from_fn(|i, j| rows[i].0.powi(2 - j as i32));
        let y = Vector3::new(rows[0].1, rows[1].1, rows[2].1);
        let x = a
            .lu()
            .solve(&y)
            .ok_or_else(|| Error::Singular("three-point system".into()))?;
        [x[0], x[1], x[2]]
    } else {
        let a = DMatrix::from_fn(rows.len(), 3, |i, j| rows[i].0.powi(2 - j as i32));
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
        let x = lstsq(&a, &y)?;
        [x[0], x[1], x[2]]
    };
    let (fn_hz, zeta) = extract_sdof(coef)?;
    Ok((fn_hz * f_ref, zeta))
}

/// Bertocco-Yoshida three-point estimate: [`sdof_local_fit`] on the peak
/// bin and its two neighbours.
pub fn yoshida_three_point(frf: &FrfData, peak_index: usize) -> Result<(f64, f64)> {
    sdof_local_fit(frf, peak_index, SdofFitWindowSpec { half_width_bins: 1 })
}

/// `(u_n, zeta)` from the quartic coefficients, `u_n` in units of the
/// reference frequency.
fn extract_sdof([a, b, c]: [f64; 3]) -> Result<(f64, f64)> {
    if !(a > 0.0 && c > 0.0) || !b.is_finite() {
        return Err(Error::DegeneratePeak(format!("indefinite fit a={a:e} b={b:e} c={c:e}")));
    }
    let un2 = (c / a).sqrt();
    let radicand = (b / (a * un2) + 2.0) / 4.0;
    if !(0.0..1.0).contains(&radicand) {
        return Err(Error::DegeneratePeak(format!("damping radicand {radicand} outside [0, 1)")));
    }
    Ok((un2.sqrt(), radicand.sqrt()))
}
