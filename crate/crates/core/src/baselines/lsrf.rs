//! Least-squares rational fit of the FRF magnitude.
//!
//! The squared magnitude of `N(s)/D(s)` on the imaginary axis is a real
//! rational function of `x = w^2`: `|H|^2 = P(x)/Q(x)` with
//! `Q(x) = D(iw) D(-iw)`. `P` and a monic `Q` are fitted by linear least
//! squares with Sanathanan-Koerner reweighting, and every root `x_r` of `Q`
//! maps back to the stable pole `s = +-i sqrt(x_r)` with negative real part.
//! Both polynomials are expanded in Chebyshev polynomials of the band mapped
//! onto `[-1, 1]`, which keeps low-frequency roots well conditioned when the
//! model order exceeds the number of modes present.
//! Working with the magnitude makes the fit blind to any residual linear
//! phase left by an imperfect impact-time estimate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::PoleSet;
use crate::error::{Error, Result};
use crate::linalg::{lstsq, poly_roots};
use crate::spectral::FrfData;

/// Fits a rational model with `den_order` poles and a numerator of degree
/// `num_order` to the FRF magnitude and returns its stable poles (rad/s).
pub fn lsrf_fit(frf: &FrfData, num_order: usize, den_order: usize, n_iters: usize) -> Result<PoleSet> {
    if den_order == 0 {
        return Err(Error::InvalidParameter("den_order must be positive".into()));
    }
    if n_iters == 0 {
        return Err(Error::InvalidParameter("n_iters must be positive".into()));
    }
    let freqs = frf.freqs_hz();
    if freqs.iter().any(|&f| !(f > 0.0)) {
        return Err(Error::InvalidParameter("FRF grid must exclude DC".into()));
    }
    let n_unknowns = num_order + 1 + den_order;
    if freqs.len() < n_unknowns {
        return Err(Error::Singular(format!(
            "{} bins cannot determine {n_unknowns} coefficients",
            freqs.len()
        )));
    }
    let f_max = freqs.iter().cloned().fold(0.0, f64::max);
    let x: Vec<f64> = freqs.iter().map(|f| (f / f_max).powi(2)).collect();
    let x_lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let half = (1.0 - x_lo) / 2.0;
    if !(half > 0.0) {
        return Err(Error::InvalidParameter("FRF band has zero width".into()));
    }
    let mid = (1.0 + x_lo) / 2.0;
    let u: Vec<f64> = x.iter().map(|v| (v - mid) / half).collect();
    let mags = frf.magnitudes();
    let peak = mags.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::ZeroSignal);
    }
    let y: Vec<f64> = mags.iter().map(|m| (m / peak).powi(2)).collect();

    let rows = u.len();
    let degree = num_order.max(den_order);
    let cheb: Vec<Vec<f64>> = u.iter().map(|&v| chebyshev_row(v, degree)).collect();
    let mut weights = vec![1.0; rows];
    let mut q = vec![0.0; den_order];
    for _ in 0..n_iters {
        let a = DMatrix::from_fn(rows, n_unknowns, |i, j| {
            let w = weights[i];
            if j <= num_order {
                w * cheb[i][j]
            } else {
                -w * y[i] * cheb[i][j - num_order - 1]
            }
        });
        let b = DVector::from_iterator(rows, (0..rows).map(|i| weights[i] * y[i] * cheb[i][den_order]));
        let sol = lstsq(&a, &b)?;
        q.copy_from_slice(&sol.as_slice()[num_order + 1..]);
        for (w, row) in weights.iter_mut().zip(&cheb) {
            let qv = (row[den_order] + q.iter().zip(row).map(|(c, t)| c * t).sum::<f64>()).abs();
            *w = if qv > 0.0 { 1.0 / qv } else { 1.0 };
        }
    }

    let mut series = q.clone();
    series.push(1.0);
    let w_max = 2.0 * std::f64::consts::PI * f_max;
    let mut poles: Vec<Complex64> = poly_roots(&chebyshev_to_monomial(&series))?
        .into_iter()
        .map(|ur| {
            let xr = ur * half + mid;
            let s = Complex64::i() * xr.sqrt();
            let s = if s.re < 0.0 { s } else { -s };
            s * w_max
        })
        .filter(|s| s.re < 0.0 && s.re.is_finite() && s.im.is_finite())
        .collect();
    poles.sort_by(|a, b| a.im.total_cmp(&b.im));
    Ok(PoleSet::new(poles, den_order))
}

/// `[T_0(u), ..., T_d(u)]`.
fn chebyshev_row(u: f64, d: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(d + 1);
    t.push(1.0);
    if d >= 1 {
        t.push(u);
    }
    for k in 2..=d {
        t.push(2.0 * u * t[k - 1] - t[k - 2]);
    }
    t
}

/// Monomial coefficients of `sum c_k T_k(u)`.
fn chebyshev_to_monomial(c: &[f64]) -> Vec<f64> {
    let d = c.len() - 1;
    let mut out = vec![0.0; d + 1];
    // monomial coefficients of T_{k-1} and T_k
    let mut prev = vec![1.0];
    let mut cur = vec![0.0, 1.0];
    out[0] += c[0];
    if d >= 1 {
        out[1] += c[1];
    }
    for &ck in c.iter().skip(2) {
        let mut next = vec![0.0; cur.len() + 1];
        for (i, v) in cur.iter().enumerate() {
            next[i + 1] += 2.0 * v;
        }
        for (i, v) in prev.iter().enumerate() {
            next[i] -= v;
        }
        for (o, v) in out.iter_mut().zip(&next) {
            *o += ck * v;
        }
        prev = std::mem::replace(&mut cur, next);
    }
    out
}
