//! Common-denominator least-squares fit in the discrete frequency basis
//! `z = exp(i w dt)` (single reference).
//!
//! Each FRF gets its own complex numerator; the real denominator is shared.
//! The numerators are eliminated in closed form, leaving the reduced normal
//! matrix `M = sum_o Re(T_o - S_o^H R^-1 S_o)`, which is solved with the
//! highest denominator coefficient fixed to one.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::PoleSet;
use crate::error::{Error, Result};
use crate::linalg::poly_roots;
use crate::spectral::FrfData;

/// Fits with `dt = 1 / (2 f_max)` over the common grid.
pub fn plscf_fit(frfs: &[FrfData], model_order: usize) -> Result<PoleSet> {
    let first = frfs.first().ok_or(Error::Empty("FRF list"))?;
    let f_max = first.freqs_hz().iter().cloned().fold(0.0, f64::max);
    if !(f_max > 0.0) {
        return Err(Error::InvalidParameter("FRF grid has no positive frequency".into()));
    }
    plscf_fit_with_interval(frfs, model_order, 1.0 / (2.0 * f_max))
}

/// As [`plscf_fit`] with an explicit basis interval `dt` (s).
pub fn plscf_fit_with_interval(frfs: &[FrfData], model_order: usize, dt: f64) -> Result<PoleSet> {
    let first = frfs.first().ok_or(Error::Empty("FRF list"))?;
    if model_order == 0 {
        return Err(Error::InvalidParameter("model_order must be positive".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    let freqs = first.freqs_hz();
    for f in frfs {
        if f.freqs_hz() != freqs {
            return Err(Error::InvalidParameter("FRFs must share a frequency grid".into()));
        }
    }
    let k = freqs.len();
    let m = model_order + 1;
    if k < m {
        return Err(Error::Singular(format!("{k} bins cannot determine order {model_order}")));
    }

    let basis = DMatrix::<Complex64>::from_fn(k, m, |i, j| {
        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * freqs[i] * dt * j as f64)
    });
    let r = basis.adjoint() * &basis;
    let r_chol = r
        .cholesky()
        .ok_or_else(|| Error::Singular("numerator normal matrix is not positive definite".into()))?;

    let mut reduced = DMatrix::<f64>::zeros(m, m);
    for frf in frfs {
        let h = frf.values();
        // Y = -diag(H) * basis
        let y = DMatrix::<Complex64>::from_fn(k, m, |i, j| -h[i] * basis[(i, j)]);
        let s = basis.adjoint() * &y;
        let t = y.adjoint() * &y;
        let rs = r_chol.solve(&s);
        let block = t - s.adjoint() * rs;
        reduced += block.map(|v| v.re);
    }

    let n = model_order;
    let lhs = reduced.view((0, 0), (n, n)).into_owned();
    let rhs = -reduced.view((0, n), (n, 1)).into_owned();
    let alpha = lhs
        .clone()
        .lu()
        .solve(&rhs)
        .filter(|a| a.iter().all(|v| v.is_finite()))
        .or_else(|| lhs.svd(true, true).solve(&rhs, 1e-14).ok())
        .ok_or_else(|| Error::Singular("reduced denominator system".into()))?;

    let mut coeffs: Vec<f64> = alpha.iter().copied().collect();
    coeffs.push(1.0);
    let mut poles: Vec<Complex64> = poly_roots(&coeffs)?
        .into_iter()
        .filter(|z| z.norm() > 0.0)
        .map(|z| z.ln() / dt)
        .filter(|p| p.re < 0.0 && p.re.is_finite() && p.im.is_finite())
        .collect();
    poles.sort_by(|a, b| a.im.total_cmp(&b.im));
    if poles.is_empty() {
        return Err(Error::Singular("no stable poles".into()));
    }
    Ok(PoleSet::new(poles, model_order))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{match_pole_to_mode, modal_pole, pole_zeta};
    use std::f64::consts::PI;

    #[test]
    fn unit_circle_pole_has_zero_damping() {
        let dt = 0.01;
        let z = Complex64::from_polar(1.0, 0.3);
        let p = z.ln() / dt;
        assert!(p.re.abs() < 1e-12);
        assert!(pole_zeta(p).abs() < 1e-12);
    }

    #[test]
    fn recovers_two_mode_poles() {
        let pa = modal_pole(10.0, 0.02);
        let pb = modal_pole(20.0, 0.01);
        let freqs: Vec<f64> = (1..300).map(|k| k as f64 * 0.1).collect();
        let vals = freqs
            .iter()
            .map(|&f| {
                let s = Complex64::new(0.0, 2.0 * PI * f);
                1.0 / ((s - pa) * (s - pa.conj())) + 2.0 / ((s - pb) * (s - pb.conj()))
            })
            .collect();
        let frf = FrfData::new(freqs, vals).unwrap();
        let set = plscf_fit(&[frf], 8).unwrap();
        let (_, za) = match_pole_to_mode(&set, 10.0).unwrap();
        let (_, zb) = match_pole_to_mode(&set, 20.0).unwrap();
        assert!((za - 0.02).abs() / 0.02 < 0.03, "{za}");
        assert!((zb - 0.01).abs() / 0.01 < 0.03, "{zb}");
    }

    #[test]
    fn rejects_mismatched_grids() {
        let a = FrfData::new(vec![1.0, 2.0, 3.0], vec![Complex64::new(1.0, 0.0); 3]).unwrap();
        let b = FrfData::new(vec![1.0, 2.0, 4.0], vec![Complex64::new(1.0, 0.0); 3]).unwrap();
        assert!(plscf_fit(&[a, b], 2).is_err());
        assert!(plscf_fit(&[], 2).is_err());
    }
}
