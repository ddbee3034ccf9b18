//! Small dense linear-algebra helpers shared by the fitters.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Condition-number estimate above which the normal equations are abandoned
/// for an SVD solve.
const NORMAL_EQ_COND_LIMIT: f64 = 1e8;

/// Sums with a fixed pairwise tree so the result depends only on the order
/// of `x`, not on how the caller parallelized its production.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if x.len() <= LEAF {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

/// Least-squares solution of `a x ~= b`.
///
/// Columns are scaled to unit norm first. The scaled normal equations are
/// solved by Cholesky when their estimated condition number is modest;
/// otherwise a truncated SVD of the scaled matrix is used.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(Error::LengthMismatch { expected: m, got: b.len() });
    }
    if m < n || n == 0 {
        return Err(Error::Singular(format!("underdetermined system {m}x{n}")));
    }
    let mut scaled = a.clone();
    let mut scales = vec![1.0; n];
    for (j, s) in scales.iter_mut().enumerate() {
        let norm = scaled.column(j).norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Singular(format!("column {j} is zero or non-finite")));
        }
        *s = norm;
        scaled.column_mut(j).scale_mut(1.0 / norm);
    }

    let normal = scaled.tr_mul(&scaled);
    let rhs = scaled.tr_mul(b);
    let mut y = None;
    if let Some(chol) = normal.clone().cholesky() {
        let d = chol.l_dirty().diagonal();
        let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if lo > 0.0 && (hi / lo).powi(2) < NORMAL_EQ_COND_LIMIT {
            y = Some(chol.solve(&rhs));
        }
    }
    let y = match y {
        Some(y) => y,
        None => {
            let svd = scaled.svd(true, true);
            let smax = svd.singular_values.max();
            svd.solve(b, smax * 1e-13)
                .map_err(|e| Error::Singular(e.to_string()))?
        }
    };
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("non-finite least-squares solution".into()));
    }
    Ok(DVector::from_iterator(n, y.iter().zip(&scales).map(|(v, s)| v / s)))
}

/// Roots of the real polynomial `c[0] + c[1] x + ... + c[d] x^d` from the
/// eigenvalues of its companion matrix.
pub fn poly_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && c.last() == Some(&0.0) {
        c.pop();
    }
    let d = c.len() - 1;
    if d == 0 {
        return Ok(Vec::new());
    }
    let lead = c[d];
    if !lead.is_finite() || c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("non-finite polynomial coefficients".into()));
    }
    let mut comp = DMatrix::<f64>::zeros(d, d);
    for i in 1..d {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..d {
        comp[(i, d - 1)] = -c[i] / lead;
    }
    Ok(comp.complex_eigenvalues().iter().copied().collect())
}
