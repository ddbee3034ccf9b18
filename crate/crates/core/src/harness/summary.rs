//! Per-cell statistics of a result table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::scenario::Method;
use super::sweep::ResultRow;
use crate::error::{Error, Result};

/// Statistics of one `(scenario, method, snr)` cell. Location and error
/// fields are `None` when the cell has no valid estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub scenario: String,
    pub method: Method,
    /// `None` is noiseless.
    pub snr_db: Option<f64>,
    pub zeta_true: f64,
    pub n_rows: usize,
    pub n_valid: usize,
    pub valid_fraction: f64,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    /// `100 * sqrt(mean((zeta_hat - zeta_true)^2))`, percentage points.
    pub rmse_percent: Option<f64>,
    /// Median of `|zeta_hat - zeta_true|`.
    pub median_abs_error: Option<f64>,
}

/// Linear-interpolation quantile of sorted data (`q` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Groups rows by `(scenario, method, snr)`. `zeta_true` maps a scenario
/// name to its true target damping ratio.
pub fn summarize(rows: &[ResultRow], zeta_true: &dyn Fn(&str) -> Option<f64>) -> Result<Vec<SummaryCell>> {
    if rows.is_empty() {
        return Err(Error::Empty("result rows"));
    }
    let mut groups: BTreeMap<(String, u64, Method), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        // total order on snr with noiseless last
        let key = r.snr_db.map_or(u64::MAX, order_key);
        groups.entry((r.scenario.clone(), key, r.method)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((scenario, _, method), cell)| {
            let truth = zeta_true(&scenario)
                .ok_or_else(|| Error::Config(format!("no true damping known for scenario '{scenario}'")))?;
            let mut vals: Vec<f64> = cell.iter().filter_map(|r| r.zeta_hat).collect();
            vals.sort_by(f64::total_cmp);
            let mut abs_err: Vec<f64> = vals.iter().map(|v| (v - truth).abs()).collect();
            abs_err.sort_by(f64::total_cmp);
            let some = !vals.is_empty();
            let rmse = some.then(|| {
                let sq: Vec<f64> = vals.iter().map(|v| (v - truth).powi(2)).collect();
                100.0 * (crate::linalg::pairwise_sum(&sq) / sq.len() as f64).sqrt()
            });
            Ok(SummaryCell {
                snr_db: cell[0].snr_db,
                scenario,
                method,
                zeta_true: truth,
                n_rows: cell.len(),
                n_valid: vals.len(),
                valid_fraction: vals.len() as f64 / cell.len() as f64,
                median: some.then(|| quantile_sorted(&vals, 0.5)),
                q1: some.then(|| quantile_sorted(&vals, 0.25)),
                q3: some.then(|| quantile_sorted(&vals, 0.75)),
                rmse_percent: rmse,
                median_abs_error: some.then(|| quantile_sorted(&abs_err, 0.5)),
            })
        })
        .collect()
}

/// Maps an `f64` to a `u64` with the same ordering.
fn order_key(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelForm;

    fn row(method: Method, snr: Option<f64>, trial: usize, z: Option<f64>) -> ResultRow {
        ResultRow {
            scenario: "s1".into(),
            method,
            snr_db: snr,
            trial,
            zeta_hat: z,
            wall_ms: None,
        }
    }

    const M: Method = Method::Envelope(KernelForm::WelchWindow);

    #[test]
    fn exact_rows_have_zero_rmse() {
        let rows: Vec<_> = (0..4).map(|t| row(M, Some(10.0), t, Some(0.01))).collect();
        let s = summarize(&rows, &|_| Some(0.01)).unwrap();
        assert_eq!(s[0].rmse_percent, Some(0.0));
        assert_eq!(s[0].valid_fraction, 1.0);
    }

    #[test]
    fn symmetric_error_rmse() {
        let d = 0.002;
        let rows = vec![row(M, Some(0.0), 0, Some(0.01 + d)), row(M, Some(0.0), 1, Some(0.01 - d))];
        let s = summarize(&rows, &|_| Some(0.01)).unwrap();
        assert!((s[0].rmse_percent.unwrap() - 100.0 * d).abs() < 1e-12);
    }

    #[test]
    fn quartiles_match_sorting() {
        let vals = [0.013, 0.009, 0.011, 0.010, 0.020];
        let rows: Vec<_> = vals.iter().enumerate().map(|(t, &v)| row(M, Some(5.0), t, Some(v))).collect();
        let s = &summarize(&rows, &|_| Some(0.01)).unwrap()[0];
        // sorted: 0.009 0.010 0.011 0.013 0.020, positions 1, 2, 3
        assert_eq!(s.q1, Some(0.010));
        assert_eq!(s.median, Some(0.011));
        assert_eq!(s.q3, Some(0.013));
    }

    #[test]
    fn invalid_cells_are_absent_and_grouping_orders_snr() {
        let rows = vec![
            row(Method::Plscf, Some(5.0), 0, None),
            row(Method::Plscf, None, 0, Some(0.01)),
            row(Method::Plscf, Some(-5.0), 0, Some(0.012)),
        ];
        let s = summarize(&rows, &|_| Some(0.01)).unwrap();
        assert_eq!(s.iter().map(|c| c.snr_db).collect::<Vec<_>>(), vec![Some(-5.0), Some(5.0), None]);
        assert!(s[1].median.is_none() && s[1].rmse_percent.is_none());
        assert_eq!(s[1].valid_fraction, 0.0);
        assert!(summarize(&[], &|_| Some(0.01)).is_err());
    }
}
