//! From observed records to a damping ratio: impact detection, envelope
//! extraction, alignment at the envelope peak, ensemble averaging and a
//! log-linear regression over the evaluation segment.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{argmax, build_freq_response, envelope_from_spectrum, extract_envelope, Envelope, KernelForm, KernelSpec};
use crate::linalg::pairwise_sum;
use crate::segment::{select_segment, SegmentPolicy};
use crate::signal_model::TimeRecord;
use crate::spectral::forward_transform;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_records: usize,
    pub kernel: KernelSpec,
    pub segment_policy: SegmentPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingEstimate {
    pub zeta: f64,
    /// Slope of `ln env` against time, 1/s.
    pub slope: f64,
    pub intercept: f64,
    pub segment: (usize, usize),
    pub r_squared: f64,
}

/// Damping ratio from a log-envelope slope `s = -zeta * w_n` at damped
/// frequency `f_d`, using `w_n = w_d / sqrt(1 - zeta^2)` exactly.
pub fn zeta_from_slope(slope: f64, damped_freq_hz: f64) -> f64 {
    let r = -slope / (2.0 * PI * damped_freq_hz);
    r / (1.0 + r * r).sqrt()
}

/// Index of the peak of the Gaussian-window envelope of `record`.
pub fn estimate_impact_index(record: &TimeRecord, reference_kernel: &KernelSpec) -> Result<usize> {
    if reference_kernel.form != KernelForm::GaussianWindow {
        return Err(Error::InvalidParameter(format!(
            "impact detection needs a gaussian_window reference, got {}",
            reference_kernel.form
        )));
    }
    if record.samples().iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroSignal);
    }
    Ok(extract_envelope(record, reference_kernel)?.argmax())
}

/// Shifts every envelope so its peak lands on the earliest peak index of
/// the set and averages over the samples all shifted envelopes share.
pub fn align_and_average(envelopes: &[Envelope]) -> Result<Envelope> {
    let first = envelopes.first().ok_or(Error::Empty("envelope list"))?;
    let fs = first.sample_rate_hz();
    let n = first.len();
    for e in envelopes {
        if e.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: e.len() });
        }
        if e.sample_rate_hz() != fs {
            return Err(Error::InvalidParameter("envelopes have different sample rates".into()));
        }
    }
    let peaks: Vec<usize> = envelopes.iter().map(Envelope::argmax).collect();
    let lo = *peaks.iter().min().expect("nonempty");
    let hi = *peaks.iter().max().expect("nonempty");
    let len = n - (hi - lo);
    let count = envelopes.len() as f64;
    let mut column = vec![0.0; envelopes.len()];
    let values = (0..len)
        .map(|k| {
            for ((c, e), &p) in column.iter_mut().zip(envelopes).zip(&peaks) {
                *c = e.values()[k + p - lo];
            }
            pairwise_sum(&column) / count
        })
        .collect();
    Ok(Envelope::new(values, fs))
}

/// Ordinary least squares of `ln env` on time over the selected segment.
pub fn fit_damping(env: &Envelope, mode_freq_hz: f64, policy: &SegmentPolicy) -> Result<DampingEstimate> {
    let segment = select_segment(env, mode_freq_hz, policy)?;
    fit_on_segment(env, mode_freq_hz, segment)
}

/// As [`fit_damping`] with a caller-chosen segment.
pub fn fit_on_segment(env: &Envelope, mode_freq_hz: f64, segment: (usize, usize)) -> Result<DampingEstimate> {
    let (n1, n2) = segment;
    if n1 >= n2 || n2 >= env.len() {
        return Err(Error::IndexOutOfRange { index: n2, len: env.len() });
    }
    let vals = &env.values()[n1..=n2];
    if vals.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::NonPositiveEnvelope);
    }
    let fs = env.sample_rate_hz();
    let m = vals.len() as f64;
    // time measured from N1 keeps the design well conditioned
    let t: Vec<f64> = (0..vals.len()).map(|k| k as f64 / fs).collect();
    let y: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
    let tm = pairwise_sum(&t) / m;
    let ym = pairwise_sum(&y) / m;
    let dt: Vec<f64> = t.iter().map(|v| v - tm).collect();
    let dy: Vec<f64> = y.iter().map(|v| v - ym).collect();
    let sxx = pairwise_sum(&dt.iter().map(|v| v * v).collect::<Vec<_>>());
    let sxy = pairwise_sum(&dt.iter().zip(&dy).map(|(a, b)| a * b).collect::<Vec<_>>());
    let syy = pairwise_sum(&dy.iter().map(|v| v * v).collect::<Vec<_>>());
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::NonDecaying(slope));
    }
    let intercept = ym - slope * (tm + n1 as f64 / fs);
    let r_squared = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
    Ok(DampingEstimate {
        zeta: zeta_from_slope(slope, mode_freq_hz),
        slope,
        intercept,
        segment,
        r_squared,
    })
}

/// Align, average and fit a set of already extracted envelopes.
pub fn estimate_from_envelopes(
    envelopes: &[Envelope],
    mode_freq_hz: f64,
    policy: &SegmentPolicy,
) -> Result<DampingEstimate> {
    fit_damping(&align_and_average(envelopes)?, mode_freq_hz, policy)
}

/// Full pipeline on raw records.
pub fn estimate_from_ensemble(
    records: &[TimeRecord],
    cfg: &EnsembleConfig,
    mode_freq_hz: f64,
) -> Result<DampingEstimate> {
    if records.is_empty() {
        return Err(Error::Empty("record list"));
    }
    let first = &records[0];
    let h = build_freq_response(&cfg.kernel, first.len(), first.sample_rate_hz())?;
    let spectra: Vec<Vec<Complex64>> = records.par_iter().map(|r| forward_transform(r).into_bins()).collect();
    let envelopes = envelopes_from_spectra(&spectra, &h, first.sample_rate_hz())?;
    estimate_from_envelopes(&envelopes, mode_freq_hz, &cfg.segment_policy)
}

/// Envelopes of several records from their spectra and one frequency response.
pub fn envelopes_from_spectra(spectra: &[Vec<Complex64>], freq_response: &[Complex64], fs: f64) -> Result<Vec<Envelope>> {
    spectra
        .par_iter()
        .map(|s| envelope_from_spectrum(s, freq_response, fs))
        .collect()
}

/// Peak index of an envelope, exposed for callers that already hold one.
pub fn envelope_peak(env: &Envelope) -> usize {
    argmax(env.values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_model::{apply_observation, synthesize_response, ModalSystem};

    const FS: f64 = 800.0;

    fn exact_env(zeta: f64, f: f64, n: usize) -> Envelope {
        let wn = 2.0 * PI * f / (1.0 - zeta * zeta).sqrt();
        Envelope::new((0..n).map(|k| (-zeta * wn * k as f64 / FS).exp()).collect(), FS)
    }

    #[test]
    fn exact_envelope_recovers_zeta() {
        let est = fit_damping(&exact_env(0.01, 15.56, 4096), 15.56, &SegmentPolicy::default()).unwrap();
        assert!((est.zeta - 0.01).abs() / 0.01 < 1e-6);
        assert!((est.r_squared - 1.0).abs() < 1e-12);
        assert!(est.intercept.abs() < 1e-9);
    }

    #[test]
    fn closed_form_inversion() {
        let f = 10.0;
        let wd = 2.0 * PI * f;
        assert!((zeta_from_slope(-wd, f) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((zeta_from_slope(-1e-6 * wd, f) - 1e-6).abs() < 1e-15);
        for s in [-0.3, -3.0, -30.0] {
            let z = zeta_from_slope(s, f);
            let wn = wd / (1.0 - z * z).sqrt();
            assert!((z * wn + s).abs() < 1e-12);
        }
    }

    #[test]
    fn growing_or_bad_envelopes_are_rejected() {
        let grow = Envelope::new((0..2000).map(|k| 1.0 + k as f64).collect(), FS);
        assert!(matches!(fit_on_segment(&grow, 15.56, (10, 600)), Err(Error::NonDecaying(_))));
        let mut v = exact_env(0.01, 15.56, 2000).values().to_vec();
        v[100] = 0.0;
        assert!(matches!(
            fit_on_segment(&Envelope::new(v, FS), 15.56, (50, 600)),
            Err(Error::NonPositiveEnvelope)
        ));
    }

    #[test]
    fn alignment_examples() {
        assert!(align_and_average(&[]).is_err());
        let e = Envelope::new(vec![0.0, 1.0, 3.0, 2.0, 1.0], 1.0);
        assert_eq!(align_and_average(&[e.clone(), e.clone(), e.clone()]).unwrap(), e);
        let shifted = Envelope::new(vec![0.0, 0.0, 1.0, 3.0, 2.0], 1.0);
        let avg = align_and_average(&[e.clone(), shifted]).unwrap();
        assert_eq!(avg.values(), &[0.0, 1.0, 3.0, 2.0]);
    }

    #[test]
    fn impact_index_tracks_shift() {
        let sys = ModalSystem::from_parts(&[3.27, 15.56, 26.5], &[0.015, 0.01, 0.008], &[1.5, 2.5, 1.0]).unwrap();
        let rec = synthesize_response(&sys, 4096, FS).unwrap();
        let k = KernelSpec::new(KernelForm::GaussianWindow, 0.1, 15.56).unwrap();
        let base = estimate_impact_index(&rec, &k).unwrap();
        assert!(base < 200, "{base}");
        let shifted = apply_observation(&rec, 1.0, 1600.0 / FS, None, 0).unwrap();
        let idx = estimate_impact_index(&shifted, &k).unwrap();
        assert!((idx as i64 - 1600 - base as i64).abs() <= 5, "{idx}");
        let zero = TimeRecord::new(vec![0.0; 64], FS).unwrap();
        assert!(matches!(estimate_impact_index(&zero, &k), Err(Error::ZeroSignal)));
        let bad = KernelSpec::new(KernelForm::WelchWindow, 0.1, 15.56).unwrap();
        assert!(estimate_impact_index(&rec, &bad).is_err());
    }

    #[test]
    fn ensemble_of_identical_records_equals_single() {
        let sys = ModalSystem::from_parts(&[15.56], &[0.01], &[1.0]).unwrap();
        let rec = synthesize_response(&sys, 4096, FS).unwrap();
        let cfg = EnsembleConfig {
            n_records: 5,
            kernel: KernelSpec::new(KernelForm::TriangleWindow, 0.4, 15.56).unwrap(),
            segment_policy: SegmentPolicy::default(),
        };
        let one = estimate_from_ensemble(std::slice::from_ref(&rec), &cfg, 15.56).unwrap();
        let many = estimate_from_ensemble(&vec![rec; 5], &cfg, 15.56).unwrap();
        assert_eq!(one.segment, many.segment);
        assert!((one.zeta - many.zeta).abs() < 1e-12 * one.zeta);
        assert!((one.zeta - 0.01).abs() / 0.01 < 0.02, "{}", one.zeta);
    }
}
