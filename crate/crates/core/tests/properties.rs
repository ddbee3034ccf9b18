//! Algebraic invariants checked over random inputs.

use std::f64::consts::PI;

use envdamp::baselines::{
    half_power_damping, lsrf_fit, plscf_fit, sdof_local_fit, yoshida_three_point, PoleSet, SdofFitWindowSpec,
};
use envdamp::estimator::{estimate_from_ensemble, fit_damping, zeta_from_slope};
use envdamp::kernels::{build_freq_response, extract_envelope, normalize_to_segment_start};
use envdamp::segment::envelope_mse;
use envdamp::signal_model::{apply_observation, synthesize_response, true_envelope};
use envdamp::spectral::{fast_filter, forward_transform, frf_impulse_ratio};
use envdamp::{
    Complex64, EnsembleConfig, Envelope, FrfData, KernelForm, KernelSpec, ModalMode, ModalSystem, SegmentPolicy,
    TimeRecord,
};
use proptest::prelude::*;

const FS: f64 = 800.0;

fn form() -> impl Strategy<Value = KernelForm> {
    proptest::sample::select(KernelForm::ALL.to_vec())
}

/// A width comfortably inside the admissible range of each form at 15.56 Hz.
fn width_for(form: KernelForm, u: f64) -> f64 {
    if form.is_filter() {
        2.0 * PI * (0.5 + 4.5 * u)
    } else {
        0.15 + 1.5 * u
    }
}

fn single_mode(zeta: f64, amp: f64, n: usize) -> TimeRecord {
    let sys = ModalSystem::new(vec![ModalMode::new(15.56, zeta, amp).unwrap()]).unwrap();
    synthesize_response(&sys, n, FS).unwrap()
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Direct inverse DFT of `h` followed by an O(N^2) circular convolution.
fn convolution_oracle(x: &[f64], h: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let kernel: Vec<Complex64> = (0..n)
        .map(|m| {
            h.iter()
                .enumerate()
                .map(|(k, hk)| hk * Complex64::from_polar(1.0, 2.0 * PI * ((k * m) % n) as f64 / n as f64))
                .sum::<Complex64>()
                / n as f64
        })
        .collect();
    (0..n)
        .map(|i| (0..n).map(|m| kernel[(i + n - m) % n] * x[m]).sum())
        .collect()
}

fn sdof_frf(f_hz: f64, zeta: f64, df: f64, n_bins: usize) -> FrfData {
    let wn = 2.0 * PI * f_hz / (1.0 - zeta * zeta).sqrt();
    let freqs: Vec<f64> = (1..=n_bins).map(|k| k as f64 * df).collect();
    let values = freqs
        .iter()
        .map(|&f| {
            let w = 2.0 * PI * f;
            Complex64::new(1.0, 0.0) / Complex64::new(wn * wn - w * w, 2.0 * zeta * wn * w)
        })
        .collect();
    FrfData::new(freqs, values).unwrap()
}

fn assert_conjugate_symmetric(p: &PoleSet) {
    for &z in &p.poles {
        let partner = p.poles.iter().map(|q| (q - z.conj()).norm()).fold(f64::INFINITY, f64::min);
        assert!(partner <= 1e-9 * z.norm().max(1.0), "pole {z} has no conjugate");
    }
    for z in p.oscillatory() {
        assert!(envdamp::baselines::pole_freq_hz(z) > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn synthesis_is_linear_in_amplitude(
        z1 in 0.001f64..0.1, z2 in 0.001f64..0.1,
        a1 in 0.1f64..5.0, a2 in 0.1f64..5.0, c in 0.01f64..100.0,
    ) {
        let sys = ModalSystem::from_parts(&[3.27, 26.5], &[z1, z2], &[a1, a2]).unwrap();
        let x = synthesize_response(&sys, 1024, FS).unwrap();
        let y = synthesize_response(&sys.scaled(c).unwrap(), 1024, FS).unwrap();
        let tol = 1e-13 * c * max_abs(x.samples()).max(1.0);
        for (a, b) in x.samples().iter().zip(y.samples()) {
            prop_assert!((c * a - b).abs() <= tol);
        }
    }

    #[test]
    fn true_envelope_is_log_linear(zeta in 0.001f64..0.2, amp in 0.1f64..10.0, f in 1.0f64..100.0) {
        let mode = ModalMode::new(f, zeta, amp).unwrap();
        let env = true_envelope(&mode, 2048, FS);
        let v = env.values();
        let (y0, y1) = (v[0].ln(), v[2047].ln());
        let slope = (y1 - y0) / 2047.0;
        let expected = -mode.decay_rate() / FS;
        prop_assert!((slope - expected).abs() <= 1e-12 * expected.abs().max(1e-12));
        for (k, x) in v.iter().enumerate() {
            prop_assert!((x.ln() - (y0 + slope * k as f64)).abs() < 1e-10);
        }
    }

    #[test]
    fn parseval_holds(x in proptest::collection::vec(-10.0f64..10.0, 2..600)) {
        let rec = TimeRecord::new(x.clone(), FS).unwrap();
        let spec = forward_transform(&rec);
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = spec.bins().iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64;
        prop_assert!((time - freq).abs() <= 1e-10 * time.max(1e-300));
    }

    #[test]
    fn fast_filter_matches_convolution_oracle(
        (x, h) in (2usize..=160).prop_flat_map(|n| (
            proptest::collection::vec(-1.0f64..1.0, n),
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n),
        ))
    ) {
        let h: Vec<Complex64> = h.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
        let rec = TimeRecord::new(x.clone(), FS).unwrap();
        let fast = fast_filter(&rec, &h).unwrap();
        let slow = convolution_oracle(&x, &h);
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn impulse_ratio_magnitude_ignores_impact_index(m1 in 0usize..1024, m2 in 0usize..1024, zeta in 0.002f64..0.05) {
        let rec = single_mode(zeta, 1.0, 1024);
        let a = frf_impulse_ratio(&rec, m1).unwrap();
        let b = frf_impulse_ratio(&rec, m2).unwrap();
        for (u, v) in a.magnitudes().iter().zip(b.magnitudes()) {
            prop_assert!((u - v).abs() <= 1e-12 * u.max(1.0));
        }
    }

    #[test]
    fn envelope_is_scale_equivariant(form in form(), u in 0.0f64..1.0, c in 0.01f64..100.0, zeta in 0.002f64..0.05) {
        let rec = single_mode(zeta, 1.0, 2048);
        let spec = KernelSpec::new(form, width_for(form, u), 15.56).unwrap();
        let e = extract_envelope(&rec, &spec).unwrap();
        let scaled = TimeRecord::new(rec.samples().iter().map(|v| c * v).collect(), FS).unwrap();
        let ec = extract_envelope(&scaled, &spec).unwrap();
        let tol = 1e-12 * c * max_abs(e.values());
        for (a, b) in e.values().iter().zip(ec.values()) {
            prop_assert!((c * a - b).abs() <= tol);
        }
    }

    #[test]
    fn envelope_shift_is_circular(form in form(), u in 0.0f64..1.0, k in 0usize..2048) {
        let rec = single_mode(0.01, 1.0, 2048);
        let n = rec.len();
        let shifted: Vec<f64> = (0..n).map(|i| rec.samples()[(i + n - k) % n]).collect();
        let spec = KernelSpec::new(form, width_for(form, u), 15.56).unwrap();
        let e = extract_envelope(&rec, &spec).unwrap();
        let es = extract_envelope(&TimeRecord::new(shifted, FS).unwrap(), &spec).unwrap();
        for i in 0..n {
            prop_assert!((es.values()[(i + k) % n] - e.values()[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn filter_responses_are_one_sided(form in form(), u in 0.0f64..1.0, n in 64usize..4096) {
        prop_assume!(form.is_filter());
        let spec = KernelSpec::new(form, width_for(form, u), 15.56).unwrap();
        if let Ok(h) = build_freq_response(&spec, n, FS) {
            prop_assert!(h[n / 2 + 1..].iter().all(|v| *v == Complex64::new(0.0, 0.0)));
        }
    }

    #[test]
    fn mse_is_nonnegative_and_zero_only_on_agreement(
        a in proptest::collection::vec(0.01f64..2.0, 40),
        b in proptest::collection::vec(0.01f64..2.0, 40),
        c in 0.01f64..100.0,
    ) {
        let norm = |v: &[f64]| {
            let e = Envelope::new(v.to_vec(), FS).with_segment((5, 35)).unwrap();
            normalize_to_segment_start(&e).unwrap()
        };
        let (ea, eb) = (norm(&a), norm(&b));
        let m = envelope_mse(&ea, &eb, (5, 35)).unwrap();
        prop_assert!(m >= 0.0);
        prop_assert_eq!(envelope_mse(&ea, &ea, (5, 35)).unwrap(), 0.0);
        let differs = ea.values()[5..=35].iter().zip(&eb.values()[5..=35]).any(|(x, y)| x != y);
        prop_assert_eq!(m > 0.0, differs);
        // normalization absorbs any common rescaling of the estimate
        let scaled: Vec<f64> = a.iter().map(|v| c * v).collect();
        let ms = envelope_mse(&norm(&scaled), &eb, (5, 35)).unwrap();
        prop_assert!((ms - m).abs() <= 1e-12 * m.max(1e-12));
    }

    #[test]
    fn fit_is_exact_on_exponentials(sigma in 0.05f64..3.0, amp in 0.01f64..100.0) {
        let env = Envelope::new((0..4096).map(|k| amp * (-sigma * k as f64 / FS).exp()).collect(), FS);
        let est = fit_damping(&env, 15.56, &SegmentPolicy::default());
        prop_assume!(est.is_ok());
        let est = est.unwrap();
        prop_assert!((est.slope + sigma).abs() <= 1e-10 * sigma);
        let r = sigma / (2.0 * PI * 15.56);
        let zeta = r / (1.0 + r * r).sqrt();
        prop_assert!((est.zeta - zeta).abs() <= 1e-10 * zeta);
    }

    #[test]
    fn slope_inversion_satisfies_identity(slope in -200.0f64..-1e-4, f in 0.5f64..300.0) {
        let zeta = zeta_from_slope(slope, f);
        let wn = 2.0 * PI * f / (1.0 - zeta * zeta).sqrt();
        prop_assert!((zeta * wn + slope).abs() <= 1e-12 * slope.abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn estimate_is_invariant_to_common_gain(seed in any::<u64>(), c in 0.01f64..100.0) {
        let clean = single_mode(0.01, 1.0, 4096);
        let records: Vec<TimeRecord> = (0..4u64)
            .map(|i| apply_observation(&clean, 1.0 + i as f64, 0.1 * i as f64, Some(20.0), seed ^ i).unwrap())
            .collect();
        let scaled: Vec<TimeRecord> = records
            .iter()
            .map(|r| TimeRecord::new(r.samples().iter().map(|v| c * v).collect(), FS).unwrap())
            .collect();
        let cfg = EnsembleConfig {
            n_records: 4,
            kernel: KernelSpec::new(KernelForm::TriangleWindow, 0.69, 15.56).unwrap(),
            segment_policy: SegmentPolicy::default(),
        };
        let a = estimate_from_ensemble(&records, &cfg, 15.56).unwrap();
        let b = estimate_from_ensemble(&scaled, &cfg, 15.56).unwrap();
        prop_assert_eq!(a.segment, b.segment);
        prop_assert!((a.zeta - b.zeta).abs() <= 1e-12 * a.zeta);
    }

    #[test]
    fn estimate_is_invariant_to_common_delay(shift in 1usize..400) {
        let clean = single_mode(0.01, 1.0, 4096);
        let records: Vec<TimeRecord> = (0..4u64)
            .map(|i| apply_observation(&clean, 1.0 + i as f64, 0.05 * i as f64, None, 0).unwrap())
            .collect();
        let delayed: Vec<TimeRecord> = records
            .iter()
            .map(|r| apply_observation(r, 1.0, shift as f64 / FS, None, 0).unwrap())
            .collect();
        let cfg = EnsembleConfig {
            n_records: 4,
            kernel: KernelSpec::new(KernelForm::TriangleWindow, 0.69, 15.56).unwrap(),
            segment_policy: SegmentPolicy::default(),
        };
        let a = estimate_from_ensemble(&records, &cfg, 15.56).unwrap();
        let b = estimate_from_ensemble(&delayed, &cfg, 15.56).unwrap();
        // the shifted ensemble is fitted on its own aligned grid; the
        // selected segments coincide after alignment whenever neither
        // end is clipped by the record boundary
        prop_assert!((a.zeta - b.zeta).abs() <= 2e-4 * a.zeta, "{} vs {}", a.zeta, b.zeta);
    }

    #[test]
    fn baselines_ignore_complex_gain(zeta in 0.004f64..0.05, f in 10.0f64..40.0) {
        let frf = sdof_frf(f, zeta, 0.05, 1600);
        let g = Complex64::from_polar(3.7, PI / 5.0);
        let scaled = frf.scaled(g);
        let p = frf.peak_in(0.9 * f, 1.1 * f).unwrap();
        prop_assert_eq!(scaled.peak_in(0.9 * f, 1.1 * f).unwrap(), p);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * a.abs();
        prop_assert!(close(half_power_damping(&frf, p).unwrap(), half_power_damping(&scaled, p).unwrap()));
        let w = SdofFitWindowSpec::default();
        prop_assert!(close(sdof_local_fit(&frf, p, w).unwrap().1, sdof_local_fit(&scaled, p, w).unwrap().1));
        prop_assert!(close(yoshida_three_point(&frf, p).unwrap().1, yoshida_three_point(&scaled, p).unwrap().1));
        let band = frf.band(0.5 * f, 1.5 * f);
        let z = |fr: &FrfData| {
            let poles = lsrf_fit(fr, 6, 6, 20).unwrap();
            envdamp::baselines::match_pole_to_mode(&poles, f).unwrap().1
        };
        let (z0, z1) = (z(&band), z(&band.scaled(g)));
        prop_assert!((z0 - z1).abs() <= 1e-8 * z0, "{z0} vs {z1}");
    }

    #[test]
    fn pole_sets_are_conjugate_symmetric(z1 in 0.005f64..0.05, z2 in 0.005f64..0.05) {
        let sys = ModalSystem::from_parts(&[10.0, 25.0], &[z1, z2], &[1.0, 1.0]).unwrap();
        let rec = synthesize_response(&sys, 2048, 200.0).unwrap();
        let frf = frf_impulse_ratio(&rec, 0).unwrap().band(5.0, 40.0);
        assert_conjugate_symmetric(&lsrf_fit(&frf, 8, 8, 10).unwrap());
        assert_conjugate_symmetric(&plscf_fit(&[frf], 8).unwrap());
    }
}

#[test]
fn observation_identity() {
    let rec = single_mode(0.01, 2.0, 1000);
    assert_eq!(apply_observation(&rec, 1.0, 0.0, None, 9).unwrap(), rec);
}

#[test]
fn yoshida_is_sdof_on_three_bins() {
    for zeta in [0.005, 0.01, 0.04] {
        let frf = sdof_frf(15.56, zeta, 0.03, 2000);
        let p = frf.peak_in(14.0, 17.0).unwrap();
        let three = sdof_local_fit(&frf, p, SdofFitWindowSpec::new(1).unwrap()).unwrap();
        assert_eq!(yoshida_three_point(&frf, p).unwrap(), three);
    }
}
