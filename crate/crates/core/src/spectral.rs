//! DFT contract, fast circular filtering and FRF construction.
//!
//! Forward transforms are unnormalized and inverse transforms carry the
//! `1/N` factor. Filtering is circular: the record spectrum is multiplied
//! pointwise by a frequency response of the same length.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signal_model::TimeRecord;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place unnormalized forward FFT.
pub fn fft_in_place(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(buf));
}

/// In-place inverse FFT including the `1/N` factor.
pub fn ifft_in_place(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()).process(buf));
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Full (two-sided) DFT of a record.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    bins: Vec<Complex64>,
    bin_spacing_hz: f64,
}

impl ComplexSpectrum {
    pub fn new(bins: Vec<Complex64>, bin_spacing_hz: f64) -> Result<Self> {
        if bins.len() < 2 {
            return Err(Error::InvalidParameter("spectrum needs at least 2 bins".into()));
        }
        if !(bin_spacing_hz > 0.0) {
            return Err(Error::InvalidParameter("bin spacing must be positive".into()));
        }
        Ok(Self {
            bins,
            bin_spacing_hz,
        })
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn into_bins(self) -> Vec<Complex64> {
        self.bins
    }

    pub fn bin_spacing_hz(&self) -> f64 {
        self.bin_spacing_hz
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Bins `0..=N/2` as an FRF on the one-sided grid.
    pub fn one_sided(&self) -> FrfData {
        let half = self.bins.len() / 2;
        FrfData {
            freqs_hz: (0..=half).map(|k| k as f64 * self.bin_spacing_hz).collect(),
            values: self.bins[..=half].to_vec(),
        }
    }
}

/// Complex frequency-response samples on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FrfData {
    freqs_hz: Vec<f64>,
    values: Vec<Complex64>,
}

impl FrfData {
    pub fn new(freqs_hz: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if freqs_hz.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: freqs_hz.len(),
                got: values.len(),
            });
        }
        if freqs_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "FRF frequencies must be strictly increasing".into(),
            ));
        }
        Ok(Self { freqs_hz, values })
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Samples with `lo_hz <= f <= hi_hz`.
    pub fn band(&self, lo_hz: f64, hi_hz: f64) -> FrfData {
        let (freqs_hz, values) = self
            .freqs_hz
            .iter()
            .zip(&self.values)
            .filter(|(f, _)| **f >= lo_hz && **f <= hi_hz)
            .map(|(f, v)| (*f, *v))
            .unzip();
        FrfData { freqs_hz, values }
    }

    pub fn scaled(&self, c: Complex64) -> FrfData {
        FrfData {
            freqs_hz: self.freqs_hz.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// Pointwise complex mean of FRFs sharing one grid.
    pub fn mean(frfs: &[FrfData]) -> Result<FrfData> {
        let first = frfs.first().ok_or(Error::Empty("FRF list"))?;
        let mut acc = vec![Complex64::new(0.0, 0.0); first.len()];
        for f in frfs {
            if f.freqs_hz != first.freqs_hz {
                return Err(Error::InvalidParameter("FRFs do not share a grid".into()));
            }
            for (a, v) in acc.iter_mut().zip(&f.values) {
                *a += v;
            }
        }
        let inv = 1.0 / frfs.len() as f64;
        Ok(FrfData {
            freqs_hz: first.freqs_hz.clone(),
            values: acc.into_iter().map(|a| a * inv).collect(),
        })
    }

    /// Root-mean-square magnitude across FRFs on a shared grid, as a real
    /// FRF. Phase is discarded, so misaligned records do not cancel.
    pub fn rms_mean(frfs: &[FrfData]) -> Result<FrfData> {
        let first = frfs.first().ok_or(Error::Empty("FRF list"))?;
        let mut acc = vec![0.0; first.len()];
        for f in frfs {
            if f.freqs_hz != first.freqs_hz {
                return Err(Error::InvalidParameter("FRFs do not share a grid".into()));
            }
            for (a, v) in acc.iter_mut().zip(&f.values) {
                *a += v.norm_sqr();
            }
        }
        let inv = 1.0 / frfs.len() as f64;
        Ok(FrfData {
            freqs_hz: first.freqs_hz.clone(),
            values: acc.into_iter().map(|a| Complex64::new((a * inv).sqrt(), 0.0)).collect(),
        })
    }

    /// Index of the largest magnitude with `lo_hz <= f <= hi_hz`.
    pub fn peak_in(&self, lo_hz: f64, hi_hz: f64) -> Option<usize> {
        self.freqs_hz
            .iter()
            .zip(&self.values)
            .enumerate()
            .filter(|(_, (f, _))| **f >= lo_hz && **f <= hi_hz)
            .max_by(|a, b| a.1 .1.norm().total_cmp(&b.1 .1.norm()))
            .map(|(i, _)| i)
    }
}

fn to_complex(x: &[f64]) -> Vec<Complex64> {
    x.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

pub fn forward_transform(record: &TimeRecord) -> ComplexSpectrum {
    let mut buf = to_complex(record.samples());
    fft_in_place(&mut buf);
    ComplexSpectrum {
        bin_spacing_hz: record.sample_rate_hz() / buf.len() as f64,
        bins: buf,
    }
}

/// Inverse DFT with `1/N` normalization.
pub fn inverse_transform(spectrum: &ComplexSpectrum) -> Vec<Complex64> {
    let mut buf = spectrum.bins.clone();
    ifft_in_place(&mut buf);
    buf
}

/// Circular convolution of `record` with the kernel whose DFT is
/// `freq_response`, evaluated by spectral multiplication.
pub fn fast_filter(record: &TimeRecord, freq_response: &[Complex64]) -> Result<Vec<Complex64>> {
    if freq_response.len() != record.len() {
        return Err(Error::LengthMismatch {
            expected: record.len(),
            got: freq_response.len(),
        });
    }
    let spectrum = forward_transform(record);
    filter_spectrum(spectrum.bins(), freq_response)
}

/// Same as [`fast_filter`] for a record whose spectrum is already known.
pub fn filter_spectrum(spectrum: &[Complex64], freq_response: &[Complex64]) -> Result<Vec<Complex64>> {
    if freq_response.len() != spectrum.len() {
        return Err(Error::LengthMismatch {
            expected: spectrum.len(),
            got: freq_response.len(),
        });
    }
    let mut buf: Vec<Complex64> = spectrum
        .iter()
        .zip(freq_response)
        .map(|(x, h)| x * h)
        .collect();
    ifft_in_place(&mut buf);
    Ok(buf)
}

fn check_impact(record: &TimeRecord, impact_index: usize) -> Result<()> {
    // at least two samples must remain after the impact
    if impact_index + 1 >= record.len() {
        return Err(Error::IndexOutOfRange {
            index: impact_index,
            len: record.len(),
        });
    }
    Ok(())
}

/// DFT of the record with every sample before `impact_index` discarded.
///
/// With `analysis_len = Some(m)` the remainder is zero-padded (or cut) to `m`
/// samples so records truncated at different points share one grid.
pub fn frf_truncate(
    record: &TimeRecord,
    impact_index: usize,
    analysis_len: Option<usize>,
) -> Result<ComplexSpectrum> {
    check_impact(record, impact_index)?;
    let tail = &record.samples()[impact_index..];
    let m = analysis_len.unwrap_or(tail.len());
    if m < 2 {
        return Err(Error::InvalidParameter("analysis length must be >= 2".into()));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for (b, &v) in buf.iter_mut().zip(tail) {
        b.re = v;
    }
    fft_in_place(&mut buf);
    ComplexSpectrum::new(buf, record.sample_rate_hz() / m as f64)
}

/// One-sided FRF of the record relative to a unit impulse at
/// `impact_index`. The impulse spectrum has unit modulus, so this is the
/// output spectrum with its linear phase removed.
pub fn frf_impulse_ratio(record: &TimeRecord, impact_index: usize) -> Result<FrfData> {
    check_impact(record, impact_index)?;
    let spectrum = forward_transform(record);
    let n = record.len();
    let half = n / 2;
    let mut values = Vec::with_capacity(half + 1);
    for (k, x) in spectrum.bins()[..=half].iter().enumerate() {
        // divide by exp(-i 2 pi k m / n)
        let phase = 2.0 * PI * ((k * impact_index) % n) as f64 / n as f64;
        values.push(x * Complex64::from_polar(1.0, phase));
    }
    FrfData::new(
        (0..=half)
            .map(|k| k as f64 * spectrum.bin_spacing_hz())
            .collect(),
        values,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_model::{synthesize_response, ModalSystem};
    use rand::{Rng, SeedableRng};

    fn random_record(n: usize, seed: u64) -> TimeRecord {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        TimeRecord::new((0..n).map(|_| rng.random::<f64>() - 0.5).collect(), 100.0).unwrap()
    }

    #[test]
    fn constant_signal_spectrum() {
        let rec = TimeRecord::new(vec![1.0; 8], 8.0).unwrap();
        let s = forward_transform(&rec);
        assert!((s.bins()[0].re - 8.0).abs() < 1e-12);
        for b in &s.bins()[1..] {
            assert!(b.norm() < 1e-12);
        }
    }

    #[test]
    fn sinusoid_on_bin_concentrates() {
        let n = 64;
        let rec = TimeRecord::new(
            (0..n).map(|k| (2.0 * PI * 5.0 * k as f64 / n as f64).cos()).collect(),
            n as f64,
        )
        .unwrap();
        let s = forward_transform(&rec);
        for (k, b) in s.bins().iter().enumerate() {
            if k == 5 || k == n - 5 {
                assert!((b.norm() - 32.0).abs() < 1e-9);
            } else {
                assert!(b.norm() < 1e-9);
            }
        }
    }

    #[test]
    fn roundtrip_and_parseval() {
        let rec = random_record(4096, 1);
        let s = forward_transform(&rec);
        let back = inverse_transform(&s);
        let err = back
            .iter()
            .zip(rec.samples())
            .map(|(b, x)| (b - x).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
        let e_time: f64 = rec.samples().iter().map(|x| x * x).sum();
        let e_freq: f64 = s.bins().iter().map(|b| b.norm_sqr()).sum::<f64>() / 4096.0;
        assert!((e_time - e_freq).abs() / e_time < 1e-10);
    }

    #[test]
    fn identity_and_zero_filters() {
        let rec = random_record(128, 2);
        let ones = vec![Complex64::new(1.0, 0.0); 128];
        let out = fast_filter(&rec, &ones).unwrap();
        for (o, x) in out.iter().zip(rec.samples()) {
            assert!((o.re - x).abs() < 1e-12 && o.im.abs() < 1e-12);
        }
        let zeros = vec![Complex64::new(0.0, 0.0); 128];
        assert!(fast_filter(&rec, &zeros).unwrap().iter().all(|v| v.norm() == 0.0));
        assert!(matches!(
            fast_filter(&rec, &ones[..64]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn truncate_at_zero_matches_forward() {
        let rec = random_record(256, 3);
        assert_eq!(frf_truncate(&rec, 0, None).unwrap(), forward_transform(&rec));
        assert!(frf_truncate(&rec, 255, None).is_err());
        assert!(frf_truncate(&rec, 300, None).is_err());
    }

    #[test]
    fn truncation_undoes_a_shift_in_the_modal_band() {
        let sys = ModalSystem::from_parts(&[15.56], &[0.04], &[1.0]).unwrap();
        let clean = synthesize_response(&sys, 4096, 800.0).unwrap();
        let k = 800;
        let shifted = crate::signal_model::apply_observation(&clean, 1.0, 1.0, None, 0).unwrap();
        let a = frf_truncate(&clean, 0, Some(4096)).unwrap();
        let b = frf_truncate(&shifted, k, Some(4096)).unwrap();
        let df = a.bin_spacing_hz();
        for bin in ((10.0 / df) as usize)..((20.0 / df) as usize) {
            let (ma, mb) = (a.bins()[bin].norm(), b.bins()[bin].norm());
            assert!((ma - mb).abs() / ma < 0.01, "bin {bin}: {ma} vs {mb}");
        }
    }

    #[test]
    fn impulse_ratio_properties() {
        let rec = random_record(512, 4);
        let raw = forward_transform(&rec).one_sided();
        assert_eq!(frf_impulse_ratio(&rec, 0).unwrap(), raw);
        for k in [1, 17, 300, 510] {
            let frf = frf_impulse_ratio(&rec, k).unwrap();
            for (a, b) in frf.values().iter().zip(raw.values()) {
                assert!((a.norm() - b.norm()).abs() < 1e-9);
            }
        }
        assert!(frf_impulse_ratio(&rec, 511).is_err());
    }

    #[test]
    fn impulse_ratio_recovers_sdof_bandwidth() {
        let zeta = 0.01;
        let sys = ModalSystem::from_parts(&[15.56], &[zeta], &[1.0]).unwrap();
        // long record so the resonance is well resolved
        let clean = synthesize_response(&sys, 1 << 17, 800.0).unwrap();
        let frf = frf_impulse_ratio(&clean, 0).unwrap();
        let p = frf.peak_in(10.0, 20.0).unwrap();
        assert!((frf.freqs_hz()[p] - 15.56).abs() < 0.01);
        let z = crate::baselines::half_power_damping(&frf, p).unwrap();
        assert!((z - zeta).abs() / zeta < 0.02, "{z}");
    }
}
