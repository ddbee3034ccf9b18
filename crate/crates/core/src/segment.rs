//! Evaluation segment selection and the envelope MSE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{argmax, Envelope};
use crate::linalg::pairwise_sum;
use crate::signal_model::round_half_up;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentPolicy {
    /// Segment ends where the envelope falls below this fraction of its peak.
    pub floor_fraction: f64,
    /// Segment length in carrier cycles.
    pub cycles: f64,
    /// Carrier cycles excluded at each end of the record, where circular
    /// filtering mixes the onset with the tail.
    pub edge_guard_cycles: f64,
}

impl Default for SegmentPolicy {
    fn default() -> Self {
        Self {
            floor_fraction: 0.05,
            cycles: 10.0,
            edge_guard_cycles: 5.0,
        }
    }
}

impl SegmentPolicy {
    pub fn new(floor_fraction: f64, cycles: f64) -> Result<Self> {
        let p = Self {
            floor_fraction,
            cycles,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.floor_fraction > 0.0 && self.floor_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "floor_fraction must be in (0, 1), got {}",
                self.floor_fraction
            )));
        }
        if !(self.cycles > 0.0 && self.cycles.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cycles must be positive, got {}",
                self.cycles
            )));
        }
        if !(self.edge_guard_cycles >= 0.0 && self.edge_guard_cycles.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "edge_guard_cycles must be non-negative, got {}",
                self.edge_guard_cycles
            )));
        }
        Ok(())
    }

    /// Edge guard in samples, `round(edge_guard_cycles * fs / f)`.
    pub fn edge_guard(&self, mode_freq_hz: f64, fs: f64) -> usize {
        round_half_up(self.edge_guard_cycles * fs / mode_freq_hz)
    }

    /// Segment length in samples, `round(cycles * fs / f)`.
    pub fn segment_length(&self, mode_freq_hz: f64, fs: f64) -> usize {
        round_half_up(self.cycles * fs / mode_freq_hz)
    }
}

/// Picks `[N1, N2]` on `env`.
///
/// `N2` is the last sample of the run that starts at the envelope peak and
/// stays at or above `floor_fraction * peak`; `N1` lies `cycles` carrier
/// periods earlier and may not precede the peak. Stopping at the first
/// drop (rather than the last index above the floor anywhere) keeps the
/// circular wrap-around tail of a filtered record out of the segment, and
/// the edge guard keeps both ends of the record out as well.
pub fn select_segment(env: &Envelope, mode_freq_hz: f64, policy: &SegmentPolicy) -> Result<(usize, usize)> {
    policy.validate()?;
    if !(mode_freq_hz > 0.0) {
        return Err(Error::InvalidParameter("mode frequency must be positive".into()));
    }
    let v = env.values();
    if v.is_empty() {
        return Err(Error::Empty("envelope"));
    }
    let peak = argmax(v);
    let max = v[peak];
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::NonPositiveEnvelope);
    }
    let floor = policy.floor_fraction * max;
    let guard = policy.edge_guard(mode_freq_hz, env.sample_rate_hz());
    let first = peak.max(guard);
    let last = (v.len() - 1).saturating_sub(guard);
    let n2 = v[peak..]
        .iter()
        .position(|&x| x < floor)
        .map(|p| peak + p - 1)
        .unwrap_or(v.len() - 1)
        .min(last);
    let len = policy.segment_length(mode_freq_hz, env.sample_rate_hz());
    if len == 0 || n2 < first + len {
        return Err(Error::SegmentTooShort {
            available: n2.saturating_sub(first),
            required: len,
        });
    }
    Ok((n2 - len, n2))
}

/// Mean squared difference over `[N1, N2]` inclusive. Both envelopes must be
/// normalized to one at `N1`.
pub fn envelope_mse(estimated: &Envelope, truth: &Envelope, segment: (usize, usize)) -> Result<f64> {
    let (n1, n2) = segment;
    if estimated.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            got: estimated.len(),
        });
    }
    if n1 > n2 || n2 >= truth.len() {
        return Err(Error::IndexOutOfRange {
            index: n2,
            len: truth.len(),
        });
    }
    for e in [estimated, truth] {
        let start = e.values()[n1];
        if (start - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(start));
        }
    }
    let sq: Vec<f64> = estimated.values()[n1..=n2]
        .iter()
        .zip(&truth.values()[n1..=n2])
        .map(|(a, b)| (a - b) * (a - b))
        .collect();
    Ok(pairwise_sum(&sq) / sq.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::normalize_to_segment_start;

    #[test]
    fn segment_length_rounding() {
        assert_eq!(SegmentPolicy::default().segment_length(15.56, 800.0), 514);
        assert_eq!(SegmentPolicy::default().segment_length(16.0, 800.0), 500);
    }

    #[test]
    fn exponential_floor_boundary() {
        let fs = 800.0;
        let env = Envelope::new((0..4096).map(|k| (-1.5 * k as f64 / fs).exp()).collect(), fs);
        let (n1, n2) = select_segment(&env, 15.56, &SegmentPolicy::default()).unwrap();
        let v = env.values();
        assert!(v[n2] >= 0.05 && v[n2 + 1] < 0.05);
        assert_eq!(n2 - n1, 514);
    }

    #[test]
    fn constant_envelope_uses_tail() {
        let env = Envelope::new(vec![1.0; 2000], 800.0);
        let (n1, n2) = select_segment(&env, 15.56, &SegmentPolicy::default()).unwrap();
        assert_eq!((n1, n2), (1999 - 257 - 514, 1999 - 257));
        let no_guard = SegmentPolicy {
            edge_guard_cycles: 0.0,
            ..SegmentPolicy::default()
        };
        assert_eq!(select_segment(&env, 15.56, &no_guard).unwrap(), (1999 - 514, 1999));
    }

    #[test]
    fn fast_decay_is_rejected() {
        let fs = 800.0;
        let env = Envelope::new((0..4096).map(|k| (-20.0 * k as f64 / fs).exp()).collect(), fs);
        assert!(matches!(
            select_segment(&env, 15.56, &SegmentPolicy::default()),
            Err(Error::SegmentTooShort { .. })
        ));
        assert!(select_segment(&Envelope::new(vec![0.0; 10], fs), 15.56, &SegmentPolicy::default()).is_err());
    }

    #[test]
    fn segment_starts_after_rising_edge() {
        let fs = 800.0;
        let env = Envelope::new(
            (0..4096)
                .map(|k| {
                    let t = k as f64 / fs;
                    (1.0 - (-40.0 * t).exp()) * (-t).exp()
                })
                .collect(),
            fs,
        );
        let (n1, _) = select_segment(&env, 15.56, &SegmentPolicy::default()).unwrap();
        assert!(n1 >= env.argmax());
    }

    #[test]
    fn mse_examples() {
        let truth = Envelope::new((0..=100).map(|k| (-0.01 * k as f64).exp()).collect(), 1.0);
        assert_eq!(envelope_mse(&truth, &truth, (0, 100)).unwrap(), 0.0);

        let shifted = Envelope::new(
            truth.values().iter().enumerate().map(|(k, v)| if k == 0 { *v } else { v + 0.1 }).collect(),
            1.0,
        );
        let m = envelope_mse(&shifted, &truth, (1, 100));
        assert!(matches!(m, Err(Error::NotNormalized(_))));

        let a = Envelope::new(vec![1.0, 1.5, 1.5], 1.0);
        let b = Envelope::new(vec![1.0, 1.0, 1.0], 1.0);
        assert!((envelope_mse(&a, &b, (0, 2)).unwrap() - 0.5 * 0.5 * 2.0 / 3.0).abs() < 1e-15);

        assert!(matches!(
            envelope_mse(&Envelope::new(vec![1.0; 3], 1.0), &b.clone().scaled(1.0), (0, 5)),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            envelope_mse(&Envelope::new(vec![1.0; 4], 1.0), &b, (0, 2)),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn ramp_mse_matches_direct_sum() {
        let truth: Vec<f64> = (0..=100).map(|k| (-0.01 * k as f64).exp()).collect();
        let est: Vec<f64> = truth
            .iter()
            .enumerate()
            .map(|(k, v)| v * (1.0 + 0.1 * k as f64 / 100.0))
            .collect();
        let m = envelope_mse(&Envelope::new(est, 1.0), &Envelope::new(truth, 1.0), (0, 100)).unwrap();
        assert!((m - 0.000_807_005_665_309_277_7).abs() < 1e-15);
    }

    #[test]
    fn mse_is_invariant_to_prior_scaling() {
        let truth = Envelope::new((0..50).map(|k| (-0.03 * k as f64).exp()).collect(), 1.0)
            .with_segment((5, 40))
            .unwrap();
        let est = Envelope::new((0..50).map(|k| (-0.028 * k as f64).exp()).collect(), 1.0)
            .with_segment((5, 40))
            .unwrap();
        let t = normalize_to_segment_start(&truth).unwrap();
        let a = envelope_mse(&normalize_to_segment_start(&est).unwrap(), &t, (5, 40)).unwrap();
        let b = envelope_mse(&normalize_to_segment_start(&est.scaled(7.3)).unwrap(), &t, (5, 40)).unwrap();
        assert!((a - b).abs() <= 1e-15 * a.max(1.0));
    }
}
