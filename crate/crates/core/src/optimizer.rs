//! Fitting the width parameter `theta` of each kernel form.
//!
//! The objective is the mean, over a labeled dataset, of the envelope MSE
//! between the normalized extracted envelope and the normalized true
//! envelope of the target mode on a per-record segment chosen from the true
//! envelope. The search runs in `ln theta` with central finite differences,
//! a Newton step where the local curvature is positive and a backtracking
//! line search, restarted from a coarse log grid and from log-uniform random
//! points. The restart with the lowest validation loss wins.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Mutex;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{argmax, build_freq_response, KernelForm, KernelSpec};
use crate::linalg::pairwise_sum;
use crate::rng;
use crate::segment::{select_segment, SegmentPolicy};
use crate::signal_model::LabeledRecord;
use crate::spectral::{filter_spectrum, forward_transform};

/// Fraction of records whose segment may be unusable before the loss errors.
const MAX_SKIPPED_FRACTION: f64 = 0.10;
/// Smallest line-search step in `ln theta`.
const MIN_STEP: f64 = 1e-5;
/// Largest single move in `ln theta`.
const MAX_STEP: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub n_restarts: usize,
    /// Finite-difference step in `ln theta`.
    pub step_size: f64,
    pub max_iters: usize,
    /// Relative loss change that ends a descent.
    pub tol: f64,
    /// Overrides the per-form default bounds when set.
    pub theta_bounds: Option<(f64, f64)>,
    /// `(train_count, val_count)`.
    pub split: (usize, usize),
    /// Restarts seeded from the lowest points of the scan; the rest are
    /// random.
    pub grid_restarts: usize,
    /// Size of the coarse log-spaced scan (endpoints included) that seeds
    /// the grid restarts.
    pub scan_points: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_restarts: 15,
            step_size: 0.01,
            max_iters: 500,
            tol: 1e-6,
            theta_bounds: None,
            split: (500, 500),
            grid_restarts: 8,
            scan_points: 32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_restarts == 0 || self.max_iters == 0 {
            return Err(Error::InvalidParameter("n_restarts and max_iters must be positive".into()));
        }
        if !(self.step_size > 0.0 && self.tol > 0.0) {
            return Err(Error::InvalidParameter("step_size and tol must be positive".into()));
        }
        if self.split.0 == 0 || self.split.1 == 0 {
            return Err(Error::InvalidParameter("train and validation counts must be positive".into()));
        }
        if let Some((lo, hi)) = self.theta_bounds {
            check_bounds((lo, hi))?;
        }
        Ok(())
    }
}

fn check_bounds((lo, hi): (f64, f64)) -> Result<()> {
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!("theta bounds must satisfy 0 < min < max, got ({lo}, {hi})")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub theta_init: f64,
    pub theta_final: f64,
    /// Training loss at `theta_final`.
    pub final_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub form: KernelForm,
    pub theta_opt: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub bounds: (f64, f64),
    pub restart_traces: Vec<RestartTrace>,
}

/// Default search interval for `form` targeting a mode at `target_freq_hz`.
///
/// Windows (seconds): `[2 / f, duration / 2]`. Filters (rad/s):
/// `[2pi 0.05 f, 2pi min(f, 2 gap)]` where `gap` is the distance to the
/// nearest other mode.
pub fn default_theta_bounds(form: KernelForm, target_freq_hz: f64, other_freqs_hz: &[f64], duration_s: f64) -> (f64, f64) {
    if form.is_filter() {
        let gap = other_freqs_hz
            .iter()
            .map(|f| (f - target_freq_hz).abs())
            .filter(|d| *d > 0.0)
            .fold(f64::INFINITY, f64::min);
        let hi = target_freq_hz.min(2.0 * gap);
        (2.0 * PI * 0.05 * target_freq_hz, 2.0 * PI * hi)
    } else {
        (2.0 / target_freq_hz, 0.5 * duration_s)
    }
}

struct PreparedRecord {
    spectrum: Vec<Complex64>,
    /// True envelope over the segment, normalized to one at its start.
    truth: Vec<f64>,
    segment: (usize, usize),
}

/// Spectra, normalized true envelopes and segments of a dataset, computed
/// once and reused for every loss evaluation.
pub struct PreparedSet {
    records: Vec<PreparedRecord>,
    n: usize,
    sample_rate_hz: f64,
    center_freq_hz: f64,
    skipped: usize,
    total: usize,
}

impl PreparedSet {
    pub fn new(
        dataset: &[LabeledRecord],
        target_mode_index: usize,
        center_freq_hz: f64,
        policy: &SegmentPolicy,
    ) -> Result<Self> {
        let first = dataset.first().ok_or(Error::Empty("dataset"))?;
        let n = first.record.len();
        let fs = first.record.sample_rate_hz();
        let prepared: Vec<Option<PreparedRecord>> = dataset
            .par_iter()
            .map(|r| -> Result<Option<PreparedRecord>> {
                if r.record.len() != n || r.record.sample_rate_hz() != fs {
                    return Err(Error::InvalidParameter("dataset records differ in length or rate".into()));
                }
                let truth = r.envelopes.get(target_mode_index).ok_or(Error::IndexOutOfRange {
                    index: target_mode_index,
                    len: r.envelopes.len(),
                })?;
                let Some(segment) = training_segment(truth, center_freq_hz, policy) else {
                    return Ok(None);
                };
                let v = truth.values();
                let start = v[segment.0];
                Ok(Some(PreparedRecord {
                    spectrum: forward_transform(&r.record).into_bins(),
                    truth: v[segment.0..=segment.1].iter().map(|x| x / start).collect(),
                    segment,
                }))
            })
            .collect::<Result<_>>()?;
        let total = prepared.len();
        let records: Vec<PreparedRecord> = prepared.into_iter().flatten().collect();
        let set = Self {
            skipped: total - records.len(),
            records,
            n,
            sample_rate_hz: fs,
            center_freq_hz,
            total,
        };
        set.check_skipped(set.skipped)?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn center_freq_hz(&self) -> f64 {
        self.center_freq_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.n as f64 / self.sample_rate_hz
    }

    fn check_skipped(&self, skipped: usize) -> Result<()> {
        if skipped as f64 > MAX_SKIPPED_FRACTION * self.total as f64 {
            return Err(Error::TooManySkipped { skipped, total: self.total });
        }
        Ok(())
    }

    /// Mean envelope MSE of `form` at `theta` over the set.
    pub fn loss(&self, form: KernelForm, theta: f64) -> Result<f64> {
        let spec = KernelSpec::new(form, theta, self.center_freq_hz)?;
        let h = build_freq_response(&spec, self.n, self.sample_rate_hz)?;
        let losses: Vec<Option<f64>> = self
            .records
            .par_iter()
            .map(|r| -> Result<Option<f64>> {
                let y = filter_spectrum(&r.spectrum, &h)?;
                let (n1, n2) = r.segment;
                let start = y[n1].norm();
                if !(start > 0.0) {
                    return Ok(None);
                }
                let sq: Vec<f64> = y[n1..=n2]
                    .iter()
                    .zip(&r.truth)
                    .map(|(v, t)| {
                        let d = v.norm() / start - t;
                        d * d
                    })
                    .collect();
                Ok(Some(pairwise_sum(&sq) / sq.len() as f64))
            })
            .collect::<Result<_>>()?;
        let used: Vec<f64> = losses.iter().flatten().copied().collect();
        self.check_skipped(self.skipped + losses.len() - used.len())?;
        if used.is_empty() {
            return Err(Error::Empty("usable records"));
        }
        Ok(pairwise_sum(&used) / used.len() as f64)
    }
}

/// Segment on a ground-truth envelope. When the decay is too fast for the
/// floor rule, the segment starts at the peak (or the edge guard) instead; `None` if
/// even that does not fit inside the guarded record.
fn training_segment(
    truth: &crate::kernels::Envelope,
    freq_hz: f64,
    policy: &SegmentPolicy,
) -> Option<(usize, usize)> {
    match select_segment(truth, freq_hz, policy) {
        Ok(s) => Some(s),
        Err(Error::SegmentTooShort { .. }) => {
            let fs = truth.sample_rate_hz();
            let guard = policy.edge_guard(freq_hz, fs);
            let start = argmax(truth.values()).max(guard);
            let len = policy.segment_length(freq_hz, fs);
            (len > 0 && start + len + guard < truth.len() && truth.values()[start] > 0.0)
                .then_some((start, start + len))
        }
        Err(_) => None,
    }
}

/// Mean loss of one form and width over a raw labeled dataset.
pub fn mean_dataset_loss(
    form: KernelForm,
    theta: f64,
    dataset: &[LabeledRecord],
    target_mode_index: usize,
    center_freq_hz: f64,
    policy: &SegmentPolicy,
) -> Result<f64> {
    PreparedSet::new(dataset, target_mode_index, center_freq_hz, policy)?.loss(form, theta)
}

/// Outcome of one local descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Descent {
    pub theta_init: f64,
    pub theta: f64,
    pub loss: f64,
    pub iterations: usize,
}

/// Local finite-difference descent in `ln theta` from `theta_init`.
///
/// `objective` returns the loss at `theta`; infeasible points report
/// `f64::INFINITY`.
pub fn minimize_log_theta(
    objective: &dyn Fn(f64) -> f64,
    theta_init: f64,
    bounds: (f64, f64),
    cfg: &TrainConfig,
) -> Descent {
    let (lo, hi) = (bounds.0.ln(), bounds.1.ln());
    let f = |u: f64| {
        let v = objective(u.exp());
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut u = theta_init.ln().clamp(lo, hi);
    let mut loss = f(u);
    let mut alpha: f64 = 0.1;
    let mut iterations = 0;
    let h = cfg.step_size;
    while iterations < cfg.max_iters && loss.is_finite() {
        iterations += 1;
        let up = (u + h).min(hi);
        let um = (u - h).max(lo);
        let lp = if up > u { f(up) } else { loss };
        let lm = if um < u { f(um) } else { loss };
        let (g, curv) = if up > u && um < u && lp.is_finite() && lm.is_finite() {
            ((lp - lm) / (up - um), (lp - 2.0 * loss + lm) / (h * h))
        } else if up > u && lp.is_finite() {
            ((lp - loss) / (up - u), f64::NAN)
        } else if um < u && lm.is_finite() {
            ((loss - lm) / (u - um), f64::NAN)
        } else {
            (0.0, f64::NAN)
        };

        let step = if curv > 0.0 {
            (-g / curv).clamp(-MAX_STEP, MAX_STEP)
        } else if g != 0.0 {
            -g.signum() * alpha
        } else {
            0.0
        };

        let mut best = (u, loss);
        let mut t = 1.0;
        while step != 0.0 && (t * step).abs() >= MIN_STEP {
            let cand = (u + t * step).clamp(lo, hi);
            if cand != u {
                let lc = f(cand);
                if lc < loss {
                    best = (cand, lc);
                    break;
                }
            }
            t *= 0.5;
        }
        if curv.is_nan() || curv <= 0.0 {
            alpha = if best.0 != u { (alpha * 2.0).min(MAX_STEP) } else { (alpha * 0.5).max(MIN_STEP) };
        }
        // a finite-difference probe can beat the line search
        if lp < best.1 {
            best = (up, lp);
        }
        if lm < best.1 {
            best = (um, lm);
        }
        if best.1 >= loss {
            break;
        }
        let rel = (loss - best.1) / loss.abs().max(f64::MIN_POSITIVE);
        u = best.0;
        loss = best.1;
        if rel < cfg.tol {
            break;
        }
    }
    Descent {
        theta_init,
        theta: u.exp(),
        loss,
        iterations,
    }
}

/// `n` points evenly spaced in `ln theta`, endpoints included.
pub fn log_scan(bounds: (f64, f64), n: usize) -> Vec<f64> {
    let (lo, hi) = (bounds.0.ln(), bounds.1.ln());
    match n {
        0 => Vec::new(),
        1 => vec![(0.5 * (lo + hi)).exp()],
        _ => (0..n).map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()).collect(),
    }
}

/// Starting points: the `grid` lowest scan points by `objective` (all scan
/// cell midpoints when the scan is empty), then log-uniform draws.
pub fn restart_points<R: Rng>(
    objective: &dyn Fn(f64) -> f64,
    bounds: (f64, f64),
    cfg: &TrainConfig,
    rng: &mut R,
) -> Vec<f64> {
    let (lo, hi) = (bounds.0.ln(), bounds.1.ln());
    let grid = cfg.grid_restarts.min(cfg.n_restarts);
    let mut pts: Vec<f64> = if cfg.scan_points == 0 {
        (0..grid)
            .map(|i| (lo + (hi - lo) * (i as f64 + 0.5) / grid as f64).exp())
            .collect()
    } else {
        let mut scan: Vec<(f64, f64)> = log_scan(bounds, cfg.scan_points)
            .into_iter()
            .map(|t| (objective(t), t))
            .collect();
        scan.sort_by(|a, b| a.0.total_cmp(&b.0));
        scan.into_iter().take(grid).map(|(_, t)| t).collect()
    };
    let rest = cfg.n_restarts - pts.len();
    pts.extend((0..rest).map(|_| rng.random_range(lo..hi).exp()));
    pts
}

/// Multi-start fit of `theta` for `form`.
pub fn optimize_theta(
    form: KernelForm,
    train: &PreparedSet,
    val: &PreparedSet,
    cfg: &TrainConfig,
    bounds: (f64, f64),
    seed: u64,
) -> Result<FitResult> {
    cfg.validate()?;
    check_bounds(bounds)?;
    let train_memo = Memo::new(|theta| train.loss(form, theta).unwrap_or(f64::INFINITY));
    let val_memo = Memo::new(|theta| val.loss(form, theta).unwrap_or(f64::INFINITY));

    let mut r = rng::stream(seed, &[form as u64]);
    let objective = |theta: f64| train_memo.get(theta);
    let starts = restart_points(&objective, bounds, cfg, &mut r);
    let traces: Vec<RestartTrace> = starts
        .iter()
        .map(|&t0| {
            let d = minimize_log_theta(&objective, t0, bounds, cfg);
            let val_loss = if d.loss.is_finite() { val_memo.get(d.theta) } else { f64::INFINITY };
            RestartTrace {
                theta_init: t0,
                theta_final: d.theta,
                final_loss: d.loss,
                val_loss,
            }
        })
        .collect();

    let best = traces
        .iter()
        .filter(|t| t.val_loss.is_finite() && t.final_loss.is_finite())
        .min_by(|a, b| a.val_loss.total_cmp(&b.val_loss).then(a.final_loss.total_cmp(&b.final_loss)))
        .ok_or(Error::AllRestartsFailed)?;
    Ok(FitResult {
        form,
        theta_opt: best.theta_final,
        train_loss: best.final_loss,
        val_loss: best.val_loss,
        bounds,
        restart_traces: traces,
    })
}

/// Caches objective values by the exact bit pattern of `theta`.
struct Memo<F: Fn(f64) -> f64> {
    f: F,
    cache: Mutex<HashMap<u64, f64>>,
}

impl<F: Fn(f64) -> f64> Memo<F> {
    fn new(f: F) -> Self {
        Self {
            f,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn get(&self, theta: f64) -> f64 {
        if let Some(v) = self.cache.lock().expect("memo poisoned").get(&theta.to_bits()) {
            return *v;
        }
        let v = (self.f)(theta);
        self.cache.lock().expect("memo poisoned").insert(theta.to_bits(), v);
        v
    }
}

/// One registry entry: the fitted width of a form for one scenario mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitEntry {
    pub scenario: String,
    pub mode_index: usize,
    pub form: KernelForm,
    pub center_freq_hz: f64,
    pub theta_opt: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub bounds: (f64, f64),
    pub seed: u64,
    pub train_count: usize,
    pub val_count: usize,
}

/// `(scenario, mode, form) -> theta` map persisted as `fits.json`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitRegistry {
    entries: BTreeMap<String, FitEntry>,
}

impl FitRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(scenario: &str, mode_index: usize, form: KernelForm) -> String {
        format!("{scenario}/{mode_index}/{form}")
    }

    pub fn insert(&mut self, entry: FitEntry) {
        self.entries
            .insert(Self::key(&entry.scenario, entry.mode_index, entry.form), entry);
    }

    pub fn get(&self, scenario: &str, mode_index: usize, form: KernelForm) -> Option<&FitEntry> {
        self.entries.get(&Self::key(scenario, mode_index, form))
    }

    pub fn theta(&self, scenario: &str, mode_index: usize, form: KernelForm) -> Result<f64> {
        self.get(scenario, mode_index, form)
            .map(|e| e.theta_opt)
            .ok_or_else(|| Error::MissingFit(Self::key(scenario, mode_index, form)))
    }

    pub fn entries(&self) -> impl Iterator<Item = &FitEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn merge(&mut self, other: FitRegistry) {
        self.entries.extend(other.entries);
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}
