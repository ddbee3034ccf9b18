//! Monte-Carlo execution of scenario sweeps and the interference study.

use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{InterferenceConfig, Method, ScenarioConfig};
use crate::baselines::{
    half_power_damping, lsrf_fit, match_pole_to_mode, plscf_fit, sdof_local_fit, yoshida_three_point,
    SdofFitWindowSpec,
};
use crate::error::{Error, Result};
use crate::estimator::{envelopes_from_spectra, estimate_from_envelopes};
use crate::kernels::{build_freq_response, envelope_from_spectrum, KernelForm, KernelSpec};
use crate::optimizer::FitRegistry;
use crate::rng;
use crate::segment::SegmentPolicy;
use crate::signal_model::{apply_observation, synthesize_response, uniform, TimeRecord};
use crate::spectral::{forward_transform, frf_impulse_ratio, frf_truncate, FrfData};

/// How a baseline turns records into an FRF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrfKind {
    /// Samples before the estimated impact are dropped.
    Truncate,
    /// Output spectrum over a unit impulse at the estimated impact.
    ImpulseRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    /// Pole count for LSRF and pLSCF; `None` means `2 * modes + 4`.
    pub model_order: Option<usize>,
    pub lsrf_iters: usize,
    pub sdof_half_width_bins: usize,
    /// LSRF/pLSCF band as multiples of the lowest and highest mode frequency.
    pub band_factors: (f64, f64),
    /// Gaussian width for impact detection; `None` uses the fitted Gaussian
    /// width when available and `2 / f_target` otherwise.
    pub impact_sigma_s: Option<f64>,
    pub pp_frf: FrfKind,
    pub sdof_frf: FrfKind,
    pub yoshida_frf: FrfKind,
    pub lsrf_frf: FrfKind,
    pub plscf_frf: FrfKind,
    /// LSRF averages FRF power across records instead of complex values.
    pub lsrf_power_average: bool,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            model_order: None,
            lsrf_iters: 20,
            sdof_half_width_bins: 3,
            band_factors: (0.5, 1.5),
            impact_sigma_s: None,
            pp_frf: FrfKind::Truncate,
            sdof_frf: FrfKind::Truncate,
            yoshida_frf: FrfKind::ImpulseRatio,
            lsrf_frf: FrfKind::ImpulseRatio,
            plscf_frf: FrfKind::ImpulseRatio,
            lsrf_power_average: true,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lsrf_iters == 0 || self.sdof_half_width_bins == 0 {
            return Err(Error::Config("lsrf_iters and sdof_half_width_bins must be positive".into()));
        }
        if self.model_order == Some(0) {
            return Err(Error::Config("model_order must be positive".into()));
        }
        let (lo, hi) = self.band_factors;
        if !(lo > 0.0 && lo < 1.0 && hi > 1.0) {
            return Err(Error::Config(format!("band_factors must satisfy 0 < lo < 1 < hi, got ({lo}, {hi})")));
        }
        if self.impact_sigma_s.is_some_and(|s| !(s > 0.0)) {
            return Err(Error::Config("impact_sigma_s must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepOptions {
    pub policy: SegmentPolicy,
    pub baselines: BaselineConfig,
    /// Record per-estimate wall time (makes output nondeterministic).
    pub timing: bool,
    /// Registry scenario holding the fitted widths; defaults to the
    /// scenario's own name.
    pub fit_scenario: Option<String>,
}

/// One estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    pub method: Method,
    /// `None` is noiseless.
    pub snr_db: Option<f64>,
    pub trial: usize,
    /// Present iff the estimate is valid.
    pub zeta_hat: Option<f64>,
    pub wall_ms: Option<f64>,
}

impl ResultRow {
    pub fn valid(&self) -> bool {
        self.zeta_hat.is_some()
    }
}

/// Orders rows by `(snr, trial, method)`; noiseless sorts last.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.scenario
            .cmp(&b.scenario)
            .then(snr_key(a.snr_db).total_cmp(&snr_key(b.snr_db)))
            .then(a.trial.cmp(&b.trial))
            .then(a.method.id().cmp(b.method.id()))
    });
}

fn snr_key(s: Option<f64>) -> f64 {
    s.unwrap_or(f64::INFINITY)
}

/// Widths and kernels resolved once per sweep.
struct Resolved {
    methods: Vec<(Method, Option<Vec<Complex64>>)>,
    impact_kernel: Vec<Complex64>,
}

fn resolve(cfg: &ScenarioConfig, methods: &[Method], fits: &FitRegistry, opts: &SweepOptions) -> Result<Resolved> {
    let f = cfg.target().damped_freq_hz;
    let key = opts.fit_scenario.as_deref().unwrap_or(&cfg.name);
    let mut resolved = Vec::with_capacity(methods.len());
    for &m in methods {
        let h = match m.form() {
            Some(form) => {
                let theta = fits.theta(key, cfg.target_mode_index, form)?;
                Some(build_freq_response(&KernelSpec::new(form, theta, f)?, cfg.n_samples, cfg.sample_rate_hz)?)
            }
            None => None,
        };
        resolved.push((m, h));
    }
    let sigma = opts
        .baselines
        .impact_sigma_s
        .or_else(|| fits.get(key, cfg.target_mode_index, KernelForm::GaussianWindow).map(|e| e.theta_opt))
        .unwrap_or(2.0 / f);
    let impact_kernel = build_freq_response(
        &KernelSpec::new(KernelForm::GaussianWindow, sigma, f)?,
        cfg.n_samples,
        cfg.sample_rate_hz,
    )?;
    Ok(Resolved {
        methods: resolved,
        impact_kernel,
    })
}

/// Observed records of one `(snr, trial)` cell.
pub fn trial_records(cfg: &ScenarioConfig, snr_index: usize, trial: usize) -> Result<Vec<TimeRecord>> {
    let clean = synthesize_response(&cfg.modes, cfg.n_samples, cfg.sample_rate_hz)?;
    let snr = cfg.snr_grid_db[snr_index];
    let mut r = rng::stream(cfg.rng_seed, &[trial as u64, snr_index as u64]);
    (0..cfg.n_recordings)
        .map(|_| {
            let scale = uniform(&mut r, cfg.observation.scale_range);
            let shift = uniform(&mut r, cfg.observation.shift_range_s);
            let noise_seed: u64 = r.random();
            apply_observation(&clean, scale, shift, snr, noise_seed)
        })
        .collect()
}

/// Runs every method on every `(snr, trial)` cell. Failures become invalid
/// rows; only configuration errors abort.
pub fn run_scenario_sweep(
    cfg: &ScenarioConfig,
    methods: &[Method],
    fits: &FitRegistry,
    opts: &SweepOptions,
) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    opts.policy.validate()?;
    opts.baselines.validate()?;
    if methods.is_empty() {
        return Err(Error::Config("no methods requested".into()));
    }
    let resolved = resolve(cfg, methods, fits, opts)?;
    let cells: Vec<(usize, usize)> = (0..cfg.snr_grid_db.len())
        .flat_map(|s| (0..cfg.n_trials).map(move |t| (s, t)))
        .collect();
    let per_cell: Vec<Vec<ResultRow>> = cells
        .par_iter()
        .map(|&(s, t)| run_cell(cfg, &resolved, opts, s, t))
        .collect::<Result<_>>()?;
    let mut rows: Vec<ResultRow> = per_cell.into_iter().flatten().collect();
    sort_rows(&mut rows);
    Ok(rows)
}

fn run_cell(cfg: &ScenarioConfig, resolved: &Resolved, opts: &SweepOptions, s: usize, t: usize) -> Result<Vec<ResultRow>> {
    let records = trial_records(cfg, s, t)?;
    let fs = cfg.sample_rate_hz;
    let spectra: Vec<Vec<Complex64>> = records.iter().map(|r| forward_transform(r).into_bins()).collect();
    let mut impacts: Option<Vec<usize>> = None;
    let f = cfg.target().damped_freq_hz;

    let mut rows = Vec::with_capacity(resolved.methods.len());
    for (method, h) in &resolved.methods {
        let start = Instant::now();
        let est = match h {
            Some(h) => envelopes_from_spectra(&spectra, h, fs)
                .and_then(|envs| estimate_from_envelopes(&envs, f, &opts.policy))
                .map(|e| e.zeta),
            None => {
                let imp = match &impacts {
                    Some(i) => i,
                    None => impacts.insert(
                        spectra
                            .iter()
                            .map(|sp| envelope_from_spectrum(sp, &resolved.impact_kernel, fs).map(|e| e.argmax()))
                            .collect::<Result<_>>()?,
                    ),
                };
                estimate_baseline(*method, &records, imp, cfg, &opts.baselines)
            }
        };
        let wall = opts.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
        rows.push(ResultRow {
            scenario: cfg.name.clone(),
            method: *method,
            snr_db: cfg.snr_grid_db[s],
            trial: t,
            zeta_hat: est.ok().filter(|z| z.is_finite() && *z > 0.0 && *z < 1.0),
            wall_ms: wall,
        });
    }
    Ok(rows)
}

fn build_frfs(kind: FrfKind, records: &[TimeRecord], impacts: &[usize]) -> Result<Vec<FrfData>> {
    records
        .iter()
        .zip(impacts)
        .map(|(r, &m)| match kind {
            FrfKind::Truncate => Ok(frf_truncate(r, m, Some(r.len()))?.one_sided()),
            FrfKind::ImpulseRatio => frf_impulse_ratio(r, m),
        })
        .collect()
}

/// Damping ratio of the target mode from one baseline.
pub fn estimate_baseline(
    method: Method,
    records: &[TimeRecord],
    impacts: &[usize],
    cfg: &ScenarioConfig,
    bcfg: &BaselineConfig,
) -> Result<f64> {
    let freqs = cfg.modes.frequencies_hz();
    let f = cfg.target().damped_freq_hz;
    let gap = freqs
        .iter()
        .map(|g| (g - f).abs())
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let half = (0.1 * f).min(0.5 * gap);
    let kind = match method {
        Method::PeakPicking => bcfg.pp_frf,
        Method::SdofFit => bcfg.sdof_frf,
        Method::Yoshida => bcfg.yoshida_frf,
        Method::Lsrf => bcfg.lsrf_frf,
        Method::Plscf => bcfg.plscf_frf,
        Method::Envelope(_) => return Err(Error::InvalidParameter("not a baseline".into())),
    };
    let frfs = build_frfs(kind, records, impacts)?;
    let order = bcfg.model_order.unwrap_or(2 * freqs.len() + 4);
    let band = (
        bcfg.band_factors.0 * freqs[0],
        bcfg.band_factors.1 * freqs[freqs.len() - 1],
    );
    let peak_of = |frf: &FrfData| {
        frf.peak_in(f - half, f + half)
            .ok_or_else(|| Error::DegeneratePeak(format!("no bins within {half} Hz of {f} Hz")))
    };
    match method {
        Method::PeakPicking => {
            let mean = FrfData::mean(&frfs)?;
            half_power_damping(&mean, peak_of(&mean)?)
        }
        Method::SdofFit => {
            let mean = FrfData::mean(&frfs)?;
            let window = SdofFitWindowSpec::new(bcfg.sdof_half_width_bins)?;
            sdof_local_fit(&mean, peak_of(&mean)?, window).map(|(_, z)| z)
        }
        Method::Yoshida => {
            let mean = FrfData::mean(&frfs)?;
            yoshida_three_point(&mean, peak_of(&mean)?).map(|(_, z)| z)
        }
        Method::Lsrf => {
            let mean = if bcfg.lsrf_power_average { FrfData::rms_mean(&frfs)? } else { FrfData::mean(&frfs)? };
            let mean = mean.band(band.0, band.1);
            let poles = lsrf_fit(&mean, order, order, bcfg.lsrf_iters)?;
            match_pole_to_mode(&poles, f).map(|(_, z)| z)
        }
        Method::Plscf => {
            let banded: Vec<FrfData> = frfs.iter().map(|x| x.band(band.0, band.1)).collect();
            let poles = plscf_fit(&banded, order)?;
            match_pole_to_mode(&poles, f).map(|(_, z)| z)
        }
        Method::Envelope(_) => unreachable!(),
    }
}

/// Runs the sweep once per separation; envelope widths come from the
/// registry under each separation's scenario name unless
/// `cfg.fit_scenario` names a shared entry.
pub fn run_interference_study(
    cfg: &InterferenceConfig,
    methods: &[Method],
    fits: &FitRegistry,
    opts: &SweepOptions,
) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for (i, &df) in cfg.delta_f_grid_hz.iter().enumerate() {
        let scenario = cfg.scenario(df, i)?;
        let o = SweepOptions {
            fit_scenario: cfg.fit_scenario.clone().or_else(|| opts.fit_scenario.clone()),
            ..opts.clone()
        };
        rows.extend(run_scenario_sweep(&scenario, methods, fits, &o)?);
    }
    sort_rows(&mut rows);
    Ok(rows)
}
