//! Command-line front end: dataset generation, width fitting, single
//! ensemble estimation and the Monte-Carlo studies.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use envdamp::estimator::{estimate_from_ensemble, EnsembleConfig};
use envdamp::harness::config::{ExperimentConfig, SEED_ENV};
use envdamp::harness::fixture::EnsembleRecipe;
use envdamp::harness::output::{write_plot_table, write_results_csv, write_summary_json};
use envdamp::harness::scenario::{InterferenceConfig, Method};
use envdamp::harness::summary::{summarize, SummaryCell};
use envdamp::harness::sweep::{run_interference_study, run_scenario_sweep, ResultRow, SweepOptions};
use envdamp::harness::training::{dataset_specs, train_forms};
use envdamp::optimizer::{default_theta_bounds, FitRegistry};
use envdamp::signal_model::{generate_dataset, read_dataset, write_dataset, TimeRecord};
use envdamp::{Error, KernelForm, KernelSpec, Result};

#[derive(Parser)]
#[command(name = "envdamp", version, about = "Envelope-based modal damping estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Base seed; overrides ENVDAMP_SEED and the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
    /// Full-size datasets and ensembles (slow).
    #[arg(long)]
    full_scale: bool,
}

#[derive(Args, Clone)]
struct StudyArgs {
    #[command(flatten)]
    common: Common,
    /// Fit registry; defaults to `<out>/fits.json`.
    #[arg(long)]
    fits: Option<PathBuf>,
    /// Comma separated method ids or groups (all, forms, baselines, top).
    #[arg(long)]
    methods: Option<String>,
    /// Validate and print the plan without computing.
    #[arg(long)]
    dry_run: bool,
    /// Record per-estimate wall time (output is then not reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write the labeled training and validation datasets.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Fit kernel widths and write the fit registry.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Forms to fit: `all` or a comma separated list.
        #[arg(long, default_value = "all")]
        forms: String,
        /// Fit for every separation of the interference study instead of
        /// the configured scenario.
        #[arg(long)]
        interference: bool,
        /// Existing registry to extend; defaults to `<out>/fits.json`.
        #[arg(long)]
        fits: Option<PathBuf>,
    },
    /// Estimate the damping ratio of one ensemble.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// `dataset.json` holding the records; the bundled noise-free
        /// fixture is used when neither input is given.
        #[arg(long, conflicts_with = "recipe")]
        input: Option<PathBuf>,
        /// Ensemble recipe (TOML).
        #[arg(long)]
        recipe: Option<PathBuf>,
        /// Mode index into the input's frequency list.
        #[arg(long)]
        mode: Option<usize>,
        #[arg(long, default_value = "triangle_window")]
        form: KernelForm,
        /// Kernel width; taken from `--fits` or a mid-range default when absent.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long, requires = "fit_scenario")]
        fits: Option<PathBuf>,
        /// Registry scenario to read the width from.
        #[arg(long)]
        fit_scenario: Option<String>,
    },
    /// Monte-Carlo SNR sweep of the configured scenario.
    Sweep(StudyArgs),
    /// Closely spaced mode study.
    Interfere(StudyArgs),
    /// Envelope methods against the frequency-domain baselines.
    Compare(StudyArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate { common } => generate(&common),
        Command::Optimize {
            common,
            forms,
            interference,
            fits,
        } => optimize(&common, &forms, interference, fits),
        Command::Estimate {
            common,
            input,
            recipe,
            mode,
            form,
            theta,
            fits,
            fit_scenario,
        } => estimate(&common, input, recipe, mode, form, theta, fits.zip(fit_scenario)),
        Command::Sweep(a) => study(&a, Study::Sweep),
        Command::Interfere(a) => study(&a, Study::Interference),
        Command::Compare(a) => study(&a, Study::Compare),
    }
}

fn load(common: &Common) -> Result<(ExperimentConfig, u64)> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if common.full_scale {
        cfg.apply_full_scale();
    }
    let env = std::env::var(SEED_ENV).ok();
    let seed = cfg.resolve_seed(common.seed, env.as_deref())?;
    Ok((cfg, seed))
}

fn out_dir(common: &Common) -> Result<&Path> {
    std::fs::create_dir_all(&common.out)?;
    Ok(&common.out)
}

fn generate(common: &Common) -> Result<()> {
    let (cfg, seed) = load(common)?;
    let freqs = cfg.modal_system()?.frequencies_hz();
    let (train, val) = dataset_specs(&freqs, &cfg.training_setup(), seed);
    let out = out_dir(common)?;
    for (name, spec) in [("train", train), ("val", val)] {
        let dir = out.join(name);
        write_dataset(&dir, &spec, &generate_dataset(&spec)?)?;
        println!("wrote {} records to {}", spec.n_records, dir.display());
    }
    Ok(())
}

fn parse_forms(s: &str) -> Result<Vec<KernelForm>> {
    if s.trim() == "all" {
        return Ok(KernelForm::ALL.to_vec());
    }
    let mut forms = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect::<Result<Vec<KernelForm>>>()?;
    forms.sort();
    forms.dedup();
    if forms.is_empty() {
        return Err(Error::Config("empty form list".into()));
    }
    Ok(forms)
}

fn load_registry(path: &Path) -> Result<FitRegistry> {
    if path.exists() {
        FitRegistry::load(path)
    } else {
        Ok(FitRegistry::new())
    }
}

fn optimize(common: &Common, forms: &str, interference: bool, fits: Option<PathBuf>) -> Result<()> {
    let (cfg, seed) = load(common)?;
    let forms = parse_forms(forms)?;
    let setup = cfg.training_setup();
    let out = out_dir(common)?;
    let path = fits.unwrap_or_else(|| out.join("fits.json"));
    let mut registry = load_registry(&path)?;

    let mut jobs: Vec<(String, Vec<f64>, usize)> = Vec::new();
    if interference {
        let ic = cfg.interference_config(seed);
        ic.validate()?;
        for &df in &ic.delta_f_grid_hz {
            jobs.push((InterferenceConfig::scenario_name(df), ic.system(df)?.frequencies_hz(), 1));
        }
    } else {
        let sc = cfg.scenario_config(seed)?;
        jobs.push((sc.name.clone(), sc.modes.frequencies_hz(), sc.target_mode_index));
    }
    for (name, freqs, idx) in jobs {
        let reg = train_forms(&name, &freqs, idx, &forms, &setup, &cfg.segment, seed, |fit| {
            println!(
                "{name} mode {idx} {:<16} theta {:.6} train {:.4e} val {:.4e}",
                fit.form.name(),
                fit.theta_opt,
                fit.train_loss,
                fit.val_loss
            );
        })?;
        registry.merge(reg);
    }
    registry.save(&path)?;
    println!("wrote {} entries to {}", registry.len(), path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn estimate(
    common: &Common,
    input: Option<PathBuf>,
    recipe: Option<PathBuf>,
    mode: Option<usize>,
    form: KernelForm,
    theta: Option<f64>,
    fits: Option<(PathBuf, String)>,
) -> Result<()> {
    let (cfg, _) = load(common)?;
    let (records, freq, mode_index): (Vec<TimeRecord>, f64, usize) = match (input, recipe) {
        (Some(path), _) => {
            let (freqs, labeled) = read_dataset(&path)?;
            let idx = mode.unwrap_or(0);
            let f = *freqs.get(idx).ok_or(Error::IndexOutOfRange {
                index: idx,
                len: freqs.len(),
            })?;
            (labeled.into_iter().map(|r| r.record).collect(), f, idx)
        }
        (None, recipe) => {
            let r = match recipe {
                Some(p) => EnsembleRecipe::from_toml_str(&std::fs::read_to_string(&p)?)?,
                None => EnsembleRecipe::bundled(),
            };
            let idx = mode.unwrap_or(r.target_mode_index);
            let f = r
                .modes
                .get(idx)
                .ok_or(Error::IndexOutOfRange {
                    index: idx,
                    len: r.modes.len(),
                })?
                .damped_freq_hz;
            (r.records()?, f, idx)
        }
    };
    let first = records.first().ok_or(Error::Empty("record list"))?;
    let theta = match (theta, fits) {
        (Some(t), _) => t,
        (None, Some((path, scenario))) => FitRegistry::load(&path)?.theta(&scenario, mode_index, form)?,
        (None, None) => {
            let (lo, hi) = default_theta_bounds(form, freq, &[freq], first.duration_s());
            (lo * hi).sqrt()
        }
    };
    let ens = EnsembleConfig {
        n_records: records.len(),
        kernel: KernelSpec::new(form, theta, freq)?,
        segment_policy: cfg.segment,
    };
    let est = estimate_from_ensemble(&records, &ens, freq)?;
    println!("zeta_hat = {:.4}%", 100.0 * est.zeta);
    println!(
        "form {} theta {theta:.6} records {} segment [{}, {}] r_squared {:.6}",
        form.name(),
        records.len(),
        est.segment.0,
        est.segment.1,
        est.r_squared
    );
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Study {
    Sweep,
    Interference,
    Compare,
}

fn study(a: &StudyArgs, kind: Study) -> Result<()> {
    let (cfg, seed) = load(&a.common)?;
    let methods = match (&a.methods, kind) {
        (Some(m), _) => Method::parse_list(m)?,
        (None, Study::Compare) => Method::all(),
        (None, _) => cfg.method_list()?,
    };
    let scenario = cfg.scenario_config(seed)?;
    let interference = cfg.interference_config(seed);
    let target_zeta = scenario.target().damping_ratio;
    let interference_zeta = interference.target.damping_ratio;
    let scenario_name = scenario.name.clone();

    if a.dry_run {
        return print_plan(kind, &scenario, &interference, &methods);
    }
    let out = out_dir(&a.common)?;
    let fits_path = a.fits.clone().unwrap_or_else(|| out.join("fits.json"));
    let needs_fits = methods.iter().any(|m| m.form().is_some());
    let fits = if fits_path.exists() {
        FitRegistry::load(&fits_path)?
    } else if needs_fits {
        return Err(Error::Config(format!(
            "fit registry {} not found; run `envdamp optimize` first",
            fits_path.display()
        )));
    } else {
        FitRegistry::new()
    };
    let opts = SweepOptions {
        policy: cfg.segment,
        baselines: cfg.baselines.clone(),
        timing: a.timing,
        fit_scenario: None,
    };
    let rows = match kind {
        Study::Interference => run_interference_study(&interference, &methods, &fits, &opts)?,
        _ => run_scenario_sweep(&scenario, &methods, &fits, &opts)?,
    };
    let truth = move |name: &str| {
        if name == scenario_name {
            Some(target_zeta)
        } else if name.starts_with("interference_df") {
            Some(interference_zeta)
        } else {
            None
        }
    };
    let cells = summarize(&rows, &truth)?;
    write_results_csv(&out.join("results.csv"), &rows)?;
    write_summary_json(&out.join("summary.json"), &cells)?;
    write_plot_table(&out.join("plot.dat"), &cells)?;
    report(&rows, &cells, kind);
    println!("wrote {} rows to {}", rows.len(), out.join("results.csv").display());
    Ok(())
}

fn print_plan(
    kind: Study,
    scenario: &envdamp::harness::scenario::ScenarioConfig,
    interference: &InterferenceConfig,
    methods: &[Method],
) -> Result<()> {
    let ids: Vec<&str> = methods.iter().map(|m| m.id()).collect();
    let snr = |g: &[Option<f64>]| {
        g.iter()
            .map(|s| s.map_or_else(|| "inf".to_string(), |v| v.to_string()))
            .collect::<Vec<_>>()
            .join(", ")
    };
    println!("methods: {}", ids.join(", "));
    let rows = if kind == Study::Interference {
        interference.validate()?;
        let grid: Vec<String> = interference.delta_f_grid_hz.iter().map(f64::to_string).collect();
        println!("delta_f (Hz): {}", grid.join(", "));
        println!(
            "snr (dB): {}",
            snr(&interference.snr_points_db.iter().map(|&s| Some(s)).collect::<Vec<_>>())
        );
        println!("trials: {}  recordings: {}", interference.n_trials, interference.n_recordings);
        methods.len() * interference.delta_f_grid_hz.len() * interference.snr_points_db.len() * interference.n_trials
    } else {
        scenario.validate()?;
        println!("scenario: {} (target mode {})", scenario.name, scenario.target_mode_index);
        println!("snr (dB): {}", snr(&scenario.snr_grid_db));
        println!("trials: {}  recordings: {}", scenario.n_trials, scenario.n_recordings);
        methods.len() * scenario.snr_grid_db.len() * scenario.n_trials
    };
    println!("planned rows: {rows}");
    Ok(())
}

fn report(rows: &[ResultRow], cells: &[SummaryCell], kind: Study) {
    let invalid = rows.iter().filter(|r| !r.valid()).count();
    if invalid > 0 {
        println!("{invalid} of {} estimates were invalid", rows.len());
    }
    if kind != Study::Compare {
        return;
    }
    println!("{:<10} {:>6} {:<16} {:>10} {:>10}", "scenario", "snr", "method", "median%", "rmse%");
    for c in cells {
        let f = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        println!(
            "{:<10} {:>6} {:<16} {:>10} {:>10}",
            c.scenario,
            c.snr_db.map_or_else(|| "inf".to_string(), |s| s.to_string()),
            c.method.id(),
            f(c.median.map(|m| 100.0 * m)),
            f(c.rmse_percent)
        );
    }
}
