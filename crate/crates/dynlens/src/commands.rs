//! Subcommand bodies. Each one writes into `{out}/{command}-{hash}` where
//! `hash` is the first 16 hex digits of the SHA-256 of the command name, the
//! effective configuration and any input file, so a changed input never
//! overwrites an earlier run. Files are written in a fixed order from one
//! thread once all computation has finished.

use std::path::{Path, PathBuf};

use dynlens_core::controllers::{demands_along_trajectory, schedule_lens_commands, ViewingCondition};
use dynlens_core::gaze::{sweep, Breakeven};
use dynlens_core::observer::{simulate, ObserverState, Stimulus};
use dynlens_core::optics::{fit_calibration, FitSpace};
use dynlens_core::psychophysics::{
    aggregate, analyze_preferences, analyze_symptoms, fit_counts, run_experiment, wilcoxon_signed_rank, Alternative,
    ExperimentConfig, ExperimentResult, FitOptions, LapseMode, Protocol,
};
use dynlens_core::stimuli::{render_diamond_frame, render_rds, GrayImage, StereoPair, StimulusKind};
use dynlens_core::Diopters;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::formats;
use crate::parallel;
use crate::tune::{tune_observer, Targets, TuneOptions};

/// Anchor printed beside the simulated breakeven fraction.
pub const PUBLISHED_BREAKEVEN: f64 = 1.0 / 3.0;

/// Files of one run, written together.
pub struct Output {
    files: Vec<(String, Vec<u8>)>,
}

impl Output {
    fn new() -> Self {
        Output { files: Vec::new() }
    }

    fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    fn write(self, base: &Path, command: &str, key: &[&[u8]]) -> CliResult<PathBuf> {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        for k in key {
            h.update((k.len() as u64).to_le_bytes());
            h.update(k);
        }
        let dir = base.join(format!("{command}-{}", &hex::encode(h.finalize())[..16]));
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
            }
            std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        }
        Ok(dir)
    }
}

/// The configuration recorded with a run. Where results go and how many
/// threads computed them do not change the results, so both are reset.
fn recorded(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    let d = RunConfig::preset(c.preset);
    c.out = d.out;
    c.threads = d.threads;
    c.to_ini_string()
}

fn save(cfg: &RunConfig, out: Output, command: &str, extra: &[&[u8]]) -> CliResult<PathBuf> {
    let ini = recorded(cfg);
    let mut out = out;
    out.add("config.ini", ini.clone());
    let mut key = vec![ini.as_bytes()];
    key.extend_from_slice(extra);
    out.write(&cfg.out, command, &key)
}

fn in_pool<T: Send>(cfg: &RunConfig, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    Ok(parallel::pool(cfg.threads)?.install(f))
}

pub fn calibrate(cfg: &RunConfig, samples_path: &Path) -> CliResult<PathBuf> {
    let text = std::fs::read_to_string(samples_path).map_err(|e| CliError::io(samples_path, e))?;
    let samples = formats::parse_calibration_samples(&text)?;
    let cal = fit_calibration(&samples, cfg.lens.fit_space)?.with_settle_time(cfg.lens.settle_ms)?;
    let mut report = formats::calibration_report(&cal);
    // The drive window is reported when the fitted line reaches it; the fit
    // itself stands either way.
    match cal.clone().with_distance_window(cfg.lens.near_m, cfg.lens.far_m) {
        Ok(w) => {
            report.push_str(&format!(
                "window_m = {} to {}\nwindow_current_min_mA = {}\nwindow_current_max_mA = {}\n",
                cfg.lens.near_m, cfg.lens.far_m, w.valid_current_range.0, w.valid_current_range.1
            ));
        }
        Err(e) => report.push_str(&format!("window_error = {e}\n")),
    }
    let mut out = Output::new();
    out.add("calibration.txt", report);
    out.add("residuals.csv", formats::calibration_csv(&cal));
    save(cfg, out, "calibrate", &[text.as_bytes()])
}

fn render_pair(cfg: &RunConfig) -> CliResult<StereoPair> {
    Ok(match cfg.render.stimulus {
        StimulusKind::Diamond => render_diamond_frame(&cfg.diamond(), &cfg.geometry, cfg.render.t_s)?,
        StimulusKind::RandomDot => render_rds(&cfg.rds_params(), &cfg.geometry)?,
    })
}

pub fn render(cfg: &RunConfig) -> CliResult<PathBuf> {
    let pair = render_pair(cfg)?;
    let kind = cfg.render.stimulus.as_str();
    let fill = match cfg.render.stimulus {
        StimulusKind::Diamond => cfg.diamond().background,
        StimulusKind::RandomDot => cfg.rds.background,
    };
    let montage = GrayImage::cross_fuse_montage(&pair.left, &pair.right, cfg.render.montage_gap_px, fill);
    let mut out = Output::new();
    out.add(format!("{kind}_L.pgm"), formats::pgm(&pair.left));
    out.add(format!("{kind}_R.pgm"), formats::pgm(&pair.right));
    out.add(format!("{kind}_montage.pgm"), formats::pgm(&montage));
    out.add(format!("{kind}.txt"), formats::sidecar(&pair.meta));
    save(cfg, out, "render", &[])
}

fn file_label(cell: &str) -> String {
    cell.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '+' { c } else { '_' }).collect()
}

fn stimulus_for(cond: &ViewingCondition, e: &ExperimentConfig, v: Diopters) -> dynlens_core::Result<Stimulus> {
    let d = demands_along_trajectory(cond, &e.geometry, v)?;
    Ok(Stimulus { vergence: v, demand_left: d.left, demand_right: d.right })
}

/// Base-observer trajectories and lens-command logs: one diamond cycle after
/// two cycles of warm-up, or three seconds after a step from the fixation
/// cross to each depth.
fn experiment_extras(cfg: &RunConfig, e: &ExperimentConfig, out: &mut Output) -> CliResult<()> {
    let screen = e.geometry.screen_vergence();
    let every = ((cfg.lens.log_step_ms / 1000.0 / e.dt_s).round() as usize).max(1);
    for (label, ci, depth) in e.cells() {
        let cond = &e.conditions[ci];
        let (states, fixation): (Vec<ObserverState>, Box<dyn Fn(f64) -> Diopters>) = match &e.protocol {
            Protocol::Disparity(p) => {
                let s = p.stimulus.clone();
                let period = s.period_s();
                let fix = move |t: f64| screen + s.offset_at(screen, t);
                let stim = |t: f64| stimulus_for(cond, e, fix(t));
                let init = ObserverState::fixating(&e.observer, &stim(0.0)?);
                let mut start = *simulate(&e.observer, init, stim, e.dt_s, 2.0 * period)?.last().unwrap();
                start.t_s = 0.0;
                (simulate(&e.observer, start, stim, e.dt_s, period)?, Box::new(fix))
            }
            Protocol::TimeToFuse(_) => {
                let v = screen + Diopters(depth.unwrap_or(0.0));
                let cross = stimulus_for(cond, e, screen)?;
                let mut start = ObserverState::fixating(&e.observer, &cross);
                dynlens_core::observer::settle(&e.observer, &mut start, &cross, e.dt_s)?;
                let target = stimulus_for(cond, e, v)?;
                (simulate(&e.observer, start, |_| Ok(target), e.dt_s, 3.0)?, Box::new(move |_| v))
            }
        };
        let sampled: Vec<ObserverState> = states.iter().step_by(every).copied().collect();
        out.add(format!("trajectory/{}.csv", file_label(&label)), formats::trajectory_csv(&sampled));
        if matches!(cond, ViewingCondition::DynamicLens { .. }) {
            let fix: Vec<(f64, Diopters)> = sampled.iter().map(|s| (s.t_s * 1000.0, fixation(s.t_s))).collect();
            let log = schedule_lens_commands(cond, &e.geometry, &fix)?;
            out.add(format!("lens_log/{}.csv", file_label(&label)), formats::lens_log_csv(&log));
        }
    }
    Ok(())
}

pub fn experiment_result(cfg: &RunConfig) -> CliResult<ExperimentResult> {
    let e = cfg.experiment()?;
    Ok(in_pool(cfg, || parallel::run_experiment_par(&e, cfg.seed))??)
}

/// Sequential reference run, used to check the parallel driver.
pub fn experiment_result_serial(cfg: &RunConfig) -> CliResult<ExperimentResult> {
    Ok(run_experiment(&cfg.experiment()?, cfg.seed)?)
}

pub fn experiment(cfg: &RunConfig) -> CliResult<PathBuf> {
    let e = cfg.experiment()?;
    let res = experiment_result(cfg)?;
    let mut out = Output::new();
    for r in &res.subjects {
        out.add(format!("trials/subject_{:02}.csv", r.subject), formats::trials_csv(&r.trials));
    }
    out.add("summary.csv", formats::summary_csv(&res));
    out.add("comparisons.csv", formats::comparisons_csv(&res.comparisons));
    out.add("report.txt", formats::experiment_report(&res));
    experiment_extras(cfg, &e, &mut out)?;
    save(cfg, out, "experiment", &[])
}

pub fn gaze_results(cfg: &RunConfig) -> CliResult<(Vec<(f64, dynlens_core::gaze::ConflictEstimate)>, Breakeven)> {
    let sim = cfg.gaze.sim(cfg.seed);
    let fr = cfg.gaze.fractions();
    let (rows, b) = in_pool(cfg, || -> dynlens_core::Result<_> {
        Ok((parallel::sweep_par(&sim, &cfg.gaze.model, &fr)?, parallel::breakeven_par(&sim, &cfg.gaze.model)?))
    })??;
    Ok((rows, b))
}

pub fn gaze_results_serial(cfg: &RunConfig) -> CliResult<Vec<(f64, dynlens_core::gaze::ConflictEstimate)>> {
    Ok(sweep(&cfg.gaze.sim(cfg.seed), &cfg.gaze.model, &cfg.gaze.fractions())?)
}

pub fn gazesim(cfg: &RunConfig) -> CliResult<PathBuf> {
    let (rows, b) = gaze_results(cfg)?;
    let mut out = Output::new();
    out.add("sweep.csv", formats::sweep_csv(&rows));
    out.add("breakeven.txt", formats::breakeven_report(&b, PUBLISHED_BREAKEVEN));
    save(cfg, out, "gazesim", &[])
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn stats_wilcoxon(path: &Path) -> CliResult<String> {
    let pairs = formats::parse_pairs(&read(path)?)?;
    let one = wilcoxon_signed_rank(&pairs, Alternative::Greater)?;
    let two = wilcoxon_signed_rank(&pairs, Alternative::TwoSided)?;
    let lower = pairs.iter().filter(|(b, t)| t < b).count();
    Ok(formats::wilcoxon_report(pairs.len(), lower, &one, &two))
}

pub struct FitArgs {
    pub gamma: f64,
    pub criterion: f64,
    pub log_levels: bool,
    pub bootstrap: usize,
    pub seed: u64,
    pub threads: usize,
}

/// One fit per condition found in the trial log, in order of first
/// appearance.
pub fn stats_fit(path: &Path, a: &FitArgs) -> CliResult<String> {
    let trials = formats::parse_trials(&read(path)?)?;
    let mut conds: Vec<String> = Vec::new();
    for t in &trials {
        if !conds.contains(&t.condition) {
            conds.push(t.condition.clone());
        }
    }
    let opts = FitOptions::new(a.gamma, a.criterion).with_log_levels(a.log_levels).with_lapse(LapseMode::Free { max: 0.06 });
    let pool = parallel::pool(a.threads)?;
    let mut fits = Vec::new();
    for (i, c) in conds.iter().enumerate() {
        let sub: Vec<_> = trials.iter().filter(|t| &t.condition == c).cloned().collect();
        let counts = aggregate(&sub);
        let mut f = fit_counts(&counts, &opts)?;
        if a.bootstrap > 0 {
            let seed = dynlens_core::rng::derive_seed(a.seed, &[i as u64]);
            f.ci = Some(pool.install(|| parallel::bootstrap_ci_par(&counts, &f, &opts, a.bootstrap, seed))?);
        }
        fits.push((c.clone(), f));
    }
    Ok(formats::fit_report(&fits))
}

pub fn stats_symptoms(path: &Path, a: &str, b: &str) -> CliResult<String> {
    let recs = formats::parse_questionnaire(&read(path)?)?;
    Ok(formats::item_tests_csv(&analyze_symptoms(&recs, a, b)?))
}

pub fn stats_preferences(path: &Path, neutral: f64) -> CliResult<String> {
    let recs = formats::parse_questionnaire(&read(path)?)?;
    Ok(formats::item_tests_csv(&analyze_preferences(&recs, neutral)?))
}

pub fn parse_fit_space(s: &str) -> CliResult<FitSpace> {
    match s {
        "meters" => Ok(FitSpace::Meters),
        "diopters" => Ok(FitSpace::Diopters),
        _ => Err(CliError::config(format!("fit space must be meters or diopters, got '{s}'"))),
    }
}

/// Writes the tuned configuration and the fit report.
pub fn tune(cfg: &RunConfig, opts: &TuneOptions) -> CliResult<(String, PathBuf)> {
    let res = tune_observer(cfg, &Targets::default(), opts)?;
    let mut tuned = cfg.clone();
    tuned.observer = res.observer.clone();
    let report = res.report();
    let mut out = Output::new();
    out.add("tuned.ini", recorded(&tuned));
    out.add("report.txt", report.clone());
    let key = format!("{} {} {}", opts.search_subjects, opts.check_subjects, opts.max_iterations);
    Ok((report, save(cfg, out, "tune-observer", &[key.as_bytes()])?))
}
