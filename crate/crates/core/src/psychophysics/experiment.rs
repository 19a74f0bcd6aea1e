use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use super::fit::{aggregate, bootstrap_ci, fit_counts, FitOptions, LevelCounts, PsychometricFit};
use super::staircase::StaircaseState;
use super::wilcoxon::{wilcoxon_signed_rank, Alternative, WilcoxonResult};
use super::TrialRecord;
use crate::controllers::{demands_along_trajectory, ViewingCondition};
use crate::error::{Error, Result};
use crate::geometry::DisplayGeometry;
use crate::observer::{
    decide, jitter_subject, p_correct_disparity, p_correct_duration, simulate, time_to_fuse, FuseTime, ObserverParams,
    ObserverState, Stimulus,
};
use crate::optics::Diopters;
use crate::rng::{derive_seed, rng_for, SimRng};
use crate::stimuli::DiamondStimulusParams;

/// Method of constant stimuli on the moving diamond, 4AFC.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityProtocol {
    pub levels_arcmin: Vec<f64>,
    pub trials_per_level: u32,
    pub n_alternatives: u32,
    pub timeout_s: f64,
    pub criterion: f64,
    /// Observer states averaged over the target window.
    pub samples_per_window: u32,
    pub stimulus: DiamondStimulusParams,
    /// Subjects at or below this accuracy at the largest level are flagged.
    pub exclusion_accuracy: f64,
    pub feedback: bool,
}

impl Default for DisparityProtocol {
    fn default() -> Self {
        DisparityProtocol {
            levels_arcmin: (0..6).map(|i| i as f64 * 0.8).collect(),
            trials_per_level: 20,
            n_alternatives: 4,
            timeout_s: 4.0,
            criterion: 0.625,
            samples_per_window: 10,
            stimulus: DiamondStimulusParams::default(),
            exclusion_accuracy: 0.6,
            feedback: true,
        }
    }
}

/// Interleaved 1-up/2-down staircases on presentation time, 2AFC.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeToFuseProtocol {
    /// Stimulus depths relative to the screen (D, positive nearer).
    pub depths_d: Vec<f64>,
    pub start_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    pub up_factor: f64,
    pub down_factor: f64,
    pub reversals: u32,
    pub max_trials_per_staircase: u32,
    pub timeout_s: f64,
    pub criterion: f64,
    /// Subjects at or below this accuracy on their longest presentations
    /// are flagged.
    pub exclusion_accuracy: f64,
    /// Top fraction of the staircase range, in log duration, counted as the
    /// longest presentations.
    pub exclusion_top_fraction: f64,
}

impl Default for TimeToFuseProtocol {
    fn default() -> Self {
        TimeToFuseProtocol {
            depths_d: alloc::vec![-0.25, 0.25, 0.75, 1.5],
            start_s: 1.5,
            min_s: 0.02,
            max_s: 10.0,
            up_factor: 1.26,
            down_factor: 0.794,
            reversals: 12,
            max_trials_per_staircase: 400,
            timeout_s: 4.0,
            criterion: 0.75,
            exclusion_accuracy: 0.7,
            exclusion_top_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Protocol {
    Disparity(DisparityProtocol),
    TimeToFuse(TimeToFuseProtocol),
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Disparity(_) => "disparity",
            Protocol::TimeToFuse(_) => "time-to-fuse",
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        match self {
            Protocol::Disparity(p) => FitOptions::new(1.0 / p.n_alternatives as f64, p.criterion),
            Protocol::TimeToFuse(p) => FitOptions::new(0.5, p.criterion).with_log_levels(true),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub geometry: DisplayGeometry,
    /// Baseline first, then the treatment condition.
    pub conditions: Vec<ViewingCondition>,
    pub observer: ObserverParams,
    pub subjects: u32,
    /// Log-sd of the per-subject parameter variation.
    pub subject_spread: f64,
    /// 0 disables intervals; otherwise at least 500.
    pub bootstrap_resamples: usize,
    pub apply_exclusions: bool,
    pub dt_s: f64,
}

impl ExperimentConfig {
    fn base(protocol: Protocol, geometry: DisplayGeometry, conditions: Vec<ViewingCondition>) -> Self {
        ExperimentConfig {
            protocol,
            geometry,
            conditions,
            observer: ObserverParams::default(),
            subjects: 16,
            subject_spread: 0.15,
            bootstrap_resamples: 500,
            apply_exclusions: true,
            dt_s: crate::observer::DEFAULT_DT_S,
        }
    }

    pub fn disparity_dynamic() -> Self {
        Self::base(
            Protocol::Disparity(DisparityProtocol::default()),
            DisplayGeometry::dynamic_lens_rig(),
            alloc::vec![ViewingCondition::FixedLens, ViewingCondition::dynamic_reference()],
        )
    }

    pub fn disparity_monovision() -> Self {
        Self::base(
            Protocol::Disparity(DisparityProtocol::default()),
            DisplayGeometry::monovision_rig(),
            alloc::vec![ViewingCondition::FixedLens, monovision_pair()],
        )
    }

    pub fn fuse_dynamic() -> Self {
        Self::base(
            Protocol::TimeToFuse(TimeToFuseProtocol::default()),
            DisplayGeometry::dynamic_lens_rig(),
            alloc::vec![ViewingCondition::FixedLens, ViewingCondition::dynamic_reference()],
        )
    }

    /// Stimuli 1 D in front of a 0.5 m screen.
    pub fn fuse_monovision() -> Self {
        let geometry = DisplayGeometry::monovision_rig().with_screen_distance(0.5).expect("valid distance");
        Self::base(
            Protocol::TimeToFuse(TimeToFuseProtocol { depths_d: alloc::vec![1.0], ..TimeToFuseProtocol::default() }),
            geometry,
            alloc::vec![ViewingCondition::FixedLens, monovision_pair()],
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.observer.validate()?;
        if self.conditions.len() != 2 {
            return Err(Error::Invalid(format!("need 2 conditions, got {}", self.conditions.len())));
        }
        if self.subjects == 0 {
            return Err(Error::Invalid("need at least one subject".into()));
        }
        if self.bootstrap_resamples != 0 && self.bootstrap_resamples < super::fit::MIN_BOOTSTRAP_RESAMPLES {
            return Err(Error::Precondition(format!(
                "{} bootstrap resamples; need 0 or at least {}",
                self.bootstrap_resamples,
                super::fit::MIN_BOOTSTRAP_RESAMPLES
            )));
        }
        if !(self.subject_spread >= 0.0 && self.subject_spread.is_finite()) {
            return Err(Error::Domain { what: "subject spread", value: self.subject_spread });
        }
        if !(self.dt_s > 0.0 && self.dt_s <= 0.05) {
            return Err(Error::Domain { what: "time step (s)", value: self.dt_s });
        }
        match &self.protocol {
            Protocol::Disparity(p) => {
                p.stimulus.validate()?;
                if p.n_alternatives != 2 && p.n_alternatives != 4 {
                    return Err(Error::Domain { what: "number of alternatives", value: p.n_alternatives as f64 });
                }
                let mut lv = p.levels_arcmin.clone();
                lv.sort_by(|a, b| a.total_cmp(b));
                lv.dedup();
                if lv.len() < 2 || lv.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                    return Err(Error::Invalid("need at least 2 distinct non-negative disparity levels".into()));
                }
                if p.trials_per_level == 0 || p.samples_per_window == 0 {
                    return Err(Error::Invalid("trials per level and samples per window must be positive".into()));
                }
            }
            Protocol::TimeToFuse(p) => {
                if p.depths_d.is_empty() {
                    return Err(Error::Invalid("need at least one stimulus depth".into()));
                }
                StaircaseState::new(p.start_s, p.up_factor, p.down_factor, p.min_s, p.max_s)?;
                for &d in &p.depths_d {
                    crate::optics::absolute_from_relative(self.geometry.screen_vergence(), Diopters(d))?;
                }
            }
        }
        Ok(())
    }

    /// Labels of the fitted cells in output order.
    pub fn cells(&self) -> Vec<(String, usize, Option<f64>)> {
        let mut out = Vec::new();
        match &self.protocol {
            Protocol::Disparity(_) => {
                for (ci, c) in self.conditions.iter().enumerate() {
                    out.push((String::from(c.name()), ci, None));
                }
            }
            Protocol::TimeToFuse(p) => {
                for (ci, c) in self.conditions.iter().enumerate() {
                    for &d in &p.depths_d {
                        out.push((format!("{}@{:+.2}", c.name(), d), ci, Some(d)));
                    }
                }
            }
        }
        out
    }
}

fn monovision_pair() -> ViewingCondition {
    ViewingCondition::Monovision { left_power: Diopters(0.0), right_power: Diopters(-1.0) }
}

/// Fit of one subject in one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectFit {
    pub cell: String,
    pub condition_index: usize,
    pub depth_d: Option<f64>,
    pub fit: Result<PsychometricFit>,
    /// Noise-free fuse time of the simulated observer (time-to-fuse only).
    pub fuse_time: Option<FuseTime>,
    /// Per-eye demands for the cell's stimulus (the diamond's near extreme
    /// for the disparity protocol).
    pub demand_left: Diopters,
    pub demand_right: Diopters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRun {
    pub subject: u32,
    pub params: ObserverParams,
    pub trials: Vec<TrialRecord>,
    pub fits: Vec<SubjectFit>,
    pub excluded: bool,
    /// Accuracy used for the exclusion rule.
    pub check_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSummary {
    pub cell: String,
    pub condition_index: usize,
    pub depth_d: Option<f64>,
    pub pooled: Result<PsychometricFit>,
    pub n_subjects: usize,
}

/// Paired comparison of baseline and treatment thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub baseline: String,
    pub treatment: String,
    pub n_pairs: usize,
    /// Subjects whose treatment threshold is lower.
    pub n_lower: usize,
    /// Baseline minus treatment greater than zero.
    pub one_tailed: Result<WilcoxonResult>,
    pub two_tailed: Result<WilcoxonResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub protocol: &'static str,
    pub subjects: Vec<SubjectRun>,
    pub cells: Vec<ConditionSummary>,
    pub comparisons: Vec<Comparison>,
}

/// Bootstrap interval callback: counts, fit, options, seed.
pub type CiFn<'a> = &'a (dyn Fn(&[LevelCounts], &PsychometricFit, &FitOptions, u64) -> Result<(f64, f64)> + Sync);

fn with_ci(counts: &[LevelCounts], opts: &FitOptions, n_boot: usize, seed: u64, ci: Option<CiFn>) -> Result<PsychometricFit> {
    let mut f = fit_counts(counts, opts)?;
    if n_boot > 0 {
        let interval = match ci {
            Some(ci) => ci(counts, &f, opts, seed)?,
            None => bootstrap_ci(counts, &f, opts, n_boot, seed)?,
        };
        f.ci = Some(interval);
    }
    Ok(f)
}

/// Simulates one subject under both conditions.
pub fn run_subject(cfg: &ExperimentConfig, subject: u32, seed: u64) -> Result<SubjectRun> {
    run_subject_with(cfg, subject, seed, None)
}

/// As [`run_subject`], with `ci` replacing the sequential bootstrap.
pub fn run_subject_with(cfg: &ExperimentConfig, subject: u32, seed: u64, ci: Option<CiFn>) -> Result<SubjectRun> {
    cfg.validate()?;
    let params = jitter_subject(&cfg.observer, seed, subject as u64, cfg.subject_spread);
    match &cfg.protocol {
        Protocol::Disparity(p) => run_disparity(cfg, p, params, subject, ci),
        Protocol::TimeToFuse(p) => run_fuse(cfg, p, params, subject, ci),
    }
}

fn diamond_stimulus(cfg: &ExperimentConfig, p: &DisparityProtocol, cond: &ViewingCondition, t: f64) -> Result<Stimulus> {
    let screen = cfg.geometry.screen_vergence();
    let v = screen + p.stimulus.offset_at(screen, t);
    let d = demands_along_trajectory(cond, &cfg.geometry, v)?;
    Ok(Stimulus { vergence: v, demand_left: d.left, demand_right: d.right })
}

fn run_disparity(cfg: &ExperimentConfig, p: &DisparityProtocol, params: ObserverParams, subject: u32, ci_fn: Option<CiFn>) -> Result<SubjectRun> {
    let period = p.stimulus.period_s();
    let cycle = p.stimulus.circle_on_s + p.stimulus.circle_off_s;
    let dt = cfg.dt_s;
    let opts = cfg.protocol.fit_options();
    let mut trials = Vec::new();
    let mut fits = Vec::new();
    let mut worst = 1.0f64;
    for (ci, cond) in cfg.conditions.iter().enumerate() {
        let stim = |t: f64| diamond_stimulus(cfg, p, cond, t);
        let init = ObserverState::fixating(&params, &stim(0.0)?);
        let warm = simulate(&params, init, stim, dt, 2.0 * period)?;
        let mut start = *warm.last().unwrap();
        start.t_s = 0.0;
        let orbit = simulate(&params, start, stim, dt, period)?;
        let state_at = |t: f64| {
            let mut ph = t % period;
            if ph < 0.0 {
                ph += period;
            }
            let i = crate::math::round(ph / dt) as usize;
            orbit[i.min(orbit.len() - 1)]
        };
        let mut order: Vec<f64> = p
            .levels_arcmin
            .iter()
            .flat_map(|&l| core::iter::repeat(l).take(p.trials_per_level as usize))
            .collect();
        order.shuffle(&mut rng_for(params.decision_seed, &[0x0D, ci as u64]));
        let label = String::from(cond.name());
        let start_idx = trials.len();
        for (i, &level) in order.iter().enumerate() {
            let onset = i as f64 * cycle;
            let mut pc = 0.0;
            for j in 0..p.samples_per_window {
                let t = onset + (j as f64 + 0.5) / p.samples_per_window as f64 * p.stimulus.circle_on_s;
                pc += p_correct_disparity(&params, level, &state_at(t), p.n_alternatives)?;
            }
            pc /= p.samples_per_window as f64;
            let tseed = derive_seed(params.decision_seed, &[0x7A, ci as u64, i as u64]);
            let mut rng = SimRng::seed_from_u64(tseed);
            let answer = rng.random_range(0..p.n_alternatives);
            let d = decide(&params, pc, answer, p.n_alternatives, p.timeout_s, &mut rng);
            trials.push(TrialRecord {
                trial: i as u32,
                condition: label.clone(),
                level,
                response: d.response,
                correct: d.correct,
                rt_s: d.rt_s,
                timed_out: d.timed_out,
                seed: tseed,
            });
        }
        let cell_trials = &trials[start_idx..];
        let top = p.levels_arcmin.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let at_top: Vec<_> = cell_trials.iter().filter(|t| t.level == top).collect();
        let acc = at_top.iter().filter(|t| t.correct).count() as f64 / at_top.len().max(1) as f64;
        worst = worst.min(acc);
        let screen = cfg.geometry.screen_vergence();
        let near = demands_along_trajectory(cond, &cfg.geometry, screen + p.stimulus.near_offset)?;
        let counts = aggregate(cell_trials);
        let boot_seed = derive_seed(params.decision_seed, &[0xC1, ci as u64]);
        fits.push(SubjectFit {
            cell: label,
            condition_index: ci,
            depth_d: None,
            fit: with_ci(&counts, &opts, cfg.bootstrap_resamples, boot_seed, ci_fn),
            fuse_time: None,
            demand_left: near.left,
            demand_right: near.right,
        });
    }
    Ok(SubjectRun {
        subject,
        params,
        trials,
        fits,
        excluded: worst <= p.exclusion_accuracy,
        check_accuracy: worst,
    })
}

fn run_fuse(cfg: &ExperimentConfig, p: &TimeToFuseProtocol, params: ObserverParams, subject: u32, ci_fn: Option<CiFn>) -> Result<SubjectRun> {
    let screen = cfg.geometry.screen_vergence();
    let cells = cfg.cells();
    let mut fuse = Vec::with_capacity(cells.len());
    let mut demands = Vec::with_capacity(cells.len());
    for (_, ci, depth) in &cells {
        let cond = &cfg.conditions[*ci];
        let cross = demands_along_trajectory(cond, &cfg.geometry, screen)?;
        let start = Stimulus { vergence: screen, demand_left: cross.left, demand_right: cross.right };
        let v = screen + Diopters(depth.unwrap_or(0.0));
        let d = demands_along_trajectory(cond, &cfg.geometry, v)?;
        let target = Stimulus { vergence: v, demand_left: d.left, demand_right: d.right };
        fuse.push(time_to_fuse(&params, &start, &target, cfg.dt_s)?);
        demands.push(d);
    }
    let mut stairs: Vec<StaircaseState> = cells
        .iter()
        .map(|_| StaircaseState::new(p.start_s, p.up_factor, p.down_factor, p.min_s, p.max_s))
        .collect::<Result<_>>()?;
    let mut cell_trials: Vec<Vec<TrialRecord>> = cells.iter().map(|_| Vec::new()).collect();
    let mut schedule = rng_for(params.decision_seed, &[0x5C]);
    let mut n = 0u32;
    loop {
        let active: Vec<usize> = (0..cells.len())
            .filter(|&i| !stairs[i].finished(p.reversals) && (cell_trials[i].len() as u32) < p.max_trials_per_staircase)
            .collect();
        if active.is_empty() {
            break;
        }
        let k = active[schedule.random_range(0..active.len())];
        let level = stairs[k].level;
        let pc = p_correct_duration(&params, level, fuse[k]);
        let tseed = derive_seed(params.decision_seed, &[0x7B, n as u64]);
        let mut rng = SimRng::seed_from_u64(tseed);
        let answer = rng.random_range(0..2);
        let d = decide(&params, pc, answer, 2, p.timeout_s, &mut rng);
        stairs[k] = stairs[k].update(d.correct);
        cell_trials[k].push(TrialRecord {
            trial: n,
            condition: cells[k].0.clone(),
            level,
            response: d.response,
            correct: d.correct,
            rt_s: d.rt_s,
            timed_out: d.timed_out,
            seed: tseed,
        });
        n += 1;
    }
    let opts = cfg.protocol.fit_options();
    let mut fits = Vec::with_capacity(cells.len());
    for (i, (label, ci, depth)) in cells.iter().enumerate() {
        let counts = aggregate(&cell_trials[i]);
        let boot_seed = derive_seed(params.decision_seed, &[0xC1, i as u64]);
        fits.push(SubjectFit {
            cell: label.clone(),
            condition_index: *ci,
            depth_d: *depth,
            fit: with_ci(&counts, &opts, cfg.bootstrap_resamples, boot_seed, ci_fn),
            fuse_time: Some(fuse[i]),
            demand_left: demands[i].left,
            demand_right: demands[i].right,
        });
    }
    let mut trials: Vec<TrialRecord> = cell_trials.into_iter().flatten().collect();
    trials.sort_by_key(|t| t.trial);
    let cut = p.max_s * crate::math::exp(p.exclusion_top_fraction * crate::math::ln(p.min_s / p.max_s));
    let top: Vec<_> = trials.iter().filter(|t| t.level >= cut).collect();
    // No presentations that long means no evidence against the subject.
    let acc = if top.is_empty() { 1.0 } else { top.iter().filter(|t| t.correct).count() as f64 / top.len() as f64 };
    Ok(SubjectRun { subject, params, trials, fits, excluded: acc <= p.exclusion_accuracy, check_accuracy: acc })
}

/// Pools included subjects per cell and compares conditions. `ci` replaces
/// the sequential bootstrap for pooled fits when given.
pub fn summarize(cfg: &ExperimentConfig, runs: &[SubjectRun], seed: u64, ci: Option<CiFn>) -> ExperimentResult {
    let opts = cfg.protocol.fit_options();
    let included: Vec<&SubjectRun> = runs.iter().filter(|r| !(cfg.apply_exclusions && r.excluded)).collect();
    let cells = cfg.cells();
    let mut summaries = Vec::with_capacity(cells.len());
    for (i, (label, ci_idx, depth)) in cells.iter().enumerate() {
        let pooled_trials: Vec<TrialRecord> =
            included.iter().flat_map(|r| r.trials.iter().filter(|t| &t.condition == label).cloned()).collect();
        let pooled = if pooled_trials.is_empty() {
            Err(Error::InsufficientData { needed: 1, got: 0 })
        } else {
            with_ci(&aggregate(&pooled_trials), &opts, cfg.bootstrap_resamples, derive_seed(seed, &[0xC2, i as u64]), ci)
        };
        summaries.push(ConditionSummary {
            cell: label.clone(),
            condition_index: *ci_idx,
            depth_d: *depth,
            pooled,
            n_subjects: included.len(),
        });
    }
    let mut comparisons = Vec::new();
    let per_condition = cells.len() / cfg.conditions.len();
    for j in 0..per_condition {
        let (base, treat) = (&cells[j].0, &cells[per_condition + j].0);
        let threshold = |r: &SubjectRun, cell: &str| {
            r.fits.iter().find(|f| f.cell == cell).and_then(|f| f.fit.as_ref().ok()).map(|f| f.threshold)
        };
        let pairs: Vec<(f64, f64)> =
            included.iter().filter_map(|r| Some((threshold(r, base)?, threshold(r, treat)?))).collect();
        comparisons.push(Comparison {
            baseline: base.clone(),
            treatment: treat.clone(),
            n_pairs: pairs.len(),
            n_lower: pairs.iter().filter(|(b, t)| t < b).count(),
            one_tailed: wilcoxon_signed_rank(&pairs, Alternative::Greater),
            two_tailed: wilcoxon_signed_rank(&pairs, Alternative::TwoSided),
        });
    }
    ExperimentResult { protocol: cfg.protocol.name(), subjects: runs.to_vec(), cells: summaries, comparisons }
}

/// Runs every subject in turn and summarizes.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentResult> {
    let runs = (0..cfg.subjects).map(|s| run_subject(cfg, s, seed)).collect::<Result<Vec<_>>>()?;
    Ok(summarize(cfg, &runs, seed, None))
}
