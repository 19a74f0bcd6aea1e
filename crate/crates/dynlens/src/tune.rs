//! Fits observer parameters to four pooled target numbers: disparity
//! thresholds under the fixed and dynamic lens, and time-to-fuse at one depth
//! under both.
//!
//! Fusion speed depends on the time constants but not on disparity noise, so
//! the search runs in two stages: the adaptation time constant and a common
//! scale of the accommodation and vergence time constants against the fuse
//! targets, then base noise and blur gain against the disparity targets.
//! Each stage is a Nelder-Mead search in log parameters on a fixed seed,
//! minimizing the summed squared log ratio of predicted to target. Bootstrap
//! intervals are off while searching.

use std::fmt::Write as _;

use dynlens_core::observer::ObserverParams;
use dynlens_core::psychophysics::{nelder_mead, ExperimentConfig, ExperimentResult};

use crate::config::{Preset, RunConfig};
use crate::error::{CliError, CliResult};
use crate::parallel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Targets {
    pub disparity_fixed_arcmin: f64,
    pub disparity_dynamic_arcmin: f64,
    pub fuse_depth_d: f64,
    pub fuse_fixed_s: f64,
    pub fuse_dynamic_s: f64,
}

impl Default for Targets {
    fn default() -> Self {
        Targets {
            disparity_fixed_arcmin: 2.5,
            disparity_dynamic_arcmin: 1.8,
            fuse_depth_d: 1.5,
            fuse_fixed_s: 3.2,
            fuse_dynamic_s: 0.96,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneOptions {
    /// Subjects per evaluation while searching.
    pub search_subjects: u32,
    /// Subjects for the final check.
    pub check_subjects: u32,
    pub max_iterations: usize,
    pub seed: u64,
    pub threads: usize,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions { search_subjects: 16, check_subjects: 16, max_iterations: 60, seed: 1, threads: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub observer: ObserverParams,
    pub targets: Targets,
    /// Disparity fixed, disparity dynamic, fuse fixed, fuse dynamic.
    pub predicted: [f64; 4],
    pub evaluations: usize,
}

impl TuneResult {
    pub fn relative_errors(&self) -> [f64; 4] {
        let t = self.target_array();
        std::array::from_fn(|i| self.predicted[i] / t[i] - 1.0)
    }

    fn target_array(&self) -> [f64; 4] {
        let t = &self.targets;
        [t.disparity_fixed_arcmin, t.disparity_dynamic_arcmin, t.fuse_fixed_s, t.fuse_dynamic_s]
    }

    pub fn within(&self, tol: f64) -> bool {
        self.relative_errors().iter().all(|e| e.abs() <= tol)
    }

    pub fn report(&self) -> String {
        let names = ["disparity_fixed_arcmin", "disparity_dynamic_arcmin", "fuse_fixed_s", "fuse_dynamic_s"];
        let t = self.target_array();
        let e = self.relative_errors();
        let mut s = String::new();
        writeln!(s, "evaluations = {}", self.evaluations).unwrap();
        writeln!(s, "fuse_depth_D = {}", self.targets.fuse_depth_d).unwrap();
        for i in 0..4 {
            writeln!(s, "{} = predicted {}, target {}, relative error {:+.3}", names[i], self.predicted[i], t[i], e[i]).unwrap();
        }
        writeln!(s, "within_25_percent = {}", self.within(0.25)).unwrap();
        let o = &self.observer;
        writeln!(s, "tau_accommodation_s = {}", o.tau_accommodation_s).unwrap();
        writeln!(s, "tau_vergence_s = {}", o.tau_vergence_s).unwrap();
        writeln!(s, "adaptation_tau_s = {}", o.adaptation_tau_s).unwrap();
        writeln!(s, "sigma0_arcmin = {}", o.sigma0_arcmin).unwrap();
        writeln!(s, "k_blur = {}", o.k_blur).unwrap();
        s
    }
}

fn pooled(res: &ExperimentResult, cell: &str) -> Option<f64> {
    res.cells.iter().find(|c| c.cell == cell)?.pooled.as_ref().ok().map(|f| f.threshold)
}

struct Bench {
    disparity: ExperimentConfig,
    fuse: ExperimentConfig,
    fuse_cells: (String, String),
    seed: u64,
}

impl Bench {
    fn new(base: &RunConfig, targets: &Targets, seed: u64) -> CliResult<Self> {
        let with = |p: Preset| {
            let mut c = RunConfig::preset(p);
            c.observer = base.observer.clone();
            c.subject_spread = base.subject_spread;
            c.dt_s = base.dt_s;
            c.bootstrap_resamples = 0;
            c
        };
        let disparity = with(Preset::DisparityDynamic).experiment()?;
        let mut f = with(Preset::FuseDynamic);
        f.fuse.depths_d = vec![targets.fuse_depth_d];
        let fuse = f.experiment()?;
        let cells = fuse.cells();
        let per = cells.len() / 2;
        let fuse_cells = (cells[0].0.clone(), cells[per].0.clone());
        Ok(Bench { disparity, fuse, fuse_cells, seed })
    }

    fn disparity(&self, o: &ObserverParams, subjects: u32) -> Option<[f64; 2]> {
        let cfg = ExperimentConfig { observer: o.clone(), subjects, ..self.disparity.clone() };
        let r = parallel::run_experiment_par(&cfg, self.seed).ok()?;
        Some([pooled(&r, "fixed")?, pooled(&r, "dynamic")?])
    }

    fn fuse(&self, o: &ObserverParams, subjects: u32) -> Option<[f64; 2]> {
        let cfg = ExperimentConfig { observer: o.clone(), subjects, ..self.fuse.clone() };
        let r = parallel::run_experiment_par(&cfg, self.seed).ok()?;
        Some([pooled(&r, &self.fuse_cells.0)?, pooled(&r, &self.fuse_cells.1)?])
    }
}

fn loss(pred: Option<[f64; 2]>, target: [f64; 2]) -> f64 {
    match pred {
        Some(p) if p.iter().all(|v| v.is_finite() && *v > 0.0) => {
            p.iter().zip(target).map(|(p, t)| (p / t).ln().powi(2)).sum()
        }
        _ => 1e6,
    }
}

fn with_fuse_params(base: &ObserverParams, x: &[f64]) -> ObserverParams {
    let mut o = base.clone();
    o.adaptation_tau_s = base.adaptation_tau_s * x[0].exp();
    o.tau_accommodation_s = base.tau_accommodation_s * x[1].exp();
    o.tau_vergence_s = base.tau_vergence_s * x[1].exp();
    o
}

fn with_disparity_params(base: &ObserverParams, x: &[f64]) -> ObserverParams {
    let mut o = base.clone();
    o.sigma0_arcmin = base.sigma0_arcmin * x[0].exp();
    o.k_blur = base.k_blur * x[1].exp();
    o
}

pub fn tune_observer(base: &RunConfig, targets: &Targets, opts: &TuneOptions) -> CliResult<TuneResult> {
    let bench = Bench::new(base, targets, opts.seed)?;
    let pool = parallel::pool(opts.threads)?;
    pool.install(|| {
        let mut evals = 0;
        let start = base.observer.clone();
        // Keep the search inside a broad physiological box.
        let clamp = |x: &[f64]| x.iter().map(|v| v.clamp(-2.5, 2.5)).collect::<Vec<_>>();

        let ft = [targets.fuse_fixed_s, targets.fuse_dynamic_s];
        let (xf, _) = nelder_mead(
            |x| {
                evals += 1;
                let o = with_fuse_params(&start, &clamp(x));
                loss(bench.fuse(&o, opts.search_subjects), ft)
            },
            &[0.0, 0.0],
            &[0.4, 0.4],
            opts.max_iterations,
            1e-4,
        );
        let after_fuse = with_fuse_params(&start, &clamp(&xf));

        let dt = [targets.disparity_fixed_arcmin, targets.disparity_dynamic_arcmin];
        let (xd, _) = nelder_mead(
            |x| {
                evals += 1;
                let o = with_disparity_params(&after_fuse, &clamp(x));
                loss(bench.disparity(&o, opts.search_subjects), dt)
            },
            &[0.0, 0.0],
            &[0.4, 0.4],
            opts.max_iterations,
            1e-4,
        );
        let observer = with_disparity_params(&after_fuse, &clamp(&xd));

        let d = bench
            .disparity(&observer, opts.check_subjects)
            .ok_or_else(|| CliError::Numeric(dynlens_core::Error::Precondition("disparity fit failed at tuned parameters".into())))?;
        let f = bench
            .fuse(&observer, opts.check_subjects)
            .ok_or_else(|| CliError::Numeric(dynlens_core::Error::Precondition("fuse fit failed at tuned parameters".into())))?;
        Ok(TuneResult { observer, targets: *targets, predicted: [d[0], d[1], f[0], f[1]], evaluations: evals + 2 })
    })
}
