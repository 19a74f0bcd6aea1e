//! Rayon drivers for the embarrassingly parallel work. Each returns the same
//! bits as its sequential counterpart in `dynlens-core`: work items are seeded
//! by index and reduced in index order.

use dynlens_core::gaze::{
    breakeven_with, chunk_count, chunk_sums, merge_chunks, validate, Breakeven, ConflictEstimate, GazeErrorModel,
    GazeSim, BREAKEVEN_TOLERANCE_D,
};
use dynlens_core::psychophysics::{
    bootstrap_resample, ci_from_thresholds, run_subject_with, summarize, ExperimentConfig, ExperimentResult,
    FitOptions, LevelCounts, PsychometricFit, MIN_BOOTSTRAP_RESAMPLES,
};
use dynlens_core::{Error, Result};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};

/// `threads == 0` uses every core.
pub fn pool(threads: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::config(format!("thread pool: {e}")))
}

pub fn bootstrap_ci_par(
    counts: &[LevelCounts],
    fit: &PsychometricFit,
    opts: &FitOptions,
    n_resamples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_resamples < MIN_BOOTSTRAP_RESAMPLES {
        return Err(Error::Precondition(format!(
            "{n_resamples} bootstrap resamples; need at least {MIN_BOOTSTRAP_RESAMPLES}"
        )));
    }
    let all: Vec<Result<f64>> =
        (0..n_resamples as u64).into_par_iter().map(|r| bootstrap_resample(counts, fit, opts, seed, r)).collect();
    let mut ok: Vec<f64> = all.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let failed = n_resamples - ok.len();
    let (lo, hi) = ci_from_thresholds(&mut ok, failed, n_resamples)?;
    Ok((lo.min(fit.threshold), hi.max(fit.threshold)))
}

pub fn run_experiment_par(cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentResult> {
    let n = cfg.bootstrap_resamples;
    let ci = move |c: &[LevelCounts], f: &PsychometricFit, o: &FitOptions, s: u64| bootstrap_ci_par(c, f, o, n, s);
    let runs = (0..cfg.subjects)
        .into_par_iter()
        .map(|s| run_subject_with(cfg, s, seed, Some(&ci)))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(cfg, &runs, seed, Some(&ci)))
}

pub fn mean_conflict_par(sim: &GazeSim, model: &GazeErrorModel) -> Result<ConflictEstimate> {
    validate(sim, model)?;
    let chunks: Vec<_> = (0..chunk_count(sim)).into_par_iter().map(|c| chunk_sums(sim, model, c)).collect();
    Ok(merge_chunks(&chunks))
}

pub fn sweep_par(sim: &GazeSim, model: &GazeErrorModel, fractions: &[f64]) -> Result<Vec<(f64, ConflictEstimate)>> {
    fractions
        .iter()
        .map(|&f| Ok((f, mean_conflict_par(sim, &GazeErrorModel { hit_fraction: f, ..*model })?)))
        .collect()
}

pub fn breakeven_par(sim: &GazeSim, model: &GazeErrorModel) -> Result<Breakeven> {
    breakeven_with(
        |f| {
            let e = mean_conflict_par(sim, &GazeErrorModel { hit_fraction: f, ..*model })?;
            Ok(e.mean_dynamic - e.mean_fixed)
        },
        BREAKEVEN_TOLERANCE_D,
    )
}
