use alloc::format;
use alloc::vec::Vec;

use super::optimize::nelder_mead;
use super::TrialRecord;
use crate::error::{Error, Result};
use crate::math;
use crate::rng::rng_for;
use rand_distr::{Binomial, Distribution};

pub const MIN_BOOTSTRAP_RESAMPLES: usize = 500;

/// Trials at one stimulus level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelCounts {
    pub level: f64,
    pub n: u32,
    pub k: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LapseMode {
    Fixed(f64),
    /// Fitted in `[0, max]`.
    Free { max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub gamma: f64,
    pub criterion: f64,
    pub lapse: LapseMode,
    pub starts: usize,
    /// Fit against ln(level); levels must be positive.
    pub log_levels: bool,
}

impl FitOptions {
    pub fn new(gamma: f64, criterion: f64) -> Self {
        FitOptions { gamma, criterion, lapse: LapseMode::Free { max: 0.06 }, starts: 5, log_levels: false }
    }

    pub fn with_log_levels(mut self, on: bool) -> Self {
        self.log_levels = on;
        self
    }

    pub fn with_lapse(mut self, lapse: LapseMode) -> Self {
        self.lapse = lapse;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsychometricFit {
    /// Location and spread, in ln(level) units when `log_levels`.
    pub mu: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub lapse: f64,
    pub criterion: f64,
    pub threshold: f64,
    pub ci: Option<(f64, f64)>,
    pub log_likelihood: f64,
    pub n_trials: u32,
    /// Threshold lies outside the tested levels.
    pub extrapolated: bool,
    pub log_levels: bool,
}

impl PsychometricFit {
    pub fn p(&self, x: f64) -> f64 {
        let x = if self.log_levels { math::ln(x) } else { x };
        psychometric(x, self.mu, self.sigma, self.gamma, self.lapse)
    }
}

pub fn psychometric(x: f64, mu: f64, sigma: f64, gamma: f64, lapse: f64) -> f64 {
    gamma + (1.0 - gamma - lapse) * math::norm_cdf((x - mu) / sigma)
}

/// Groups trials by exact level, sorted ascending.
pub fn aggregate(trials: &[TrialRecord]) -> Vec<LevelCounts> {
    let mut out: Vec<LevelCounts> = Vec::new();
    let mut sorted: Vec<&TrialRecord> = trials.iter().collect();
    sorted.sort_by(|a, b| a.level.total_cmp(&b.level));
    for t in sorted {
        match out.last_mut() {
            Some(c) if c.level == t.level => {
                c.n += 1;
                c.k += t.correct as u32;
            }
            _ => out.push(LevelCounts { level: t.level, n: 1, k: t.correct as u32 }),
        }
    }
    out
}

/// Counts with levels moved to the fitting coordinate.
fn coordinates(counts: &[LevelCounts], opts: &FitOptions) -> Result<Vec<LevelCounts>> {
    if !opts.log_levels {
        return Ok(counts.to_vec());
    }
    counts
        .iter()
        .map(|c| {
            if c.level > 0.0 {
                Ok(LevelCounts { level: math::ln(c.level), ..*c })
            } else {
                Err(Error::Domain { what: "stimulus level for a log-axis fit", value: c.level })
            }
        })
        .collect()
}

fn neg_log_likelihood(counts: &[LevelCounts], mu: f64, sigma: f64, gamma: f64, lapse: f64) -> f64 {
    let mut nll = 0.0;
    for c in counts {
        let p = psychometric(c.level, mu, sigma, gamma, lapse).clamp(1e-15, 1.0 - 1e-15);
        nll -= c.k as f64 * math::ln(p) + (c.n - c.k) as f64 * math::ln(1.0 - p);
    }
    nll
}

fn lapse_of(mode: LapseMode, z: f64) -> f64 {
    match mode {
        LapseMode::Fixed(l) => l,
        LapseMode::Free { max } => max / (1.0 + math::exp(-z)),
    }
}

fn check_identifiable(counts: &[LevelCounts]) -> Result<()> {
    if counts.len() < 2 {
        return Err(Error::NonIdentifiable(format!("{} distinct stimulus level(s); need at least 2", counts.len())));
    }
    let n: u32 = counts.iter().map(|c| c.n).sum();
    let k: u32 = counts.iter().map(|c| c.k).sum();
    if k == n {
        return Err(Error::NonIdentifiable(format!("all {n} responses correct")));
    }
    if k == 0 {
        return Err(Error::NonIdentifiable(format!("all {n} responses wrong")));
    }
    Ok(())
}

fn check_options(opts: &FitOptions) -> Result<()> {
    if !(opts.gamma >= 0.0 && opts.gamma < 1.0) {
        return Err(Error::Domain { what: "chance rate", value: opts.gamma });
    }
    let max_lapse = match opts.lapse {
        LapseMode::Fixed(l) => l,
        LapseMode::Free { max } => max,
    };
    if !(0.0..=0.06).contains(&max_lapse) {
        return Err(Error::Domain { what: "lapse rate", value: max_lapse });
    }
    if !(opts.criterion > opts.gamma && opts.criterion < 1.0) {
        return Err(Error::Domain { what: "threshold criterion", value: opts.criterion });
    }
    Ok(())
}

/// Maximum-likelihood fit of `gamma + (1 - gamma - lapse) * Phi((x - mu) / sigma)`.
pub fn fit_counts(counts: &[LevelCounts], opts: &FitOptions) -> Result<PsychometricFit> {
    check_options(opts)?;
    check_identifiable(counts)?;
    let counts = &coordinates(counts, opts)?;
    let lo = counts[0].level;
    let hi = counts[counts.len() - 1].level;
    let range = hi - lo;
    let min_log_sigma = math::ln(1e-6 * range.max(1e-12));
    let objective = |p: &[f64]| {
        let sigma = math::exp(p[1].max(min_log_sigma));
        let lapse = lapse_of(opts.lapse, p[2]);
        neg_log_likelihood(counts, p[0], sigma, opts.gamma, lapse)
    };
    let seeds = [(0.5, 0.25), (0.25, 0.25), (0.75, 0.25), (0.5, 0.08), (0.5, 0.6)];
    let mut best: Option<(Vec<f64>, f64)> = None;
    for &(fm, fs) in seeds.iter().take(opts.starts.max(1)) {
        let start = [lo + fm * range, math::ln(fs * range), -2.0];
        let r = nelder_mead(objective, &start, &[0.2 * range, 0.5, 1.0], 3000, 1e-12);
        if best.as_ref().map_or(true, |b| r.1 < b.1) {
            best = Some(r);
        }
    }
    finish(counts, opts, best.unwrap(), min_log_sigma)
}

fn finish(counts: &[LevelCounts], opts: &FitOptions, best: (Vec<f64>, f64), min_log_sigma: f64) -> Result<PsychometricFit> {
    let (p, nll) = best;
    let mu = p[0];
    let sigma = math::exp(p[1].max(min_log_sigma));
    let lapse = lapse_of(opts.lapse, p[2]);
    if !(opts.criterion < 1.0 - lapse) {
        return Err(Error::Domain { what: "threshold criterion", value: opts.criterion });
    }
    let at = mu + sigma * math::norm_ppf((opts.criterion - opts.gamma) / (1.0 - opts.gamma - lapse));
    let threshold = if opts.log_levels { math::exp(at) } else { at };
    if !(threshold.is_finite() && mu.is_finite()) {
        return Err(Error::NonIdentifiable(format!("fit did not converge (mu = {mu}, sigma = {sigma})")));
    }
    let lo = counts[0].level;
    let hi = counts[counts.len() - 1].level;
    Ok(PsychometricFit {
        mu,
        sigma,
        gamma: opts.gamma,
        lapse,
        criterion: opts.criterion,
        threshold,
        ci: None,
        log_likelihood: -nll,
        n_trials: counts.iter().map(|c| c.n).sum(),
        extrapolated: at < lo || at > hi,
        log_levels: opts.log_levels,
    })
}

/// Free lapse bounded to `[0, 0.06]`.
pub fn fit_psychometric(trials: &[TrialRecord], gamma: f64, criterion: f64) -> Result<PsychometricFit> {
    fit_psychometric_with(trials, &FitOptions::new(gamma, criterion))
}

pub fn fit_psychometric_with(trials: &[TrialRecord], opts: &FitOptions) -> Result<PsychometricFit> {
    fit_counts(&aggregate(trials), opts)
}

/// Concatenates the sets and fits them as one observer.
pub fn pool_subjects(sets: &[&[TrialRecord]], opts: &FitOptions) -> Result<PsychometricFit> {
    let all: Vec<TrialRecord> = sets.iter().flat_map(|s| s.iter().cloned()).collect();
    if all.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    fit_psychometric_with(&all, opts)
}

/// Threshold refitted on resample `r`: responses simulated from `fit` at the
/// observed levels and trial counts. The refit starts from the fitted curve.
pub fn bootstrap_resample(counts: &[LevelCounts], fit: &PsychometricFit, opts: &FitOptions, seed: u64, r: u64) -> Result<f64> {
    let mut rng = rng_for(seed, &[0xB007, r]);
    let sim: Vec<LevelCounts> = counts
        .iter()
        .map(|c| {
            let p = fit.p(c.level);
            let k = match Binomial::new(c.n as u64, p.clamp(0.0, 1.0)) {
                Ok(b) => b.sample(&mut rng) as u32,
                Err(_) => 0,
            };
            LevelCounts { level: c.level, n: c.n, k }
        })
        .collect();
    check_identifiable(&sim)?;
    let sim = coordinates(&sim, opts)?;
    let lo = sim[0].level;
    let range = sim[sim.len() - 1].level - lo;
    let min_log_sigma = math::ln(1e-6 * range.max(1e-12));
    let objective = |p: &[f64]| {
        let sigma = math::exp(p[1].max(min_log_sigma));
        neg_log_likelihood(&sim, p[0], sigma, opts.gamma, lapse_of(opts.lapse, p[2]))
    };
    let z = match opts.lapse {
        LapseMode::Fixed(_) => 0.0,
        LapseMode::Free { max } if max > 0.0 => {
            let f = (fit.lapse / max).clamp(1e-6, 1.0 - 1e-6);
            math::ln(f / (1.0 - f))
        }
        LapseMode::Free { .. } => 0.0,
    };
    let warm = [fit.mu, math::ln(fit.sigma).max(min_log_sigma), z];
    let mut best = nelder_mead(objective, &warm, &[0.1 * range, 0.3, 1.0], 3000, 1e-12);
    let alt = [lo + 0.5 * range, math::ln(0.25 * range), -2.0];
    let second = nelder_mead(objective, &alt, &[0.2 * range, 0.5, 1.0], 3000, 1e-12);
    if second.1 < best.1 {
        best = second;
    }
    Ok(finish(&sim, opts, best, min_log_sigma)?.threshold)
}

/// 2.5 and 97.5 percentiles of the resampled thresholds.
pub fn ci_from_thresholds(thresholds: &mut [f64], failed: usize, total: usize) -> Result<(f64, f64)> {
    if total < MIN_BOOTSTRAP_RESAMPLES {
        return Err(Error::Precondition(format!("{total} bootstrap resamples; need at least {MIN_BOOTSTRAP_RESAMPLES}")));
    }
    if failed * 5 > total || thresholds.is_empty() {
        return Err(Error::UnstableCi { failed, total });
    }
    thresholds.sort_by(|a, b| a.total_cmp(b));
    let q = |f: f64| {
        let pos = f * (thresholds.len() - 1) as f64;
        let i = math::floor(pos) as usize;
        let j = (i + 1).min(thresholds.len() - 1);
        thresholds[i] + (pos - i as f64) * (thresholds[j] - thresholds[i])
    };
    Ok((q(0.025), q(0.975)))
}

/// Parametric bootstrap 95% interval for the threshold, widened if needed so
/// it contains the point estimate.
pub fn bootstrap_ci(counts: &[LevelCounts], fit: &PsychometricFit, opts: &FitOptions, n_resamples: usize, seed: u64) -> Result<(f64, f64)> {
    if n_resamples < MIN_BOOTSTRAP_RESAMPLES {
        return Err(Error::Precondition(format!(
            "{n_resamples} bootstrap resamples; need at least {MIN_BOOTSTRAP_RESAMPLES}"
        )));
    }
    let mut ok = Vec::with_capacity(n_resamples);
    let mut failed = 0;
    for r in 0..n_resamples as u64 {
        match bootstrap_resample(counts, fit, opts, seed, r) {
            Ok(t) => ok.push(t),
            Err(_) => failed += 1,
        }
    }
    let (lo, hi) = ci_from_thresholds(&mut ok, failed, n_resamples)?;
    Ok((lo.min(fit.threshold), hi.max(fit.threshold)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_counts(mu: f64, sigma: f64, gamma: f64, n: u32) -> Vec<LevelCounts> {
        (0..6)
            .map(|i| {
                let x = i as f64 * 0.8;
                let p = psychometric(x, mu, sigma, gamma, 0.0);
                LevelCounts { level: x, n, k: math::round(p * n as f64) as u32 }
            })
            .collect()
    }

    #[test]
    fn recovers_expected_counts() {
        let c = exact_counts(2.0, 0.8, 0.25, 10_000);
        let f = fit_counts(&c, &FitOptions::new(0.25, 0.625).with_lapse(LapseMode::Fixed(0.0))).unwrap();
        assert!((f.mu - 2.0).abs() < 0.01 && (f.sigma - 0.8).abs() < 0.01, "{f:?}");
        assert_eq!(f.threshold, f.mu);
    }

    #[test]
    fn identifiability_errors() {
        let one = [LevelCounts { level: 1.0, n: 10, k: 5 }];
        assert!(matches!(fit_counts(&one, &FitOptions::new(0.25, 0.625)), Err(Error::NonIdentifiable(_))));
        let all = [LevelCounts { level: 1.0, n: 10, k: 10 }, LevelCounts { level: 2.0, n: 10, k: 10 }];
        assert!(matches!(fit_counts(&all, &FitOptions::new(0.25, 0.625)), Err(Error::NonIdentifiable(_))));
        let none = [LevelCounts { level: 1.0, n: 10, k: 0 }, LevelCounts { level: 2.0, n: 10, k: 0 }];
        assert!(matches!(fit_counts(&none, &FitOptions::new(0.25, 0.625)), Err(Error::NonIdentifiable(_))));
        let c = exact_counts(2.0, 0.8, 0.25, 100);
        assert!(matches!(fit_counts(&c, &FitOptions::new(0.25, 0.2)), Err(Error::Domain { .. })));
        assert!(matches!(fit_counts(&c, &FitOptions::new(0.25, 1.0)), Err(Error::Domain { .. })));
    }

    #[test]
    fn too_few_resamples() {
        let c = exact_counts(2.0, 0.8, 0.25, 50);
        let opts = FitOptions::new(0.25, 0.625);
        let f = fit_counts(&c, &opts).unwrap();
        assert!(matches!(bootstrap_ci(&c, &f, &opts, 100, 1), Err(Error::Precondition(_))));
    }
}
