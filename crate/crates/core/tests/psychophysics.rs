use dynlens_core::psychophysics::{
    bootstrap_ci, fit_counts, pool_subjects, psychometric, wilcoxon_exact, wilcoxon_normal, wilcoxon_signed_rank,
    Alternative, FitOptions, LapseMode, LevelCounts, StaircaseState, TrialRecord, WilcoxonMethod,
};
use dynlens_core::rng::rng_for;
use proptest::prelude::*;
use rand::Rng;

const LEVELS: [f64; 6] = [0.0, 0.8, 1.6, 2.4, 3.2, 4.0];

fn simulate_counts(mu: f64, sigma: f64, gamma: f64, lapse: f64, n: u32, seed: u64) -> Vec<LevelCounts> {
    let mut rng = rng_for(seed, &[]);
    LEVELS
        .iter()
        .map(|&x| {
            let p = psychometric(x, mu, sigma, gamma, lapse);
            let k = (0..n).filter(|_| rng.random::<f64>() < p).count() as u32;
            LevelCounts { level: x, n, k }
        })
        .collect()
}

fn trials(counts: &[LevelCounts], condition: &str) -> Vec<TrialRecord> {
    let mut out = Vec::new();
    for c in counts {
        for i in 0..c.n {
            out.push(TrialRecord {
                trial: out.len() as u32,
                condition: condition.into(),
                level: c.level,
                response: 0,
                correct: i < c.k,
                rt_s: 1.0,
                timed_out: false,
                seed: 0,
            });
        }
    }
    out
}

#[test]
fn recovers_generator_with_many_trials() {
    let counts = simulate_counts(2.0, 0.8, 0.25, 0.0, 10_000, 7);
    let fit = fit_counts(&counts, &FitOptions::new(0.25, 0.625)).unwrap();
    assert!((fit.mu - 2.0).abs() < 0.05 * 2.0, "{fit:?}");
    assert!((fit.sigma - 0.8).abs() < 0.05 * 0.8, "{fit:?}");
    assert!((fit.threshold - 2.0).abs() < 0.03 * 2.0);
}

#[test]
fn recovers_generator_on_average_at_two_hundred_per_level() {
    let runs = 100;
    let (mut mu, mut sigma) = (0.0, 0.0);
    for s in 0..runs {
        let counts = simulate_counts(2.0, 0.8, 0.25, 0.0, 200, 100 + s);
        let fit = fit_counts(&counts, &FitOptions::new(0.25, 0.625)).unwrap();
        mu += fit.mu / runs as f64;
        sigma += fit.sigma / runs as f64;
    }
    assert!((mu - 2.0).abs() < 0.05 * 2.0, "mean mu {mu}");
    assert!((sigma - 0.8).abs() < 0.05 * 0.8, "mean sigma {sigma}");
}

#[test]
fn threshold_is_mu_without_lapse() {
    for (gamma, crit) in [(0.25, 0.625), (0.5, 0.75)] {
        let counts = simulate_counts(1.7, 0.6, gamma, 0.0, 300, 3);
        let opts = FitOptions::new(gamma, crit).with_lapse(LapseMode::Fixed(0.0));
        let fit = fit_counts(&counts, &opts).unwrap();
        assert_eq!(fit.threshold, fit.mu + fit.sigma * 0.0);
        assert!((fit.threshold - fit.mu).abs() < 1e-12);
    }
}

#[test]
fn ci_shrinks_with_trial_count() {
    let opts = FitOptions::new(0.25, 0.625);
    let width = |n: u32| {
        let counts: Vec<_> = LEVELS
            .iter()
            .map(|&x| LevelCounts { level: x, n, k: (psychometric(x, 2.0, 0.8, 0.25, 0.0) * n as f64).round() as u32 })
            .collect();
        let fit = fit_counts(&counts, &opts).unwrap();
        let (lo, hi) = bootstrap_ci(&counts, &fit, &opts, 500, 11).unwrap();
        assert!(lo <= fit.threshold && fit.threshold <= hi);
        hi - lo
    };
    let (small, huge) = (width(100), width(1_000_000));
    assert!(huge < 0.02 && huge < small / 20.0, "{small} {huge}");
}

#[test]
fn pooled_threshold_lies_between_subjects() {
    let opts = FitOptions::new(0.25, 0.625);
    let a = trials(&simulate_counts(1.0, 0.5, 0.25, 0.0, 300, 1), "a");
    let b = trials(&simulate_counts(3.0, 0.5, 0.25, 0.0, 300, 2), "a");
    let pooled = pool_subjects(&[&a, &b], &opts).unwrap();
    assert!(pooled.threshold > 1.0 && pooled.threshold < 3.0, "{}", pooled.threshold);
    assert!(pool_subjects(&[], &opts).is_err());
}

#[test]
fn pooling_copies_matches_single_fit() {
    let opts = FitOptions::new(0.25, 0.625);
    let a = trials(&simulate_counts(2.0, 0.8, 0.25, 0.02, 40, 9), "a");
    let one = pool_subjects(&[&a], &opts).unwrap();
    let single = dynlens_core::psychophysics::fit_psychometric_with(&a, &opts).unwrap();
    assert_eq!(one, single);
    let three = pool_subjects(&[&a, &a, &a], &opts).unwrap();
    assert!((three.threshold - one.threshold).abs() < 1e-4 * one.threshold.abs().max(1.0));
}

/// Mean of the last eight reversal levels, in log units.
fn staircase_estimate(mu: f64, sigma: f64, seed: u64) -> f64 {
    let mut s = StaircaseState::standard(4.0, 0.01, 20.0).unwrap();
    let mut rng = rng_for(seed, &[]);
    while !s.finished(12) {
        let p = psychometric(s.level, mu, sigma, 0.5, 0.0);
        s = s.update(rng.random::<f64>() < p);
    }
    let tail = &s.reversal_levels[s.reversal_levels.len() - 8..];
    tail.iter().map(|l| l.ln()).sum::<f64>() / 8.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn staircase_converges_to_seventy_one_percent(sigma in 0.2f64..2.0, seed in 0u64..1000) {
        let mu = 2.0;
        // 1-up/2-down tracks p = sqrt(1/2)
        let target = mu + sigma * dynlens_core::math::norm_ppf((0.5f64.sqrt() - 0.5) / 0.5);
        let runs = 1000;
        let mean = (0..runs).map(|r| staircase_estimate(mu, sigma, seed * 1000 + r)).sum::<f64>() / runs as f64;
        let level = mean.exp();
        prop_assert!((level / target - 1.0).abs() < 0.1, "sigma {sigma}: {level} vs {target}");
    }
}

/// Doubled mid-ranks computed by direct counting.
fn brute_ranks(d: &[f64]) -> Vec<u32> {
    d.iter()
        .map(|x| {
            let less = d.iter().filter(|y| y.abs() < x.abs()).count() as u32;
            let eq = d.iter().filter(|y| y.abs() == x.abs()).count() as u32;
            2 * less + eq + 1
        })
        .collect()
}

fn brute_force_p(d: &[f64], alt: Alternative) -> f64 {
    let d: Vec<f64> = d.iter().copied().filter(|x| *x != 0.0).collect();
    let r = brute_ranks(&d);
    let obs: u32 = r.iter().zip(&d).filter(|(_, x)| **x > 0.0).map(|(r, _)| *r).sum();
    let m = d.len();
    let (mut ge, mut le) = (0u64, 0u64);
    for mask in 0u32..(1 << m) {
        let w: u32 = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| r[i]).sum();
        ge += (w >= obs) as u64;
        le += (w <= obs) as u64;
    }
    let total = (1u64 << m) as f64;
    let (up, low) = (ge as f64 / total, le as f64 / total);
    match alt {
        Alternative::Greater => up,
        Alternative::Less => low,
        Alternative::TwoSided => (2.0 * up.min(low)).min(1.0),
    }
}

proptest! {
    #[test]
    fn exact_matches_brute_force(
        mags in prop::collection::vec(1u32..8, 5..=12),
        signs in prop::collection::vec(any::<bool>(), 12),
        alt in prop::sample::select(vec![Alternative::Greater, Alternative::Less, Alternative::TwoSided]),
    ) {
        let d: Vec<f64> = mags.iter().zip(&signs).map(|(&m, &s)| if s { m as f64 } else { -(m as f64) }).collect();
        let got = wilcoxon_exact(&d, alt).unwrap();
        let want = brute_force_p(&d, alt);
        prop_assert!((got.p - want).abs() < 1e-12, "{d:?}: {} vs {want}", got.p);
    }

    #[test]
    fn normal_approximation_close_to_exact(
        m in 15usize..=20,
        seed in any::<u64>(),
        alt in prop::sample::select(vec![Alternative::Greater, Alternative::Less, Alternative::TwoSided]),
    ) {
        let mut rng = rng_for(seed, &[]);
        let d: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.35).collect();
        let e = wilcoxon_exact(&d, alt).unwrap();
        let n = wilcoxon_normal(&d, alt).unwrap();
        prop_assert_eq!(e.method, WilcoxonMethod::Exact);
        // doubling a one-tailed gap just under 0.0056 can exceed 0.01
        let tol = if alt == Alternative::TwoSided { 0.0112 } else { 0.01 };
        prop_assert!((e.p - n.p).abs() < tol, "{} vs {}", e.p, n.p);
    }
}

#[test]
fn eleven_of_sixteen_lower_is_significant() {
    let fixed = [2.9, 3.1, 2.4, 2.2, 3.4, 2.6, 2.0, 2.8, 2.5, 3.0, 2.3, 1.9, 2.1, 1.7, 2.2, 1.8];
    let dynamic = [1.7, 1.9, 1.5, 1.6, 2.1, 1.8, 1.4, 1.9, 1.6, 2.0, 1.7, 2.2, 2.4, 1.9, 2.3, 2.1];
    let pairs: Vec<_> = fixed.iter().copied().zip(dynamic).collect();
    assert_eq!(pairs.iter().filter(|(f, d)| d < f).count(), 11);
    let r = wilcoxon_signed_rank(&pairs, Alternative::Greater).unwrap();
    let diffs: Vec<f64> = pairs.iter().map(|(a, b)| a - b).collect();
    assert!((r.p - brute_force_p(&diffs, Alternative::Greater)).abs() < 1e-12);
    assert!(r.p < 0.05, "p = {}", r.p);
}
