use dynlens::config::{Preset, RunConfig};
use dynlens::parallel::{bootstrap_ci_par, mean_conflict_par, pool, run_experiment_par};
use dynlens_core::gaze::{mean_conflict, GazeErrorModel, GazeSim};
use dynlens_core::psychophysics::{bootstrap_ci, fit_counts, psychometric, run_experiment, FitOptions, LevelCounts};

#[test]
fn experiment_matches_serial_for_any_thread_count() {
    let mut c = RunConfig::preset(Preset::DisparityMonovision);
    c.subjects = 4;
    c.bootstrap_resamples = 500;
    let e = c.experiment().unwrap();
    let serial = run_experiment(&e, 9).unwrap();
    for threads in [1, 3] {
        let par = pool(threads).unwrap().install(|| run_experiment_par(&e, 9)).unwrap();
        assert_eq!(par, serial);
    }
}

#[test]
fn bootstrap_matches_serial() {
    let opts = FitOptions::new(0.25, 0.625);
    let counts: Vec<_> = [0.0, 0.8, 1.6, 2.4, 3.2, 4.0]
        .iter()
        .map(|&x| LevelCounts { level: x, n: 40, k: (psychometric(x, 2.0, 0.8, 0.25, 0.0) * 40.0).round() as u32 })
        .collect();
    let fit = fit_counts(&counts, &opts).unwrap();
    let a = bootstrap_ci(&counts, &fit, &opts, 600, 4).unwrap();
    let b = pool(2).unwrap().install(|| bootstrap_ci_par(&counts, &fit, &opts, 600, 4)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn gaze_sums_are_bit_identical() {
    let sim = GazeSim::reference(12);
    let m = GazeErrorModel::default();
    let a = mean_conflict(&sim, &m).unwrap();
    for threads in [1, 4] {
        assert_eq!(pool(threads).unwrap().install(|| mean_conflict_par(&sim, &m)).unwrap(), a);
    }
}
