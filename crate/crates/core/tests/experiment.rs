use dynlens_core::controllers::ViewingCondition;
use dynlens_core::observer::ObserverParams;
use dynlens_core::psychophysics::{run_subject, summarize, ExperimentConfig, Protocol};

fn quick(mut cfg: ExperimentConfig, subjects: u32) -> ExperimentConfig {
    cfg.subjects = subjects;
    cfg.bootstrap_resamples = 0;
    cfg
}

#[test]
fn subject_runs_repeat_exactly() {
    for cfg in [ExperimentConfig::disparity_dynamic(), ExperimentConfig::fuse_dynamic()] {
        let cfg = quick(cfg, 1);
        assert_eq!(run_subject(&cfg, 0, 42).unwrap(), run_subject(&cfg, 0, 42).unwrap());
        assert_ne!(run_subject(&cfg, 0, 42).unwrap().trials, run_subject(&cfg, 0, 43).unwrap().trials);
    }
}

#[test]
fn ideal_observer_is_near_ceiling() {
    let mut cfg = quick(ExperimentConfig::disparity_dynamic(), 1);
    cfg.observer = ObserverParams { sigma0_arcmin: 1e-3, k_blur: 0.0, k_suppression: 0.0, lapse: 0.0, ..ObserverParams::default() };
    cfg.subject_spread = 0.0;
    cfg.conditions = vec![ViewingCondition::FixedLens, ViewingCondition::FixedLens];
    let run = run_subject(&cfg, 0, 1).unwrap();
    // only timeouts produce errors above zero disparity
    let above: Vec<_> = run.trials.iter().filter(|t| t.level > 0.0).collect();
    let wrong = above.iter().filter(|t| !t.correct).count();
    assert!(above.iter().filter(|t| !t.correct).all(|t| t.timed_out));
    assert!(wrong * 20 < above.len());
    let fit = run.fits[0].fit.as_ref().unwrap();
    assert!(fit.threshold < 0.8, "{}", fit.threshold);
}

#[test]
fn summary_has_both_cells_and_a_comparison() {
    let cfg = quick(ExperimentConfig::disparity_dynamic(), 6);
    let runs: Vec<_> = (0..cfg.subjects).map(|s| run_subject(&cfg, s, 3).unwrap()).collect();
    let res = summarize(&cfg, &runs, 3, None);
    assert_eq!(res.cells.len(), 2);
    assert_eq!(res.comparisons.len(), 1);
    assert!(res.cells.iter().all(|c| c.pooled.is_ok()));
    assert!(matches!(cfg.protocol, Protocol::Disparity(_)));
}

#[test]
fn monovision_fuse_cell_reports_per_eye_demands() {
    let cfg = quick(ExperimentConfig::fuse_monovision(), 1);
    let run = run_subject(&cfg, 0, 5).unwrap();
    let mono = run.fits.iter().find(|f| f.condition_index == 1).unwrap();
    assert_eq!((mono.demand_left.0, mono.demand_right.0), (2.0, 3.0));
    let fixed = run.fits.iter().find(|f| f.condition_index == 0).unwrap();
    assert_eq!((fixed.demand_left.0, fixed.demand_right.0), (2.0, 2.0));
}
