//! Experiment runners, psychometric fitting, bootstrap intervals and
//! nonparametric statistics.

mod experiment;
mod fit;
mod optimize;
mod questionnaire;
mod staircase;
mod wilcoxon;

use alloc::string::String;

pub use experiment::{
    run_experiment, run_subject, run_subject_with, summarize, CiFn, Comparison, ConditionSummary, DisparityProtocol, ExperimentConfig,
    ExperimentResult, Protocol, SubjectFit, SubjectRun, TimeToFuseProtocol,
};
pub use fit::{
    aggregate, bootstrap_ci, bootstrap_resample, ci_from_thresholds, fit_counts, fit_psychometric,
    fit_psychometric_with, pool_subjects, psychometric, FitOptions, LapseMode, LevelCounts, PsychometricFit,
    MIN_BOOTSTRAP_RESAMPLES,
};
pub use optimize::nelder_mead;
pub use questionnaire::{analyze_preferences, analyze_symptoms, ItemTest, QuestionnaireRecord};
pub use staircase::StaircaseState;
pub use wilcoxon::{wilcoxon_exact, wilcoxon_normal, wilcoxon_signed_rank, Alternative, WilcoxonMethod, WilcoxonResult};

/// One forced-choice trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u32,
    pub condition: String,
    /// Disparity in arcmin or duration in seconds.
    pub level: f64,
    pub response: u32,
    pub correct: bool,
    pub rt_s: f64,
    pub timed_out: bool,
    pub seed: u64,
}
