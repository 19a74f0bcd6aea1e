use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dynlens::commands::{self, FitArgs};
use dynlens::config::RunConfig;
use dynlens::error::{CliError, CliResult};
use dynlens::tune::TuneOptions;
use dynlens_core::stimuli::StimulusKind;

#[derive(Parser)]
#[command(name = "dynlens", version, about = "Dynamic-lens and monovision stereo display simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// INI run configuration; keys not given take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base experiment when no config file is given.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Parent directory for run outputs.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for all cores. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a lens calibration to `current_mA distance_m` samples.
    Calibrate {
        samples: PathBuf,
        /// meters or diopters
        #[arg(long)]
        fit_space: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Write a stereo pair, a cross-fuse montage and a sidecar.
    Render {
        /// diamond or rds
        #[arg(long)]
        stimulus: Option<String>,
        /// Diamond frame time in seconds.
        #[arg(long)]
        t: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a simulated experiment and write trial logs and threshold tables.
    Experiment {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep gaze-estimate accuracy and find the breakeven hit fraction.
    Gazesim {
        #[command(flatten)]
        common: Common,
    },
    /// Analyses on existing CSV files, printed to stdout.
    Stats {
        #[command(subcommand)]
        which: Stats,
    },
    /// Search observer parameters that reproduce target pooled results.
    TuneObserver {
        #[arg(long, default_value_t = 16)]
        search_subjects: u32,
        #[arg(long, default_value_t = 60)]
        iterations: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Print the effective configuration.
    ShowConfig {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum Stats {
    /// Signed-rank test on a CSV with `baseline` and `treatment` columns.
    Wilcoxon { pairs: PathBuf },
    /// Psychometric fit per condition of a trial log.
    Fit {
        trials: PathBuf,
        /// Chance rate.
        #[arg(long, default_value_t = 0.25)]
        gamma: f64,
        /// Proportion correct defining the threshold.
        #[arg(long, default_value_t = 0.625)]
        criterion: f64,
        /// Fit in log stimulus units (durations).
        #[arg(long)]
        log_levels: bool,
        /// Parametric bootstrap resamples, 0 for none.
        #[arg(long, default_value_t = 1000)]
        bootstrap: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Per-item comparison of two sessions of symptom ratings.
    Symptoms {
        questionnaire: PathBuf,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Per-item test of preference ratings against the scale midpoint.
    Preferences {
        questionnaire: PathBuf,
        #[arg(long, default_value_t = 3.0)]
        neutral: f64,
    },
}

fn load(c: &Common) -> CliResult<RunConfig> {
    let mut cfg = match (&c.config, &c.preset) {
        (Some(_), Some(_)) => return Err(CliError::config("give --config or --preset, not both")),
        (Some(path), None) => RunConfig::load(path)?,
        (None, Some(p)) => RunConfig::from_ini_str(&format!("[run]\npreset = {p}\n"))?,
        (None, None) => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    if let Some(t) = c.threads {
        cfg.threads = t;
    }
    Ok(cfg)
}

fn finish(cfg: RunConfig) -> CliResult<RunConfig> {
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<String> {
    let dir = match cli.command {
        Command::Calibrate { samples, fit_space, common } => {
            let mut cfg = load(&common)?;
            if let Some(s) = fit_space {
                cfg.lens.fit_space = commands::parse_fit_space(&s)?;
            }
            commands::calibrate(&finish(cfg)?, &samples)?
        }
        Command::Render { stimulus, t, common } => {
            let mut cfg = load(&common)?;
            match stimulus.as_deref() {
                None => {}
                Some("diamond") => cfg.render.stimulus = StimulusKind::Diamond,
                Some("rds") => cfg.render.stimulus = StimulusKind::RandomDot,
                Some(o) => return Err(CliError::config(format!("stimulus must be diamond or rds, got '{o}'"))),
            }
            if let Some(t) = t {
                cfg.render.t_s = t;
            }
            commands::render(&finish(cfg)?)?
        }
        Command::Experiment { common } => commands::experiment(&finish(load(&common)?)?)?,
        Command::Gazesim { common } => commands::gazesim(&finish(load(&common)?)?)?,
        Command::Stats { which } => {
            return match which {
                Stats::Wilcoxon { pairs } => commands::stats_wilcoxon(&pairs),
                Stats::Fit { trials, gamma, criterion, log_levels, bootstrap, seed, threads } => {
                    commands::stats_fit(&trials, &FitArgs { gamma, criterion, log_levels, bootstrap, seed, threads })
                }
                Stats::Symptoms { questionnaire, a, b } => commands::stats_symptoms(&questionnaire, &a, &b),
                Stats::Preferences { questionnaire, neutral } => commands::stats_preferences(&questionnaire, neutral),
            }
        }
        Command::TuneObserver { search_subjects, iterations, common } => {
            let cfg = finish(load(&common)?)?;
            let opts = TuneOptions {
                search_subjects,
                max_iterations: iterations,
                seed: cfg.seed,
                threads: cfg.threads,
                ..Default::default()
            };
            let (report, dir) = commands::tune(&cfg, &opts)?;
            return Ok(format!("{report}output = {}\n", dir.display()));
        }
        Command::ShowConfig { common } => return Ok(finish(load(&common)?)?.to_ini_string()),
    };
    Ok(format!("{}\n", dir.display()))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(s) => {
            print!("{s}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("dynlens: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
