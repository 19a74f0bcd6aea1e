//! Run configuration in flat INI sections.
//!
//! Every key has a default. A file only needs the keys it changes; the
//! effective configuration written next to each run lists all of them.
//!
//! Grammar: `[section]` headers, `key = value` lines, `#` or `;` comment
//! lines. Numbers use Rust float syntax, lists are comma separated, booleans
//! are `true`/`false`. Unknown sections or keys are errors.
//!
//! `[run] preset` selects the base experiment (`disparity-dynamic`,
//! `disparity-monovision`, `fuse-dynamic`, `fuse-monovision`) before the other
//! keys apply. `[geometry] diagonal_in` may replace `pixel_pitch_mm`; the
//! derived pitch is what gets written back.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use dynlens_core::controllers::{Eye, ViewingCondition};
use dynlens_core::gaze::{ConflictMetric, GazeErrorModel, GazeSim, MissModel, SceneDepthModel, SceneDistribution};
use dynlens_core::geometry::{pitch_from_diagonal, DisplayGeometry};
use dynlens_core::observer::ObserverParams;
use dynlens_core::optics::{fit_calibration, CalibrationSample, DemandWindow, FitSpace, LensCalibration};
use dynlens_core::psychophysics::{DisparityProtocol, ExperimentConfig, Protocol, TimeToFuseProtocol};
use dynlens_core::stimuli::{CorrugationOrientation, DiamondStimulusParams, MotionProfile, RdsParams, StimulusKind};
use dynlens_core::Diopters;
use ini::{EscapePolicy, Ini, LineSeparator, WriteOption};

use crate::error::{invalid_config, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    DisparityDynamic,
    DisparityMonovision,
    FuseDynamic,
    FuseMonovision,
}

const PRESETS: [(&str, Preset); 4] = [
    ("disparity-dynamic", Preset::DisparityDynamic),
    ("disparity-monovision", Preset::DisparityMonovision),
    ("fuse-dynamic", Preset::FuseDynamic),
    ("fuse-monovision", Preset::FuseMonovision),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionSpec {
    Fixed,
    Dynamic,
    Monovision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolKind {
    Disparity,
    TimeToFuse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LensSettings {
    pub currents_ma: Vec<f64>,
    pub distances_m: Vec<f64>,
    pub fit_space: FitSpace,
    pub near_m: f64,
    pub far_m: f64,
    pub settle_ms: f64,
    /// Sample spacing of the lens-command log.
    pub log_step_ms: f64,
}

impl Default for LensSettings {
    fn default() -> Self {
        let r = LensCalibration::reference();
        LensSettings {
            currents_ma: r.samples.iter().map(|s| s.current_ma).collect(),
            distances_m: r.samples.iter().map(|s| s.distance_m).collect(),
            fit_space: r.space,
            near_m: 0.48,
            far_m: 3.2,
            settle_ms: r.settle_time_ms,
            log_step_ms: 10.0,
        }
    }
}

impl LensSettings {
    pub fn samples(&self) -> CliResult<Vec<CalibrationSample>> {
        if self.currents_ma.len() != self.distances_m.len() {
            return Err(CliError::config(format!(
                "[lens] has {} currents but {} distances",
                self.currents_ma.len(),
                self.distances_m.len()
            )));
        }
        Ok(self
            .currents_ma
            .iter()
            .zip(&self.distances_m)
            .map(|(&current_ma, &distance_m)| CalibrationSample { current_ma, distance_m })
            .collect())
    }

    pub fn calibration(&self) -> CliResult<LensCalibration> {
        fit_calibration(&self.samples()?, self.fit_space)
            .and_then(|c| c.with_distance_window(self.near_m, self.far_m))
            .and_then(|c| c.with_settle_time(self.settle_ms))
            .map_err(invalid_config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSettings {
    pub model: GazeErrorModel,
    pub scene: SceneDepthModel,
    pub window: DemandWindow,
    pub metric: ConflictMetric,
    pub sweep_step: f64,
}

impl Default for GazeSettings {
    fn default() -> Self {
        let r = GazeSim::reference(0);
        GazeSettings { model: GazeErrorModel::default(), scene: r.scene, window: r.window, metric: r.metric, sweep_step: 0.05 }
    }
}

impl GazeSettings {
    pub fn sim(&self, seed: u64) -> GazeSim {
        GazeSim { scene: self.scene, window: self.window, metric: self.metric, seed }
    }

    /// `round(1 / sweep_step)` equal steps from 0 to 1.
    pub fn fractions(&self) -> Vec<f64> {
        let n = (1.0 / self.sweep_step).round() as usize;
        (0..=n).map(|i| i as f64 / n as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSettings {
    pub stimulus: StimulusKind,
    pub t_s: f64,
    pub montage_gap_px: u32,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings { stimulus: StimulusKind::Diamond, t_s: 0.0, montage_gap_px: 32 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub seed: u64,
    pub out: PathBuf,
    /// 0 uses every core.
    pub threads: usize,
    pub geometry: DisplayGeometry,
    pub baseline: ConditionSpec,
    pub treatment: ConditionSpec,
    pub monovision_left: Diopters,
    pub monovision_right: Diopters,
    pub lens: LensSettings,
    pub observer: ObserverParams,
    pub protocol: ProtocolKind,
    pub subjects: u32,
    pub subject_spread: f64,
    pub bootstrap_resamples: usize,
    pub apply_exclusions: bool,
    pub dt_s: f64,
    pub disparity: DisparityProtocol,
    pub fuse: TimeToFuseProtocol,
    pub rds: RdsParams,
    pub render: RenderSettings,
    pub gaze: GazeSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::preset(Preset::DisparityDynamic)
    }
}

fn spec_of(c: &ViewingCondition) -> ConditionSpec {
    match c {
        ViewingCondition::FixedLens => ConditionSpec::Fixed,
        ViewingCondition::DynamicLens { .. } => ConditionSpec::Dynamic,
        ViewingCondition::Monovision { .. } => ConditionSpec::Monovision,
    }
}

impl RunConfig {
    pub fn preset(p: Preset) -> Self {
        let e = match p {
            Preset::DisparityDynamic => ExperimentConfig::disparity_dynamic(),
            Preset::DisparityMonovision => ExperimentConfig::disparity_monovision(),
            Preset::FuseDynamic => ExperimentConfig::fuse_dynamic(),
            Preset::FuseMonovision => ExperimentConfig::fuse_monovision(),
        };
        let (protocol, disparity, fuse) = match e.protocol {
            Protocol::Disparity(d) => (ProtocolKind::Disparity, d, TimeToFuseProtocol::default()),
            Protocol::TimeToFuse(f) => (ProtocolKind::TimeToFuse, DisparityProtocol::default(), f),
        };
        let mut gaze = GazeSettings::default();
        gaze.scene.screen = e.geometry.screen_vergence();
        gaze.scene.near = gaze.scene.screen + Diopters(1.5);
        gaze.scene.far = gaze.scene.screen - Diopters(0.25);
        RunConfig {
            preset: p,
            seed: 1,
            out: PathBuf::from("runs"),
            threads: 0,
            geometry: e.geometry,
            baseline: spec_of(&e.conditions[0]),
            treatment: spec_of(&e.conditions[1]),
            monovision_left: Diopters(0.0),
            monovision_right: Diopters(-1.0),
            lens: LensSettings::default(),
            observer: e.observer,
            protocol,
            subjects: e.subjects,
            subject_spread: e.subject_spread,
            bootstrap_resamples: e.bootstrap_resamples,
            apply_exclusions: e.apply_exclusions,
            dt_s: e.dt_s,
            disparity,
            fuse,
            rds: RdsParams::default(),
            render: RenderSettings::default(),
            gaze,
        }
    }

    fn condition(&self, spec: ConditionSpec) -> CliResult<ViewingCondition> {
        Ok(match spec {
            ConditionSpec::Fixed => ViewingCondition::FixedLens,
            ConditionSpec::Dynamic => {
                let c = self.lens.calibration()?;
                ViewingCondition::DynamicLens { left: c.clone(), right: c }
            }
            ConditionSpec::Monovision => {
                ViewingCondition::monovision(self.monovision_left, self.monovision_right).map_err(invalid_config)?
            }
        })
    }

    pub fn experiment(&self) -> CliResult<ExperimentConfig> {
        let protocol = match self.protocol {
            ProtocolKind::Disparity => Protocol::Disparity(self.disparity.clone()),
            ProtocolKind::TimeToFuse => Protocol::TimeToFuse(self.fuse.clone()),
        };
        let cfg = ExperimentConfig {
            protocol,
            geometry: self.geometry,
            conditions: vec![self.condition(self.baseline)?, self.condition(self.treatment)?],
            observer: self.observer.clone(),
            subjects: self.subjects,
            subject_spread: self.subject_spread,
            bootstrap_resamples: self.bootstrap_resamples,
            apply_exclusions: self.apply_exclusions,
            dt_s: self.dt_s,
        };
        cfg.validate().map_err(invalid_config)?;
        Ok(cfg)
    }

    pub fn diamond(&self) -> DiamondStimulusParams {
        DiamondStimulusParams { jitter_seed: self.seed, ..self.disparity.stimulus.clone() }
    }

    pub fn rds_params(&self) -> RdsParams {
        RdsParams { seed: self.seed, ..self.rds.clone() }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.experiment()?;
        self.diamond().validate().map_err(invalid_config)?;
        self.rds_params().validate().map_err(invalid_config)?;
        dynlens_core::gaze::validate(&self.gaze.sim(self.seed), &self.gaze.model).map_err(invalid_config)?;
        if !(self.gaze.window.far.0 > 0.0 && self.gaze.window.near.0 >= self.gaze.window.far.0) {
            return Err(CliError::config("[gaze] lens window must satisfy 0 < lens_far_D <= lens_near_D"));
        }
        if !(self.gaze.sweep_step > 0.0 && self.gaze.sweep_step <= 1.0) {
            return Err(CliError::config("[gaze] sweep_step must lie in (0, 1]"));
        }
        if !(self.lens.log_step_ms > 0.0) {
            return Err(CliError::config("[lens] log_step_ms must be positive"));
        }
        if !(self.render.t_s >= 0.0) {
            return Err(CliError::config("[render] t_s must be non-negative"));
        }
        Ok(())
    }

    pub fn from_ini_str(text: &str) -> CliResult<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        let preset_name = ini.section(Some("run")).and_then(|s| s.get("preset")).unwrap_or("disparity-dynamic");
        let preset = PRESETS
            .iter()
            .find(|(n, _)| *n == preset_name)
            .map(|(_, p)| *p)
            .ok_or_else(|| CliError::config(format!("unknown preset '{preset_name}'")))?;
        let mut cfg = RunConfig::preset(preset);
        let mut r = Reader { ini: &ini, used: BTreeSet::new(), errors: Vec::new() };
        r.mark("run", "preset");
        cfg.visit(&mut r);

        let geom = ini.section(Some("geometry"));
        if let Some(d) = geom.and_then(|s| s.get("diagonal_in")) {
            r.mark("geometry", "diagonal_in");
            if geom.and_then(|s| s.get("pixel_pitch_mm")).is_some() {
                r.errors.push("[geometry] give diagonal_in or pixel_pitch_mm, not both".into());
            }
            match d.trim().parse::<f64>() {
                Ok(d) if d > 0.0 => {
                    cfg.geometry.pixel_pitch_mm = pitch_from_diagonal(d, cfg.geometry.width_px, cfg.geometry.height_px)
                }
                _ => r.errors.push(format!("[geometry] diagonal_in: cannot parse '{d}' as a positive number")),
            }
        }
        for (sec, props) in ini.iter() {
            for (k, _) in props.iter() {
                let s = sec.unwrap_or("");
                if !r.used.contains(&(s.to_string(), k.to_string())) {
                    r.errors.push(format!("unknown key '{k}' in [{s}]"));
                }
            }
        }
        if !r.errors.is_empty() {
            return Err(CliError::config(r.errors.join("; ")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::from_ini_str(&text)
    }

    /// Every key with its effective value.
    pub fn to_ini_string(&self) -> String {
        let mut w = Writer { ini: Ini::new() };
        let name = PRESETS.iter().find(|(_, p)| *p == self.preset).map(|(n, _)| *n).unwrap();
        w.ini.with_section(Some("run")).set("preset", name);
        self.clone().visit(&mut w);
        let mut buf = Vec::new();
        w.ini
            .write_to_opt(
                &mut buf,
                WriteOption { escape_policy: EscapePolicy::Basics, line_separator: LineSeparator::CR, kv_separator: " = " },
            )
            .expect("writing to memory");
        String::from_utf8(buf).expect("ini output is utf-8")
    }

    fn visit<V: Visitor>(&mut self, v: &mut V) {
        v.num("run", "seed", &mut self.seed);
        let mut out = self.out.to_string_lossy().into_owned();
        v.text("run", "out", &mut out);
        self.out = PathBuf::from(out);
        v.num("run", "threads", &mut self.threads);

        let g = &mut self.geometry;
        v.num("geometry", "screen_distance_m", &mut g.screen_distance_m);
        v.num("geometry", "pixel_pitch_mm", &mut g.pixel_pitch_mm);
        v.num("geometry", "width_px", &mut g.width_px);
        v.num("geometry", "height_px", &mut g.height_px);
        v.num("geometry", "ipd_mm", &mut g.ipd_mm);

        let conds = [("fixed", ConditionSpec::Fixed), ("dynamic", ConditionSpec::Dynamic), ("monovision", ConditionSpec::Monovision)];
        v.choice("conditions", "baseline", &mut self.baseline, &conds);
        v.choice("conditions", "treatment", &mut self.treatment, &conds);
        v.num("conditions", "monovision_left_D", &mut self.monovision_left.0);
        v.num("conditions", "monovision_right_D", &mut self.monovision_right.0);

        let l = &mut self.lens;
        v.list("lens", "currents_mA", &mut l.currents_ma);
        v.list("lens", "distances_m", &mut l.distances_m);
        v.choice("lens", "fit_space", &mut l.fit_space, &[("meters", FitSpace::Meters), ("diopters", FitSpace::Diopters)]);
        v.num("lens", "near_m", &mut l.near_m);
        v.num("lens", "far_m", &mut l.far_m);
        v.num("lens", "settle_ms", &mut l.settle_ms);
        v.num("lens", "log_step_ms", &mut l.log_step_ms);

        let o = &mut self.observer;
        v.num("observer", "tau_accommodation_s", &mut o.tau_accommodation_s);
        v.num("observer", "tau_vergence_s", &mut o.tau_vergence_s);
        v.num("observer", "gain_accommodation", &mut o.gain_accommodation);
        v.num("observer", "gain_vergence", &mut o.gain_vergence);
        v.num("observer", "cross_vergence_to_accommodation", &mut o.cross_vergence_to_accommodation);
        v.num("observer", "cross_accommodation_to_vergence", &mut o.cross_accommodation_to_vergence);
        v.num("observer", "leak_accommodation", &mut o.leak_accommodation);
        v.num("observer", "leak_vergence", &mut o.leak_vergence);
        v.num("observer", "adaptation_tau_s", &mut o.adaptation_tau_s);
        v.num("observer", "adaptation_gain", &mut o.adaptation_gain);
        v.num("observer", "depth_of_focus_D", &mut o.depth_of_focus_d);
        v.num("observer", "pupil_mm", &mut o.pupil_mm);
        v.num("observer", "ipd_mm", &mut o.ipd_mm);
        v.num("observer", "sigma0_arcmin", &mut o.sigma0_arcmin);
        v.num("observer", "k_blur", &mut o.k_blur);
        v.num("observer", "k_suppression", &mut o.k_suppression);
        v.num("observer", "panum_arcmin", &mut o.panum_arcmin);
        v.num("observer", "acuity_arcmin", &mut o.acuity_arcmin);
        v.num("observer", "lapse", &mut o.lapse);
        v.choice("observer", "sighting_eye", &mut o.sighting_eye, &[("left", Eye::Left), ("right", Eye::Right)]);
        v.num("observer", "fuse_cv", &mut o.fuse_cv);
        v.num("observer", "rt_median_s", &mut o.rt_median_s);
        v.num("observer", "rt_log_sd", &mut o.rt_log_sd);
        v.num("observer", "decision_seed", &mut o.decision_seed);

        let kinds = [("disparity", ProtocolKind::Disparity), ("time-to-fuse", ProtocolKind::TimeToFuse)];
        v.choice("protocol", "kind", &mut self.protocol, &kinds);
        v.num("protocol", "subjects", &mut self.subjects);
        v.num("protocol", "subject_spread", &mut self.subject_spread);
        v.num("protocol", "bootstrap_resamples", &mut self.bootstrap_resamples);
        v.num("protocol", "apply_exclusions", &mut self.apply_exclusions);
        v.num("protocol", "dt_s", &mut self.dt_s);

        let d = &mut self.disparity;
        v.list("disparity", "levels_arcmin", &mut d.levels_arcmin);
        v.num("disparity", "trials_per_level", &mut d.trials_per_level);
        v.num("disparity", "n_alternatives", &mut d.n_alternatives);
        v.num("disparity", "timeout_s", &mut d.timeout_s);
        v.num("disparity", "criterion", &mut d.criterion);
        v.num("disparity", "samples_per_window", &mut d.samples_per_window);
        v.num("disparity", "exclusion_accuracy", &mut d.exclusion_accuracy);
        v.num("disparity", "feedback", &mut d.feedback);

        let s = &mut d.stimulus;
        v.num("diamond", "near_offset_D", &mut s.near_offset.0);
        v.num("diamond", "far_offset_D", &mut s.far_offset.0);
        v.num("diamond", "travel_time_s", &mut s.travel_time_s);
        v.num("diamond", "end_pause_s", &mut s.end_pause_s);
        let profiles = [("diopter-linear", MotionProfile::DiopterLinear), ("meter-linear", MotionProfile::MeterLinear)];
        v.choice("diamond", "profile", &mut s.profile, &profiles);
        v.num("diamond", "n_circles", &mut s.n_circles);
        v.num("diamond", "target_index", &mut s.target_index);
        v.num("diamond", "target_disparity_arcmin", &mut s.target_disparity_arcmin);
        v.num("diamond", "circle_on_s", &mut s.circle_on_s);
        v.num("diamond", "circle_off_s", &mut s.circle_off_s);
        v.num("diamond", "jitter_arcmin", &mut s.jitter_arcmin);
        v.num("diamond", "half_diagonal_arcmin", &mut s.diamond_half_diagonal_arcmin);
        v.num("diamond", "circle_radius_arcmin", &mut s.circle_radius_arcmin);
        v.num("diamond", "x_bar_width_arcmin", &mut s.x_bar_width_arcmin);
        v.num("diamond", "background", &mut s.background);
        v.num("diamond", "diamond_luminance", &mut s.diamond_luminance);
        v.num("diamond", "circle_luminance", &mut s.circle_luminance);
        v.num("diamond", "x_luminance", &mut s.x_luminance);
        v.num("diamond", "canvas_width", &mut s.canvas_width);
        v.num("diamond", "canvas_height", &mut s.canvas_height);

        let f = &mut self.fuse;
        v.list("fuse", "depths_D", &mut f.depths_d);
        v.num("fuse", "start_s", &mut f.start_s);
        v.num("fuse", "min_s", &mut f.min_s);
        v.num("fuse", "max_s", &mut f.max_s);
        v.num("fuse", "up_factor", &mut f.up_factor);
        v.num("fuse", "down_factor", &mut f.down_factor);
        v.num("fuse", "reversals", &mut f.reversals);
        v.num("fuse", "max_trials_per_staircase", &mut f.max_trials_per_staircase);
        v.num("fuse", "timeout_s", &mut f.timeout_s);
        v.num("fuse", "criterion", &mut f.criterion);
        v.num("fuse", "exclusion_accuracy", &mut f.exclusion_accuracy);
        v.num("fuse", "exclusion_top_fraction", &mut f.exclusion_top_fraction);

        let r = &mut self.rds;
        let orients = [("20", CorrugationOrientation::UpLeft), ("-20", CorrugationOrientation::UpRight)];
        v.choice("rds", "orientation_deg", &mut r.orientation, &orients);
        v.num("rds", "field_deg", &mut r.field_deg);
        v.num("rds", "spatial_frequency_cpd", &mut r.spatial_frequency_cpd);
        v.num("rds", "peak_disparity_arcmin", &mut r.peak_disparity_arcmin);
        v.num("rds", "pedestal_disparity_arcmin", &mut r.pedestal_disparity_arcmin);
        v.num("rds", "dots_per_deg2", &mut r.dots_per_deg2);
        v.num("rds", "dot_size_arcmin", &mut r.dot_size_arcmin);
        v.num("rds", "mirror_positions", &mut r.mirror_positions);
        v.num("rds", "background", &mut r.background);

        let kinds = [("diamond", StimulusKind::Diamond), ("rds", StimulusKind::RandomDot)];
        v.choice("render", "stimulus", &mut self.render.stimulus, &kinds);
        v.num("render", "t_s", &mut self.render.t_s);
        v.num("render", "montage_gap_px", &mut self.render.montage_gap_px);

        let gz = &mut self.gaze;
        v.num("gaze", "hit_fraction", &mut gz.model.hit_fraction);
        v.num("gaze", "hit_half_width_D", &mut gz.model.hit_half_width);
        let misses = [
            ("uniform-outside-band", MissModel::UniformOutsideHitBand),
            ("uniform", MissModel::UniformOverRange),
            ("screen", MissModel::AtScreen),
            ("reflected", MissModel::Reflected),
        ];
        v.choice("gaze", "miss", &mut gz.model.miss, &misses);
        v.num("gaze", "scene_near_D", &mut gz.scene.near.0);
        v.num("gaze", "scene_far_D", &mut gz.scene.far.0);
        v.num("gaze", "screen_D", &mut gz.scene.screen.0);
        let dists = [("uniform-diopters", SceneDistribution::UniformDiopters), ("uniform-meters", SceneDistribution::UniformMeters)];
        v.choice("gaze", "distribution", &mut gz.scene.distribution, &dists);
        v.num("gaze", "samples", &mut gz.scene.samples);
        v.num("gaze", "lens_near_D", &mut gz.window.near.0);
        v.num("gaze", "lens_far_D", &mut gz.window.far.0);
        let mut metric = match gz.metric {
            ConflictMetric::Diopters => 0,
            ConflictMetric::BlurArcmin { .. } => 1,
        };
        let mut pupil = match gz.metric {
            ConflictMetric::BlurArcmin { pupil_mm } => pupil_mm,
            ConflictMetric::Diopters => 4.0,
        };
        v.choice("gaze", "metric", &mut metric, &[("diopters", 0), ("blur-arcmin", 1)]);
        v.num("gaze", "metric_pupil_mm", &mut pupil);
        gz.metric = if metric == 0 { ConflictMetric::Diopters } else { ConflictMetric::BlurArcmin { pupil_mm: pupil } };
        v.num("gaze", "sweep_step", &mut gz.sweep_step);
    }
}

trait Visitor {
    fn num<T: FromStr + Display>(&mut self, sec: &str, key: &str, v: &mut T);
    fn text(&mut self, sec: &str, key: &str, v: &mut String);
    fn list(&mut self, sec: &str, key: &str, v: &mut Vec<f64>);
    fn choice<T: Copy + PartialEq>(&mut self, sec: &str, key: &str, v: &mut T, options: &[(&str, T)]);
}

struct Reader<'a> {
    ini: &'a Ini,
    used: BTreeSet<(String, String)>,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn mark(&mut self, sec: &str, key: &str) {
        self.used.insert((sec.to_string(), key.to_string()));
    }

    fn raw(&mut self, sec: &str, key: &str) -> Option<String> {
        self.mark(sec, key);
        self.ini.section(Some(sec)).and_then(|s| s.get(key)).map(|s| s.trim().to_string())
    }
}

impl Visitor for Reader<'_> {
    fn num<T: FromStr + Display>(&mut self, sec: &str, key: &str, v: &mut T) {
        if let Some(s) = self.raw(sec, key) {
            match s.parse() {
                Ok(x) => *v = x,
                Err(_) => self.errors.push(format!("[{sec}] {key}: cannot parse '{s}'")),
            }
        }
    }

    fn text(&mut self, sec: &str, key: &str, v: &mut String) {
        if let Some(s) = self.raw(sec, key) {
            *v = s;
        }
    }

    fn list(&mut self, sec: &str, key: &str, v: &mut Vec<f64>) {
        if let Some(s) = self.raw(sec, key) {
            let parsed: Result<Vec<f64>, _> =
                s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::parse).collect();
            match parsed {
                Ok(x) => *v = x,
                Err(_) => self.errors.push(format!("[{sec}] {key}: cannot parse '{s}' as a number list")),
            }
        }
    }

    fn choice<T: Copy + PartialEq>(&mut self, sec: &str, key: &str, v: &mut T, options: &[(&str, T)]) {
        if let Some(s) = self.raw(sec, key) {
            match options.iter().find(|(n, _)| *n == s) {
                Some((_, x)) => *v = *x,
                None => {
                    let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                    self.errors.push(format!("[{sec}] {key}: '{s}' is not one of {}", names.join(", ")));
                }
            }
        }
    }
}

struct Writer {
    ini: Ini,
}

impl Visitor for Writer {
    fn num<T: FromStr + Display>(&mut self, sec: &str, key: &str, v: &mut T) {
        self.ini.with_section(Some(sec)).set(key, v.to_string());
    }

    fn text(&mut self, sec: &str, key: &str, v: &mut String) {
        self.ini.with_section(Some(sec)).set(key, v.clone());
    }

    fn list(&mut self, sec: &str, key: &str, v: &mut Vec<f64>) {
        let s: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        self.ini.with_section(Some(sec)).set(key, s.join(", "));
    }

    fn choice<T: Copy + PartialEq>(&mut self, sec: &str, key: &str, v: &mut T, options: &[(&str, T)]) {
        let name = options.iter().find(|(_, x)| x == v).map(|(n, _)| *n).expect("every value has a name");
        self.ini.with_section(Some(sec)).set(key, name);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        for (_, p) in PRESETS {
            let c = RunConfig::preset(p);
            let text = c.to_ini_string();
            let back = RunConfig::from_ini_str(&text).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.to_ini_string(), text);
        }
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(RunConfig::from_ini_str("[observer]\ntau_x = 1\n"), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::from_ini_str("[observer]\nlapse = lots\n"), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::from_ini_str("[observer]\nlapse = 0.5\n"), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::from_ini_str("[conditions]\ntreatment = bifocal\n"), Err(CliError::Config(_))));
    }

    #[test]
    fn diagonal_sets_pitch() {
        let c = RunConfig::from_ini_str("[geometry]\ndiagonal_in = 23\n").unwrap();
        assert_eq!(c.geometry.pixel_pitch_mm, pitch_from_diagonal(23.0, 1920, 1080));
        assert!(RunConfig::from_ini_str("[geometry]\ndiagonal_in = 23\npixel_pitch_mm = 0.2\n").is_err());
    }

    #[test]
    fn preset_then_overrides() {
        let c = RunConfig::from_ini_str("[run]\npreset = fuse-monovision\nseed = 9\n[fuse]\ndepths_D = 1, 0.5\n").unwrap();
        assert_eq!(c.protocol, ProtocolKind::TimeToFuse);
        assert_eq!(c.geometry.screen_distance_m, 0.5);
        assert_eq!(c.fuse.depths_d, vec![1.0, 0.5]);
        assert_eq!(c.seed, 9);
    }
}
