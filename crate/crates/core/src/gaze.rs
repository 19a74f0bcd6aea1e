//! Monte-Carlo estimate of how accurate fixation-depth estimates must be for
//! a tunable lens to beat a fixed one on average conflict.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::optics::{DemandWindow, Diopters};
use crate::rng::rng_for;

pub const MIN_SAMPLES: usize = 10_000;

/// Where an inaccurate estimate lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissModel {
    /// Uniform over the scene range, excluding the half-diopter band around
    /// the true depth that counts as a hit.
    UniformOutsideHitBand,
    UniformOverRange,
    AtScreen,
    /// Mirrored across the middle of the scene range.
    Reflected,
}

impl MissModel {
    pub fn as_str(self) -> &'static str {
        match self {
            MissModel::UniformOutsideHitBand => "uniform-outside-band",
            MissModel::UniformOverRange => "uniform",
            MissModel::AtScreen => "screen",
            MissModel::Reflected => "reflected",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [MissModel::UniformOutsideHitBand, MissModel::UniformOverRange, MissModel::AtScreen, MissModel::Reflected]
            .into_iter()
            .find(|m| m.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeErrorModel {
    pub hit_fraction: f64,
    /// Hits err uniformly within +-`hit_half_width` D; 0 makes hits exact.
    pub hit_half_width: f64,
    pub miss: MissModel,
}

impl Default for GazeErrorModel {
    fn default() -> Self {
        GazeErrorModel { hit_fraction: 1.0 / 3.0, hit_half_width: 0.5, miss: MissModel::UniformOutsideHitBand }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneDistribution {
    UniformDiopters,
    UniformMeters,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneDepthModel {
    pub near: Diopters,
    pub far: Diopters,
    pub screen: Diopters,
    pub distribution: SceneDistribution,
    pub samples: usize,
}

impl SceneDepthModel {
    /// Fixations uniform in diopters from 0.25 D behind to 1.5 D in front of
    /// a 1.77 m screen.
    pub fn reference() -> Self {
        let screen = Diopters(1.0 / 1.77);
        SceneDepthModel {
            near: screen + Diopters(1.5),
            far: screen - Diopters(0.25),
            screen,
            distribution: SceneDistribution::UniformDiopters,
            samples: 100_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.far.0 > 0.0 && self.near.0 > self.far.0 && self.near.0.is_finite()) {
            return Err(Error::Invalid(alloc::format!(
                "scene range must satisfy 0 < far < near, got far {} D near {} D",
                self.far.0,
                self.near.0
            )));
        }
        if !(self.screen.0 > 0.0 && self.screen.0 <= 20.0) {
            return Err(Error::Domain { what: "screen vergence (D)", value: self.screen.0 });
        }
        if self.samples < MIN_SAMPLES {
            return Err(Error::Precondition(alloc::format!("{} samples; need at least {MIN_SAMPLES}", self.samples)));
        }
        Ok(())
    }

    fn fixation(&self, u: f64) -> f64 {
        match self.distribution {
            SceneDistribution::UniformDiopters => self.far.0 + u * (self.near.0 - self.far.0),
            SceneDistribution::UniformMeters => {
                let (a, b) = (1.0 / self.far.0, 1.0 / self.near.0);
                1.0 / (a + u * (b - a))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConflictMetric {
    Diopters,
    /// Conflict converted to a blur-circle diameter in arcmin.
    BlurArcmin { pupil_mm: f64 },
}

impl ConflictMetric {
    fn apply(self, d: f64) -> f64 {
        match self {
            ConflictMetric::Diopters => d,
            ConflictMetric::BlurArcmin { pupil_mm } => d * pupil_mm * 1e-3 * math::ARCMIN_PER_RAD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSim {
    pub scene: SceneDepthModel,
    pub window: DemandWindow,
    pub metric: ConflictMetric,
    pub seed: u64,
}

impl GazeSim {
    pub fn reference(seed: u64) -> Self {
        GazeSim { scene: SceneDepthModel::reference(), window: DemandWindow::hardware(), metric: ConflictMetric::Diopters, seed }
    }
}

/// Uniform draws for one sample. Shared across hit fractions so sweeps use
/// common random numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleDraws {
    pub fixation: f64,
    pub hit: f64,
    pub error: f64,
    pub miss: f64,
}

pub fn draws(seed: u64, i: u64) -> SampleDraws {
    let mut r = rng_for(seed, &[0x6A2E, i]);
    SampleDraws { fixation: r.random(), hit: r.random(), error: r.random(), miss: r.random() }
}

fn miss_estimate(scene: &SceneDepthModel, model: &GazeErrorModel, x: f64, u: f64) -> f64 {
    let (far, near) = (scene.far.0, scene.near.0);
    match model.miss {
        MissModel::UniformOverRange => far + u * (near - far),
        MissModel::AtScreen => scene.screen.0,
        MissModel::Reflected => far + near - x,
        MissModel::UniformOutsideHitBand => {
            let w = model.hit_half_width;
            let below = ((x - w) - far).max(0.0);
            let above = (near - (x + w)).max(0.0);
            if below + above <= 0.0 {
                return far + u * (near - far);
            }
            let t = u * (below + above);
            if t < below {
                far + t
            } else {
                x + w + (t - below)
            }
        }
    }
}

/// (fixed-lens, dynamic-lens) conflict of sample `i`.
pub fn sample_conflict(sim: &GazeSim, model: &GazeErrorModel, i: u64) -> (f64, f64) {
    let d = draws(sim.seed, i);
    let x = sim.scene.fixation(d.fixation);
    let estimate = if d.hit < model.hit_fraction {
        x + (2.0 * d.error - 1.0) * model.hit_half_width
    } else {
        miss_estimate(&sim.scene, model, x, d.miss)
    };
    let (lens, _) = sim.window.clamp(Diopters(estimate));
    (sim.metric.apply((x - sim.scene.screen.0).abs()), sim.metric.apply((x - lens.0).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConflictEstimate {
    pub mean_fixed: f64,
    pub mean_dynamic: f64,
    pub se_fixed: f64,
    pub se_dynamic: f64,
    /// Standard error of the paired difference dynamic - fixed.
    pub se_difference: f64,
}

/// Running sums over samples; merge partial sums in any order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConflictSums {
    pub n: u64,
    pub fixed: f64,
    pub fixed_sq: f64,
    pub dynamic: f64,
    pub dynamic_sq: f64,
    pub diff_sq: f64,
}

impl ConflictSums {
    pub fn add(&mut self, (f, d): (f64, f64)) {
        self.n += 1;
        self.fixed += f;
        self.fixed_sq += f * f;
        self.dynamic += d;
        self.dynamic_sq += d * d;
        self.diff_sq += (d - f) * (d - f);
    }

    pub fn merge(mut self, o: ConflictSums) -> Self {
        self.n += o.n;
        self.fixed += o.fixed;
        self.fixed_sq += o.fixed_sq;
        self.dynamic += o.dynamic;
        self.dynamic_sq += o.dynamic_sq;
        self.diff_sq += o.diff_sq;
        self
    }

    pub fn estimate(&self) -> ConflictEstimate {
        let n = self.n as f64;
        let se = |s: f64, sq: f64| {
            let m = s / n;
            math::sqrt(((sq / n - m * m) * n / (n - 1.0)).max(0.0) / n)
        };
        let md = (self.dynamic - self.fixed) / n;
        ConflictEstimate {
            mean_fixed: self.fixed / n,
            mean_dynamic: self.dynamic / n,
            se_fixed: se(self.fixed, self.fixed_sq),
            se_dynamic: se(self.dynamic, self.dynamic_sq),
            se_difference: math::sqrt(((self.diff_sq / n - md * md) * n / (n - 1.0)).max(0.0) / n),
        }
    }
}

fn check_model(model: &GazeErrorModel) -> Result<()> {
    if !(0.0..=1.0).contains(&model.hit_fraction) {
        return Err(Error::Domain { what: "hit fraction", value: model.hit_fraction });
    }
    if !(0.0..=0.5).contains(&model.hit_half_width) {
        return Err(Error::Domain { what: "hit error half-width (D)", value: model.hit_half_width });
    }
    Ok(())
}

/// Samples per partial sum. Partial sums are merged in chunk order, so a
/// parallel driver reproduces the serial result bit for bit.
pub const CHUNK: usize = 4096;

pub fn chunk_count(sim: &GazeSim) -> usize {
    sim.scene.samples.div_ceil(CHUNK)
}

pub fn chunk_sums(sim: &GazeSim, model: &GazeErrorModel, chunk: usize) -> ConflictSums {
    let mut s = ConflictSums::default();
    let end = ((chunk + 1) * CHUNK).min(sim.scene.samples);
    for i in chunk * CHUNK..end {
        s.add(sample_conflict(sim, model, i as u64));
    }
    s
}

pub fn merge_chunks(chunks: &[ConflictSums]) -> ConflictEstimate {
    chunks.iter().fold(ConflictSums::default(), |a, b| a.merge(*b)).estimate()
}

pub fn validate(sim: &GazeSim, model: &GazeErrorModel) -> Result<()> {
    sim.scene.validate()?;
    check_model(model)
}

/// Mean absolute conflict for both lens conditions over the scene samples.
pub fn mean_conflict(sim: &GazeSim, model: &GazeErrorModel) -> Result<ConflictEstimate> {
    validate(sim, model)?;
    let chunks: Vec<ConflictSums> = (0..chunk_count(sim)).map(|c| chunk_sums(sim, model, c)).collect();
    Ok(merge_chunks(&chunks))
}

/// `E|X - s|` for `X` uniform on `[a, b]`.
pub fn expected_abs_deviation_uniform(a: f64, b: f64, s: f64) -> f64 {
    if s <= a {
        (a + b) / 2.0 - s
    } else if s >= b {
        s - (a + b) / 2.0
    } else {
        ((s - a) * (s - a) + (b - s) * (b - s)) / (2.0 * (b - a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Breakeven {
    /// Dynamic mean is within tolerance of fixed at `f_star`; the bracket
    /// holds the sign change.
    Found { f_star: f64, bracket: (f64, f64), difference: f64 },
    /// Still worse than the fixed lens with every estimate a hit.
    None { difference_at_one: f64 },
}

pub const BREAKEVEN_TOLERANCE_D: f64 = 1e-3;

/// Bisection on the hit fraction for `mean_dynamic = mean_fixed`, using
/// `eval(f) -> mean_dynamic - mean_fixed`.
pub fn breakeven_with<F: FnMut(f64) -> Result<f64>>(mut eval: F, tol: f64) -> Result<Breakeven> {
    let d0 = eval(0.0)?;
    if d0 <= tol {
        return Ok(Breakeven::Found { f_star: 0.0, bracket: (0.0, 0.0), difference: d0 });
    }
    let d1 = eval(1.0)?;
    if d1 > 0.0 {
        return Ok(Breakeven::None { difference_at_one: d1 });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let (mut mid, mut dm) = (1.0, d1);
    for _ in 0..60 {
        mid = 0.5 * (lo + hi);
        dm = eval(mid)?;
        if dm.abs() < tol {
            break;
        }
        if dm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Breakeven::Found { f_star: mid, bracket: (lo, hi), difference: dm })
}

pub fn breakeven_fraction(sim: &GazeSim, model: &GazeErrorModel) -> Result<Breakeven> {
    breakeven_with(
        |f| {
            let e = mean_conflict(sim, &GazeErrorModel { hit_fraction: f, ..*model })?;
            Ok(e.mean_dynamic - e.mean_fixed)
        },
        BREAKEVEN_TOLERANCE_D,
    )
}

/// One row per hit fraction.
pub fn sweep(sim: &GazeSim, model: &GazeErrorModel, fractions: &[f64]) -> Result<Vec<(f64, ConflictEstimate)>> {
    fractions
        .iter()
        .map(|&f| Ok((f, mean_conflict(sim, &GazeErrorModel { hit_fraction: f, ..*model })?)))
        .collect()
}
