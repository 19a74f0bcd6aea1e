//! Simulated binocular observer: cross-coupled accommodation and vergence,
//! disparity sensitivity that degrades with blur, and response generation.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::controllers::Eye;
use crate::error::{Error, Result};
use crate::math;
use crate::optics::{blur_circle_arcmin, Diopters};

/// Beyond this many diopters the integration is declared divergent.
pub const DIVERGENCE_LIMIT_D: f64 = 20.0;
pub const FUSE_HOLD_S: f64 = 0.1;
pub const FUSE_CAP_S: f64 = 10.0;
pub const DEFAULT_DT_S: f64 = 0.001;

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverParams {
    pub tau_accommodation_s: f64,
    pub tau_vergence_s: f64,
    pub gain_accommodation: f64,
    pub gain_vergence: f64,
    /// Vergence-driven accommodation (CA/C-like).
    pub cross_vergence_to_accommodation: f64,
    /// Accommodative vergence (AC/A-like).
    pub cross_accommodation_to_vergence: f64,
    /// Pull of accommodation toward the current vergence state.
    pub leak_accommodation: f64,
    pub leak_vergence: f64,
    /// Slow adaptation that cancels a fraction of the leak pull.
    pub adaptation_tau_s: f64,
    pub adaptation_gain: f64,
    /// Blur smaller than this (D) does not drive accommodation.
    pub depth_of_focus_d: f64,
    pub pupil_mm: f64,
    pub ipd_mm: f64,
    pub sigma0_arcmin: f64,
    /// arcmin of sigma per arcmin of blur circle.
    pub k_blur: f64,
    /// arcmin of sigma per diopter of interocular defocus difference.
    pub k_suppression: f64,
    pub panum_arcmin: f64,
    /// Blur circle (arcmin) at or below which the image counts as sharp.
    pub acuity_arcmin: f64,
    pub lapse: f64,
    pub sighting_eye: Eye,
    /// Spread of the time-to-fuse psychometric function in ln(duration).
    pub fuse_cv: f64,
    pub rt_median_s: f64,
    pub rt_log_sd: f64,
    pub decision_seed: u64,
}

impl Default for ObserverParams {
    fn default() -> Self {
        ObserverParams {
            tau_accommodation_s: 0.3,
            tau_vergence_s: 0.2,
            gain_accommodation: 0.95,
            gain_vergence: 0.95,
            cross_vergence_to_accommodation: 0.6,
            cross_accommodation_to_vergence: 0.1,
            leak_accommodation: 0.5,
            leak_vergence: 0.0,
            adaptation_tau_s: 3.0,
            adaptation_gain: 0.95,
            depth_of_focus_d: 0.35,
            pupil_mm: 4.0,
            ipd_mm: crate::geometry::DEFAULT_IPD_MM,
            sigma0_arcmin: 0.6,
            k_blur: 0.1,
            k_suppression: 0.3,
            panum_arcmin: 15.0,
            acuity_arcmin: 8.0,
            lapse: 0.02,
            sighting_eye: Eye::Right,
            fuse_cv: 0.25,
            rt_median_s: 1.0,
            rt_log_sd: 0.5,
            decision_seed: 0,
        }
    }
}

impl ObserverParams {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("accommodation time constant (s)", self.tau_accommodation_s),
            ("vergence time constant (s)", self.tau_vergence_s),
            ("pupil diameter (mm)", self.pupil_mm),
            ("interpupillary distance (mm)", self.ipd_mm),
            ("base disparity sigma (arcmin)", self.sigma0_arcmin),
            ("Panum limit (arcmin)", self.panum_arcmin),
            ("acuity criterion (arcmin)", self.acuity_arcmin),
            ("fuse-time spread", self.fuse_cv),
            ("adaptation time constant (s)", self.adaptation_tau_s),
            ("median response time (s)", self.rt_median_s),
        ];
        for (what, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain { what, value: v });
            }
        }
        let gains = [
            ("accommodation gain", self.gain_accommodation),
            ("vergence gain", self.gain_vergence),
            ("vergence-to-accommodation gain", self.cross_vergence_to_accommodation),
            ("accommodation-to-vergence gain", self.cross_accommodation_to_vergence),
        ];
        for (what, g) in gains {
            if !(g > 0.0 && g <= 1.2) {
                return Err(Error::Domain { what, value: g });
            }
        }
        let nonneg = [
            ("accommodation leak", self.leak_accommodation),
            ("vergence leak", self.leak_vergence),
            ("depth of focus (D)", self.depth_of_focus_d),
            ("blur penalty", self.k_blur),
            ("suppression penalty", self.k_suppression),
            ("response-time log sd", self.rt_log_sd),
        ];
        for (what, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Domain { what, value: v });
            }
        }
        if !(0.0..1.0).contains(&self.adaptation_gain) {
            return Err(Error::Domain { what: "adaptation gain", value: self.adaptation_gain });
        }
        if !(0.0..=0.06).contains(&self.lapse) {
            return Err(Error::Domain { what: "lapse rate", value: self.lapse });
        }
        Ok(())
    }

    /// Linearized system matrix (dead zone ignored) for the state (A, V, W).
    pub fn linear_matrix(&self) -> [[f64; 3]; 3] {
        let (ta, tv, tw) = (self.tau_accommodation_s, self.tau_vergence_s, self.adaptation_tau_s);
        let (la, lv, k) = (self.leak_accommodation, self.leak_vergence, self.adaptation_gain);
        [
            [
                (-self.gain_accommodation - la) / ta,
                (-self.cross_vergence_to_accommodation + la) / ta,
                -la / ta,
            ],
            [
                (-self.cross_accommodation_to_vergence + lv) / tv,
                (-self.gain_vergence - lv) / tv,
                0.0,
            ],
            [-k / tw, k / tw, -1.0 / tw],
        ]
    }

    /// Real parts of the eigenvalues of [`Self::linear_matrix`], ascending.
    pub fn eigenvalue_real_parts(&self) -> [f64; 3] {
        let m = self.linear_matrix();
        let tr = m[0][0] + m[1][1] + m[2][2];
        let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0]
            + m[1][1] * m[2][2]
            - m[1][2] * m[2][1];
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        // Characteristic polynomial x^3 + a2 x^2 + a1 x + a0.
        let (a2, a1, a0) = (-tr, minors, -det);
        let p = |x: f64| ((x + a2) * x + a1) * x + a0;
        let bound = 1.0 + a2.abs().max(a1.abs()).max(a0.abs());
        let (mut lo, mut hi) = (-bound, bound);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if p(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let r = 0.5 * (lo + hi);
        let (b, c) = (a2 + r, a1 + r * (a2 + r));
        let disc = b * b / 4.0 - c;
        let mut out = if disc >= 0.0 {
            let q = math::sqrt(disc);
            [r, -b / 2.0 - q, -b / 2.0 + q]
        } else {
            [r, -b / 2.0, -b / 2.0]
        };
        out.sort_by(|x, y| x.total_cmp(y));
        out
    }

    fn describe(&self) -> String {
        alloc::format!(
            "tau_a={} tau_v={} g_a={} g_v={} g_ca={} g_ac={} leak_a={} leak_v={} tau_w={} k_w={}",
            self.tau_accommodation_s,
            self.tau_vergence_s,
            self.gain_accommodation,
            self.gain_vergence,
            self.cross_vergence_to_accommodation,
            self.cross_accommodation_to_vergence,
            self.leak_accommodation,
            self.leak_vergence,
            self.adaptation_tau_s,
            self.adaptation_gain
        )
    }

    /// Vergence error in arcmin between two vergence states in diopters.
    pub fn vergence_error_arcmin(&self, v: f64, target: f64) -> f64 {
        let half = self.ipd_mm / 2000.0;
        2.0 * (math::atan(half * v) - math::atan(half * target)).abs() * math::ARCMIN_PER_RAD
    }
}

/// Drives presented to the observer at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stimulus {
    pub vergence: Diopters,
    pub demand_left: Diopters,
    pub demand_right: Diopters,
}

impl Stimulus {
    pub fn concordant(d: Diopters) -> Self {
        Stimulus { vergence: d, demand_left: d, demand_right: d }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverState {
    pub accommodation: f64,
    pub vergence: f64,
    /// Slow adaptation state (D).
    pub adaptation: f64,
    pub defocus_left: f64,
    pub defocus_right: f64,
    pub fused: bool,
    pub t_s: f64,
}

impl ObserverState {
    /// Observer settled on `stim` (accommodation at the sighting eye's demand
    /// is not assumed; both responses sit at the vergence stimulus).
    pub fn fixating(params: &ObserverParams, stim: &Stimulus) -> Self {
        let mut s = ObserverState {
            accommodation: stim.vergence.0,
            vergence: stim.vergence.0,
            adaptation: 0.0,
            defocus_left: 0.0,
            defocus_right: 0.0,
            fused: true,
            t_s: 0.0,
        };
        s.refresh(params, stim);
        s
    }

    /// Starts at an explicit (A, V).
    pub fn at(params: &ObserverParams, accommodation: f64, vergence: f64, stim: &Stimulus) -> Self {
        let mut s = ObserverState { accommodation, vergence, adaptation: 0.0, defocus_left: 0.0, defocus_right: 0.0, fused: false, t_s: 0.0 };
        s.refresh(params, stim);
        s
    }

    fn refresh(&mut self, params: &ObserverParams, stim: &Stimulus) {
        self.defocus_left = stim.demand_left.0 - self.accommodation;
        self.defocus_right = stim.demand_right.0 - self.accommodation;
        self.fused = params.vergence_error_arcmin(self.vergence, stim.vergence.0) <= params.panum_arcmin;
    }

    pub fn min_abs_defocus(&self) -> f64 {
        self.defocus_left.abs().min(self.defocus_right.abs())
    }
}

/// The eye whose image is sharper; ties go to the sighting eye.
pub fn dominant_eye(left_defocus: f64, right_defocus: f64, sighting: Eye) -> Eye {
    let (l, r) = (left_defocus.abs(), right_defocus.abs());
    if l < r {
        Eye::Left
    } else if r < l {
        Eye::Right
    } else {
        sighting
    }
}

fn dead_zone(x: f64, dz: f64) -> f64 {
    let m = x.abs() - dz;
    if m <= 0.0 {
        0.0
    } else if x < 0.0 {
        -m
    } else {
        m
    }
}

/// One forward-Euler step of the cross-coupled dynamics.
pub fn step(params: &ObserverParams, state: &ObserverState, stim: &Stimulus, dt: f64) -> Result<ObserverState> {
    if !(dt > 0.0 && dt <= 0.05) {
        return Err(Error::Domain { what: "time step (s)", value: dt });
    }
    let (a, v, w) = (state.accommodation, state.vergence, state.adaptation);
    let dl = stim.demand_left.0 - a;
    let dr = stim.demand_right.0 - a;
    let demand = match dominant_eye(dl, dr, params.sighting_eye) {
        Eye::Left => stim.demand_left.0,
        Eye::Right => stim.demand_right.0,
    };
    let blur = dead_zone(demand - a, params.depth_of_focus_d);
    let disp = stim.vergence.0 - v;
    let da = (params.gain_accommodation * blur + params.cross_vergence_to_accommodation * disp
        - params.leak_accommodation * (a - v + w))
        / params.tau_accommodation_s;
    let dv = (params.gain_vergence * disp + params.cross_accommodation_to_vergence * blur
        - params.leak_vergence * (v - a))
        / params.tau_vergence_s;
    let dw = (params.adaptation_gain * (v - a) - w) / params.adaptation_tau_s;
    let mut next = ObserverState {
        accommodation: a + dt * da,
        vergence: v + dt * dv,
        adaptation: w + dt * dw,
        defocus_left: 0.0,
        defocus_right: 0.0,
        fused: false,
        t_s: state.t_s + dt,
    };
    if !(next.accommodation.abs() <= DIVERGENCE_LIMIT_D && next.vergence.abs() <= DIVERGENCE_LIMIT_D) {
        return Err(Error::Unstable {
            accommodation: next.accommodation,
            vergence: next.vergence,
            params: params.describe(),
        });
    }
    next.refresh(params, stim);
    Ok(next)
}

/// Integrates from `initial` for `duration_s`, calling `stim_at(t)` for the
/// stimulus at the start of each step. Returns every state including the
/// initial one.
pub fn simulate<F>(params: &ObserverParams, initial: ObserverState, mut stim_at: F, dt: f64, duration_s: f64) -> Result<Vec<ObserverState>>
where
    F: FnMut(f64) -> Result<Stimulus>,
{
    let n = math::round(duration_s / dt) as usize;
    let mut out = Vec::with_capacity(n + 1);
    let mut s = initial;
    out.push(s);
    for _ in 0..n {
        let stim = stim_at(s.t_s)?;
        s = step(params, &s, &stim, dt)?;
        out.push(s);
    }
    Ok(out)
}

/// Blur circle (arcmin) of the sharper eye.
pub fn effective_blur_arcmin(params: &ObserverParams, state: &ObserverState) -> Result<f64> {
    blur_circle_arcmin(Diopters(state.min_abs_defocus()), params.pupil_mm)
}

/// Disparity discrimination spread for the current state.
pub fn sigma_effective(params: &ObserverParams, state: &ObserverState) -> Result<f64> {
    let blur = effective_blur_arcmin(params, state)?;
    Ok(params.sigma0_arcmin
        + params.k_blur * blur
        + params.k_suppression * (state.defocus_left - state.defocus_right).abs())
}

const MAFC_STEP: f64 = 0.05;
const MAFC_HALF_WIDTH: f64 = 9.0;

/// Proportion correct of an ideal m-alternative observer with sensitivity
/// `dprime`, rescaled to run from 0 at `dprime = 0` to 1 at saturation.
pub fn detection_fraction(dprime: f64, n_alternatives: u32) -> f64 {
    let d = dprime.max(0.0);
    if n_alternatives == 2 {
        return 2.0 * math::norm_cdf(d / core::f64::consts::SQRT_2) - 1.0;
    }
    if d == 0.0 {
        return 0.0;
    }
    let m = n_alternatives as i32 - 1;
    let n = (2.0 * MAFC_HALF_WIDTH / MAFC_STEP) as i64;
    let (mut at_d, mut total) = (0.0, 0.0);
    for i in 0..=n {
        let s = -MAFC_HALF_WIDTH + i as f64 * MAFC_STEP;
        let w = math::norm_pdf(s);
        total += w;
        at_d += w * math::powi(math::norm_cdf(s + d), m);
    }
    // Unbiased guessing among m + 1 alternatives.
    let p_0 = 1.0 / n_alternatives as f64;
    ((at_d / total - p_0) / (1.0 - p_0)).clamp(0.0, 1.0)
}

/// Probability of a correct forced-choice response for a target carrying
/// `target_arcmin` of relative disparity.
pub fn p_correct_disparity(params: &ObserverParams, target_arcmin: f64, state: &ObserverState, n_alternatives: u32) -> Result<f64> {
    if n_alternatives != 2 && n_alternatives != 4 {
        return Err(Error::Domain { what: "number of alternatives", value: n_alternatives as f64 });
    }
    let gamma = 1.0 / n_alternatives as f64;
    let sigma = sigma_effective(params, state)?;
    let f = detection_fraction(target_arcmin.abs() / sigma, n_alternatives);
    Ok(gamma + (1.0 - gamma - params.lapse) * f)
}

/// Outcome of a fusion simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FuseTime {
    Fused(f64),
    Unfused,
}

impl FuseTime {
    pub fn seconds(self) -> Option<f64> {
        match self {
            FuseTime::Fused(t) => Some(t),
            FuseTime::Unfused => None,
        }
    }
}

/// Time until vergence is within Panum's limit and the sharper eye's blur is
/// within the acuity criterion, both held for 100 ms. The observer starts
/// settled on `start`; at t = 0 the stimuli switch to `target`.
pub fn time_to_fuse(params: &ObserverParams, start: &Stimulus, target: &Stimulus, dt: f64) -> Result<FuseTime> {
    let mut s = ObserverState::fixating(params, start);
    settle(params, &mut s, start, dt)?;
    s.refresh(params, target);
    s.t_s = 0.0;
    let hold = math::round(FUSE_HOLD_S / dt) as usize;
    let cap = math::round(FUSE_CAP_S / dt) as usize;
    let mut run = 0usize;
    for k in 0..=cap {
        let sharp = effective_blur_arcmin(params, &s)? <= params.acuity_arcmin;
        if s.fused && sharp {
            run += 1;
            if run > hold {
                return Ok(FuseTime::Fused((k - hold) as f64 * dt));
            }
        } else {
            run = 0;
        }
        s = step(params, &s, target, dt)?;
    }
    Ok(FuseTime::Unfused)
}

/// Lets the observer reach its steady state on a constant stimulus (two
/// seconds, as with the fixation cross before every trial, then more if the
/// state is still moving).
pub fn settle(params: &ObserverParams, s: &mut ObserverState, stim: &Stimulus, dt: f64) -> Result<()> {
    let n = math::round(2.0 / dt) as usize;
    for _ in 0..n {
        *s = step(params, s, stim, dt)?;
    }
    for _ in 0..200 {
        let prev = *s;
        for _ in 0..n {
            *s = step(params, s, stim, dt)?;
        }
        let moved = (prev.accommodation - s.accommodation).abs()
            + (prev.vergence - s.vergence).abs()
            + (prev.adaptation - s.adaptation).abs();
        if moved < 1e-9 {
            break;
        }
    }
    s.t_s = 0.0;
    Ok(())
}

/// Probability of judging a stimulus shown for `duration_s` correctly when
/// the observer needs `fuse` to fuse it (two alternatives).
pub fn p_correct_duration(params: &ObserverParams, duration_s: f64, fuse: FuseTime) -> f64 {
    let gamma = 0.5;
    match fuse {
        FuseTime::Unfused => gamma,
        FuseTime::Fused(t) if t <= 0.0 => 1.0 - params.lapse,
        FuseTime::Fused(t) => {
            gamma + (1.0 - gamma - params.lapse) * math::norm_cdf(math::ln(duration_s / t) / params.fuse_cv)
        }
    }
}

/// A forced-choice decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub response: u32,
    pub correct: bool,
    pub rt_s: f64,
    pub timed_out: bool,
}

/// Samples a response. The response time is lognormal; past `timeout_s` the
/// response is replaced by a uniformly random alternative.
pub fn decide<R: Rng + ?Sized>(params: &ObserverParams, p_correct: f64, answer: u32, n_alternatives: u32, timeout_s: f64, rng: &mut R) -> Decision {
    let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
    let rt_s = params.rt_median_s * math::exp(params.rt_log_sd * z);
    let u: f64 = rng.random();
    let other: u32 = rng.random_range(0..n_alternatives - 1);
    let random_pick: u32 = rng.random_range(0..n_alternatives);
    if rt_s > timeout_s {
        return Decision { response: random_pick, correct: random_pick == answer, rt_s, timed_out: true };
    }
    let response = if u < p_correct {
        answer
    } else if other >= answer {
        other + 1
    } else {
        other
    };
    Decision { response, correct: response == answer, rt_s, timed_out: false }
}

/// Multiplies the subject-varying parameters by independent lognormal
/// factors with log-sd `spread`.
pub fn jitter_subject(base: &ObserverParams, seed: u64, subject: u64, spread: f64) -> ObserverParams {
    let mut rng = crate::rng::rng_for(seed, &[0x5B, subject]);
    let mut f = |x: f64| {
        let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
        x * math::exp(spread * z)
    };
    let mut p = base.clone();
    p.sigma0_arcmin = f(p.sigma0_arcmin);
    p.k_blur = f(p.k_blur);
    p.tau_accommodation_s = f(p.tau_accommodation_s);
    p.tau_vergence_s = f(p.tau_vergence_s);
    p.acuity_arcmin = f(p.acuity_arcmin);
    p.rt_median_s = f(p.rt_median_s);
    p.decision_seed = crate::rng::derive_seed(seed, &[0xDEC, subject]);
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear() -> ObserverParams {
        ObserverParams { depth_of_focus_d: 0.0, ..ObserverParams::default() }
    }

    #[test]
    fn fixed_point() {
        let p = ObserverParams::default();
        let stim = Stimulus::concordant(Diopters(1.3));
        let s = ObserverState::fixating(&p, &stim);
        let n = step(&p, &s, &stim, 0.01).unwrap();
        assert_eq!(n.accommodation, s.accommodation);
        assert_eq!(n.vergence, s.vergence);
    }

    #[test]
    fn dominance() {
        assert_eq!(dominant_eye(0.2, 0.9, Eye::Right), Eye::Left);
        assert_eq!(dominant_eye(0.5, 0.5, Eye::Right), Eye::Right);
        assert_eq!(dominant_eye(0.5, -0.5, Eye::Left), Eye::Left);
        // Monovision at a 3 D stimulus: demands (2, 3), A = 3.
        assert_eq!(dominant_eye(2.0 - 3.0, 3.0 - 3.0, Eye::Left), Eye::Right);
    }

    #[test]
    fn zero_disparity_is_chance() {
        let p = ObserverParams { lapse: 0.0, ..ObserverParams::default() };
        let s = ObserverState::fixating(&p, &Stimulus::concordant(Diopters(0.5)));
        assert_eq!(p_correct_disparity(&p, 0.0, &s, 4).unwrap(), 0.25);
        assert_eq!(p_correct_disparity(&p, 0.0, &s, 2).unwrap(), 0.5);
        assert!((p_correct_disparity(&p, 1e6, &s, 4).unwrap() - 1.0).abs() < 1e-12);
        assert!(p_correct_disparity(&p, 1.0, &s, 3).is_err());
    }

    #[test]
    fn four_afc_matches_quadrature() {
        // Reference: simple midpoint rule on a much finer grid.
        for &d in &[0.3, 1.0, 2.5] {
            let h = 1e-3;
            let (mut pd, mut p0) = (0.0, 0.0);
            let mut t = -12.0;
            while t < 12.0 {
                let m = t + h / 2.0;
                pd += h * math::norm_pdf(m - d) * math::powi(math::norm_cdf(m), 3);
                p0 += h * math::norm_pdf(m) * math::powi(math::norm_cdf(m), 3);
                t += h;
            }
            let want = (pd - p0) / (1.0 - p0);
            assert!((detection_fraction(d, 4) - want).abs() < 1e-6, "{d}");
        }
    }

    #[test]
    fn eigenvalues_of_defaults_are_stable() {
        let p = ObserverParams::default();
        for r in p.eigenvalue_real_parts() {
            assert!(r < 0.0);
        }
    }

    #[test]
    fn zero_jump_fuses_immediately() {
        let p = ObserverParams::default();
        let stim = Stimulus { vergence: Diopters(0.565), demand_left: Diopters(0.565), demand_right: Diopters(0.565) };
        assert_eq!(time_to_fuse(&p, &stim, &stim, DEFAULT_DT_S).unwrap(), FuseTime::Fused(0.0));
    }

    #[test]
    fn divergence_names_parameters() {
        let p = linear();
        let s = ObserverState::at(&p, 19.99, 19.99, &Stimulus::concordant(Diopters(100.0)));
        match step(&p, &s, &Stimulus::concordant(Diopters(100.0)), 0.05) {
            Err(Error::Unstable { params, .. }) => assert!(params.contains("tau_a")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn timeout_gives_random_response() {
        let p = ObserverParams { rt_median_s: 100.0, ..ObserverParams::default() };
        let mut rng = crate::rng::rng_for(3, &[]);
        let d = decide(&p, 1.0, 2, 4, 4.0, &mut rng);
        assert!(d.timed_out);
        assert!(d.response < 4);
    }
}
