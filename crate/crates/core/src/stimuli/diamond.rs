//! The disparity-detection stimulus: a white diamond on gray that moves in
//! depth along a triangle wave with end pauses, carrying four dark circles.
//! Periodically the circles appear, and one of them (the target) has extra
//! crossed disparity relative to the diamond.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{Canvas, Element, Shape, StereoPair, StimulusKind, StimulusMeta};
use crate::error::{Error, Result};
use crate::geometry::{self, DisplayGeometry};
use crate::math;
use crate::optics::Diopters;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MotionProfile {
    /// Vergence changes linearly in diopters over time.
    #[default]
    DiopterLinear,
    /// Distance changes linearly in meters over time.
    MeterLinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiamondStimulusParams {
    /// Nearest point of travel, diopters in front of the screen.
    pub near_offset: Diopters,
    /// Farthest point of travel (negative: behind the screen).
    pub far_offset: Diopters,
    pub travel_time_s: f64,
    pub end_pause_s: f64,
    pub profile: MotionProfile,
    pub n_circles: usize,
    pub target_index: usize,
    /// Extra crossed disparity of the target relative to the diamond.
    pub target_disparity_arcmin: f64,
    pub circle_on_s: f64,
    pub circle_off_s: f64,
    pub jitter_seed: u64,
    /// Maximum cyclopean position jitter of each circle.
    pub jitter_arcmin: f64,
    pub diamond_half_diagonal_arcmin: f64,
    pub circle_radius_arcmin: f64,
    pub x_bar_width_arcmin: f64,
    pub background: u8,
    pub diamond_luminance: u8,
    pub circle_luminance: u8,
    pub x_luminance: u8,
    pub canvas_width: u32,
    pub canvas_height: u32,
}

impl Default for DiamondStimulusParams {
    fn default() -> Self {
        DiamondStimulusParams {
            near_offset: Diopters(1.5),
            far_offset: Diopters(-0.25),
            travel_time_s: 5.5,
            end_pause_s: 0.5,
            profile: MotionProfile::DiopterLinear,
            n_circles: 4,
            target_index: 0,
            target_disparity_arcmin: 0.0,
            circle_on_s: 1.0,
            circle_off_s: 2.0,
            jitter_seed: 0,
            jitter_arcmin: 6.0,
            diamond_half_diagonal_arcmin: 90.0,
            circle_radius_arcmin: 9.0,
            x_bar_width_arcmin: 1.5,
            background: 128,
            diamond_luminance: 255,
            circle_luminance: 40,
            x_luminance: 170,
            canvas_width: 1280,
            canvas_height: 720,
        }
    }
}

impl DiamondStimulusParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.travel_time_s > 0.0 && self.end_pause_s > 0.0) {
            return Err(Error::Invalid("travel time and end pauses must be positive".into()));
        }
        if !(self.target_disparity_arcmin >= 0.0) {
            return Err(Error::Invalid("target disparity must be non-negative".into()));
        }
        if !(self.near_offset.0 > self.far_offset.0) {
            return Err(Error::Invalid("near offset must be nearer than far offset".into()));
        }
        if self.n_circles == 0 || self.target_index >= self.n_circles {
            return Err(Error::Invalid("target index must name one of the circles".into()));
        }
        if !(self.circle_on_s > 0.0 && self.circle_off_s >= 0.0) {
            return Err(Error::Invalid("circle timing must be positive".into()));
        }
        if self.canvas_width % 2 != 0 || self.canvas_height % 2 != 0 {
            return Err(Error::Invalid("canvas dimensions must be even".into()));
        }
        Ok(())
    }

    pub fn period_s(&self) -> f64 {
        2.0 * (self.travel_time_s + self.end_pause_s)
    }

    /// Depth offset from the screen at time `t`. The cycle starts with the
    /// far pause, travels to the near end, pauses, and returns.
    pub fn offset_at(&self, screen: Diopters, t: f64) -> Diopters {
        let period = self.period_s();
        let mut ph = t % period;
        if ph < 0.0 {
            ph += period;
        }
        let (p, tr) = (self.end_pause_s, self.travel_time_s);
        // fraction of the way from far to near
        let frac = if ph < p {
            0.0
        } else if ph < p + tr {
            (ph - p) / tr
        } else if ph < 2.0 * p + tr {
            1.0
        } else {
            1.0 - (ph - 2.0 * p - tr) / tr
        };
        match self.profile {
            MotionProfile::DiopterLinear => Diopters(self.far_offset.0 + frac * (self.near_offset.0 - self.far_offset.0)),
            MotionProfile::MeterLinear => {
                let far_m = 1.0 / (screen.0 + self.far_offset.0);
                let near_m = 1.0 / (screen.0 + self.near_offset.0);
                let m = far_m + frac * (near_m - far_m);
                Diopters(1.0 / m - screen.0)
            }
        }
    }

    pub fn circles_visible(&self, t: f64) -> bool {
        let cycle = self.circle_on_s + self.circle_off_s;
        let mut ph = t % cycle;
        if ph < 0.0 {
            ph += cycle;
        }
        ph < self.circle_on_s
    }

    /// Cyclopean circle centers in arcmin relative to the diamond center.
    /// Positions are jittered per seed so the target cannot be found from a
    /// single eye's image.
    pub fn circle_positions_arcmin(&self) -> Vec<(f64, f64)> {
        let mut r = rng::rng_for(self.jitter_seed, &[0xD1A0]);
        let a = self.diamond_half_diagonal_arcmin / 2.0;
        (0..self.n_circles)
            .map(|i| {
                let ang = 2.0 * core::f64::consts::PI * i as f64 / self.n_circles as f64;
                let bx = a * libm::sin(ang);
                let by = -a * math::cos(ang);
                let jx = (r.random::<f64>() * 2.0 - 1.0) * self.jitter_arcmin;
                let jy = (r.random::<f64>() * 2.0 - 1.0) * self.jitter_arcmin;
                (bx + jx, by + jy)
            })
            .collect()
    }
}

fn diamond_polygon(cx: f64, cy: f64, a: f64) -> Shape {
    Shape::Polygon(vec![(cx, cy - a), (cx + a, cy), (cx, cy + a), (cx - a, cy)])
}

fn bar(x0: f64, y0: f64, x1: f64, y1: f64, w: f64) -> Shape {
    let (dx, dy) = (x1 - x0, y1 - y0);
    let len = math::sqrt(dx * dx + dy * dy);
    let (nx, ny) = (-dy / len * w / 2.0, dx / len * w / 2.0);
    Shape::Polygon(vec![(x0 + nx, y0 + ny), (x1 + nx, y1 + ny), (x1 - nx, y1 - ny), (x0 - nx, y0 - ny)])
}

/// Renders the stereo pair at time `t` seconds into the cycle.
pub fn render_diamond_frame(params: &DiamondStimulusParams, geom: &DisplayGeometry, t: f64) -> Result<StereoPair> {
    params.validate()?;
    if !(t >= 0.0) {
        return Err(Error::Domain { what: "frame time (s)", value: t });
    }
    let screen = geom.screen_vergence();
    let offset = params.offset_at(screen, t);
    let vergence = Diopters(screen.0 + offset.0);
    let diamond_disp = geometry::disparity_for_vergence(geom, vergence)?;
    let px_per_arcmin = 1.0 / geom.pixel_subtense_arcmin();
    let a = params.diamond_half_diagonal_arcmin * px_per_arcmin;
    let visible = params.circles_visible(t);

    let mut elements = vec![Element {
        label: "diamond".into(),
        x_px: 0.0,
        y_px: 0.0,
        disparity_arcmin: diamond_disp,
        visible: true,
    }];
    for (i, (x, y)) in params.circle_positions_arcmin().into_iter().enumerate() {
        let extra = if i == params.target_index { params.target_disparity_arcmin } else { 0.0 };
        elements.push(Element {
            label: format!("circle{i}"),
            x_px: x * px_per_arcmin,
            y_px: y * px_per_arcmin,
            disparity_arcmin: diamond_disp + extra,
            visible,
        });
    }

    let r = params.circle_radius_arcmin * px_per_arcmin;
    let bw = params.x_bar_width_arcmin * px_per_arcmin;
    let render_eye = |sign: f64| {
        let mut c = Canvas::new(params.canvas_width, params.canvas_height, params.background as f64);
        let dx = sign * diamond_disp * px_per_arcmin / 2.0;
        c.paint(&diamond_polygon(dx, 0.0, a), params.diamond_luminance as f64);
        let h = a / 2.0;
        c.paint(&bar(dx - h, -h, dx + h, h, bw), params.x_luminance as f64);
        c.paint(&bar(dx - h, h, dx + h, -h, bw), params.x_luminance as f64);
        for e in elements.iter().skip(1).filter(|e| e.visible) {
            let ex = e.x_px + sign * e.disparity_arcmin * px_per_arcmin / 2.0;
            c.paint(&Shape::Circle { cx: ex, cy: e.y_px, r }, params.circle_luminance as f64);
        }
        c.to_gray()
    };
    // Crossed disparity: left-eye image displaced rightward.
    let left = render_eye(1.0);
    let right = render_eye(-1.0);

    let p = params;
    let kv = |k: &str, v: alloc::string::String| (k.to_string(), v);
    let meta = StimulusMeta {
        kind: StimulusKind::Diamond,
        seed: p.jitter_seed,
        time_s: t,
        pixel_subtense_arcmin: geom.pixel_subtense_arcmin(),
        elements,
        params: vec![
            kv("near_offset_D", format!("{}", p.near_offset.0)),
            kv("far_offset_D", format!("{}", p.far_offset.0)),
            kv("travel_time_s", format!("{}", p.travel_time_s)),
            kv("end_pause_s", format!("{}", p.end_pause_s)),
            kv("profile", format!("{:?}", p.profile)),
            kv("depth_offset_D", format!("{}", offset.0)),
            kv("target_index", format!("{}", p.target_index)),
            kv("target_disparity_arcmin", format!("{}", p.target_disparity_arcmin)),
            kv("circle_on_s", format!("{}", p.circle_on_s)),
            kv("circle_off_s", format!("{}", p.circle_off_s)),
            kv("circles_visible", format!("{visible}")),
            kv("jitter_arcmin", format!("{}", p.jitter_arcmin)),
            kv("diamond_half_diagonal_arcmin", format!("{}", p.diamond_half_diagonal_arcmin)),
            kv("circle_radius_arcmin", format!("{}", p.circle_radius_arcmin)),
            kv("luminances", format!("bg={} diamond={} circle={} x={}", p.background, p.diamond_luminance, p.circle_luminance, p.x_luminance)),
        ],
        warnings: Vec::new(),
    };
    Ok(StereoPair { left, right, meta })
}
