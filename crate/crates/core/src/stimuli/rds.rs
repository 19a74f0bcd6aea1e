//! Random-dot stereograms carrying a sinusoidal depth corrugation.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{Canvas, Element, Shape, StereoPair, StimulusKind, StimulusMeta};
use crate::error::{Error, Result};
use crate::geometry::DisplayGeometry;
use crate::math;

/// Tilt of the corrugation ridges from vertical: `UpLeft` is +20 deg,
/// `UpRight` is -20 deg.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrugationOrientation {
    UpLeft,
    UpRight,
}

impl CorrugationOrientation {
    pub fn degrees(self) -> f64 {
        match self {
            CorrugationOrientation::UpLeft => 20.0,
            CorrugationOrientation::UpRight => -20.0,
        }
    }

    pub fn from_degrees(deg: f64) -> Result<Self> {
        if deg == 20.0 {
            Ok(CorrugationOrientation::UpLeft)
        } else if deg == -20.0 {
            Ok(CorrugationOrientation::UpRight)
        } else {
            Err(Error::Invalid(format!("corrugation orientation must be +20 or -20 deg, got {deg}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdsParams {
    pub orientation: CorrugationOrientation,
    /// Side of the square dot field.
    pub field_deg: f64,
    pub spatial_frequency_cpd: f64,
    pub peak_disparity_arcmin: f64,
    /// Disparity added to every dot, placing the whole field off the screen.
    pub pedestal_disparity_arcmin: f64,
    pub dots_per_deg2: f64,
    pub dot_size_arcmin: f64,
    pub seed: u64,
    /// Negate dot x positions, so opposite orientations with the same seed
    /// produce mirror-image stereograms.
    pub mirror_positions: bool,
    pub background: u8,
}

impl Default for RdsParams {
    fn default() -> Self {
        RdsParams {
            orientation: CorrugationOrientation::UpLeft,
            field_deg: 2.2,
            spatial_frequency_cpd: 1.0,
            peak_disparity_arcmin: 4.0,
            pedestal_disparity_arcmin: 0.0,
            dots_per_deg2: 25.0,
            dot_size_arcmin: 3.0,
            seed: 0,
            mirror_positions: false,
            background: 128,
        }
    }
}

impl RdsParams {
    pub fn dot_count(&self) -> usize {
        math::round(self.dots_per_deg2 * self.field_deg * self.field_deg) as usize
    }

    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("field size (deg)", self.field_deg),
            ("spatial frequency (cyc/deg)", self.spatial_frequency_cpd),
            ("dot density (dots/deg^2)", self.dots_per_deg2),
            ("dot size (arcmin)", self.dot_size_arcmin),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain { what, value: v });
            }
        }
        if !(self.peak_disparity_arcmin.is_finite() && self.peak_disparity_arcmin >= 0.0) {
            return Err(Error::Domain { what: "peak disparity (arcmin)", value: self.peak_disparity_arcmin });
        }
        if !self.pedestal_disparity_arcmin.is_finite() {
            return Err(Error::Domain { what: "pedestal disparity (arcmin)", value: self.pedestal_disparity_arcmin });
        }
        if self.dot_count() < 100 {
            return Err(Error::Precondition(format!(
                "dot density gives {} dots in the field, need at least 100",
                self.dot_count()
            )));
        }
        Ok(())
    }

    /// Mean spacing between dot centers.
    pub fn dot_spacing_arcmin(&self) -> f64 {
        60.0 / math::sqrt(self.dots_per_deg2)
    }
}

/// Disparity of a dot at `(x, y)` degrees from the field center (y down).
fn corrugation_disparity(p: &RdsParams, x_deg: f64, y_deg: f64) -> f64 {
    let theta = p.orientation.degrees().to_radians();
    let c = math::cos(theta.abs());
    let s = math::sin_odd(theta);
    // Ridges run along (-sin, cos) in y-up coordinates; u is the coordinate
    // across them.
    let u = x_deg * c + (-y_deg) * s;
    p.peak_disparity_arcmin * math::sin_odd(2.0 * core::f64::consts::PI * p.spatial_frequency_cpd * u)
}

pub fn render_rds(params: &RdsParams, geom: &DisplayGeometry) -> Result<StereoPair> {
    params.validate()?;
    let sub = geom.pixel_subtense_arcmin();
    let px_per_deg = 60.0 / sub;
    let field_px = params.field_deg * px_per_deg;
    let dot_px = params.dot_size_arcmin / sub;
    let max_shift = (params.pedestal_disparity_arcmin.abs() + params.peak_disparity_arcmin) / sub / 2.0;
    let side = 2 * (math::ceil((field_px + dot_px) / 2.0 + max_shift) as u32 + 2);

    let mut r = crate::rng::rng_for(params.seed, &[0x0D07]);
    let n = params.dot_count();
    let mut elements = Vec::with_capacity(n);
    let mut polarity = Vec::with_capacity(n);
    let mut sum = 0.0;
    for i in 0..n {
        let mut x = (r.random::<f64>() - 0.5) * params.field_deg;
        let y = (r.random::<f64>() - 0.5) * params.field_deg;
        let white = r.random::<bool>();
        if params.mirror_positions {
            x = -x;
        }
        let d = params.pedestal_disparity_arcmin + corrugation_disparity(params, x, y);
        sum += d;
        elements.push(Element {
            label: format!("dot{i}"),
            x_px: x * px_per_deg,
            y_px: y * px_per_deg,
            disparity_arcmin: d,
            visible: true,
        });
        polarity.push(white);
    }

    let render_eye = |sign: f64| {
        let mut c = Canvas::new(side, side, params.background as f64);
        for (e, &white) in elements.iter().zip(&polarity) {
            let cx = e.x_px + sign * (e.disparity_arcmin / sub / 2.0);
            let h = dot_px / 2.0;
            c.paint(
                &Shape::Rect { x0: cx - h, x1: cx + h, y0: e.y_px - h, y1: e.y_px + h },
                if white { 255.0 } else { 0.0 },
            );
        }
        c.to_gray()
    };
    let left = render_eye(1.0);
    let right = render_eye(-1.0);

    let mut warnings: Vec<String> = Vec::new();
    if params.peak_disparity_arcmin > params.dot_spacing_arcmin() {
        warnings.push(format!(
            "peak disparity {:.3} arcmin exceeds mean dot spacing {:.3} arcmin; matches may be ambiguous",
            params.peak_disparity_arcmin,
            params.dot_spacing_arcmin()
        ));
    }
    let p = params;
    let kv = |k: &str, v: String| (k.to_string(), v);
    let meta = StimulusMeta {
        kind: StimulusKind::RandomDot,
        seed: p.seed,
        time_s: 0.0,
        pixel_subtense_arcmin: sub,
        elements,
        params: vec![
            kv("orientation_deg", format!("{}", p.orientation.degrees())),
            kv("field_deg", format!("{}", p.field_deg)),
            kv("spatial_frequency_cpd", format!("{}", p.spatial_frequency_cpd)),
            kv("peak_disparity_arcmin", format!("{}", p.peak_disparity_arcmin)),
            kv("pedestal_disparity_arcmin", format!("{}", p.pedestal_disparity_arcmin)),
            kv("dots_per_deg2", format!("{}", p.dots_per_deg2)),
            kv("dot_size_arcmin", format!("{}", p.dot_size_arcmin)),
            kv("dot_count", format!("{n}")),
            kv("mirror_positions", format!("{}", p.mirror_positions)),
            kv("mean_disparity_arcmin", format!("{}", sum / n as f64)),
        ],
        warnings,
    };
    Ok(StereoPair { left, right, meta })
}
