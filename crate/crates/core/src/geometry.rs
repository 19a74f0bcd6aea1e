//! Binocular viewing geometry for a flat screen straight ahead of the viewer.
//!
//! Disparities are angles in arcmin, crossed (nearer than the screen)
//! positive, measured as the difference between the vergence angle to the
//! target and the vergence angle to the screen.

use crate::error::{Error, Result};
use crate::math::{self, ARCMIN_PER_RAD, DEG_PER_RAD};
use crate::optics::Diopters;

pub const DEFAULT_IPD_MM: f64 = 62.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplayGeometry {
    pub screen_distance_m: f64,
    pub pixel_pitch_mm: f64,
    pub width_px: u32,
    pub height_px: u32,
    pub ipd_mm: f64,
}

/// Pixel pitch of a panel with square pixels given its diagonal.
pub fn pitch_from_diagonal(diagonal_in: f64, width_px: u32, height_px: u32) -> f64 {
    let w = width_px as f64;
    let h = height_px as f64;
    let width_mm = diagonal_in * 25.4 * w / math::sqrt(w * w + h * h);
    width_mm / w
}

impl DisplayGeometry {
    pub fn new(
        screen_distance_m: f64,
        pixel_pitch_mm: f64,
        width_px: u32,
        height_px: u32,
        ipd_mm: f64,
    ) -> Result<Self> {
        let g = DisplayGeometry { screen_distance_m, pixel_pitch_mm, width_px, height_px, ipd_mm };
        g.validate()?;
        Ok(g)
    }

    /// 23 inch 1920x1080 panel at 1.77 m.
    pub fn dynamic_lens_rig() -> Self {
        DisplayGeometry {
            screen_distance_m: 1.77,
            pixel_pitch_mm: pitch_from_diagonal(23.0, 1920, 1080),
            width_px: 1920,
            height_px: 1080,
            ipd_mm: DEFAULT_IPD_MM,
        }
    }

    /// Same panel type at 2.0 m.
    pub fn monovision_rig() -> Self {
        DisplayGeometry { screen_distance_m: 2.0, ..Self::dynamic_lens_rig() }
    }

    pub fn with_screen_distance(self, screen_distance_m: f64) -> Result<Self> {
        let g = DisplayGeometry { screen_distance_m, ..self };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |what, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Domain { what, value: v })
            }
        };
        pos("screen distance (m)", self.screen_distance_m)?;
        pos("pixel pitch (mm)", self.pixel_pitch_mm)?;
        pos("interocular distance (mm)", self.ipd_mm)?;
        if self.width_px == 0 || self.height_px == 0 {
            return Err(Error::Invalid("screen resolution must be nonzero".into()));
        }
        if self.pixel_pitch_mm / 1000.0 >= self.screen_distance_m {
            return Err(Error::Invalid("pixel pitch must be far smaller than the viewing distance".into()));
        }
        Ok(())
    }

    pub fn screen_vergence(&self) -> Diopters {
        Diopters(1.0 / self.screen_distance_m)
    }

    pub fn pixel_subtense_arcmin(&self) -> f64 {
        pixel_subtense(self)
    }

    pub fn arcmin_to_px(&self, arcmin: f64) -> f64 {
        arcmin / pixel_subtense(self)
    }
}

/// Angle one pixel subtends at the screen distance.
pub fn pixel_subtense(geom: &DisplayGeometry) -> f64 {
    2.0 * math::atan(geom.pixel_pitch_mm / 1000.0 / (2.0 * geom.screen_distance_m)) * ARCMIN_PER_RAD
}

fn vergence_rad(ipd_mm: f64, distance_m: f64) -> Result<f64> {
    if distance_m.is_nan() || distance_m <= 0.0 {
        return Err(Error::Domain { what: "fixation distance (m)", value: distance_m });
    }
    Ok(2.0 * math::atan(ipd_mm / 1000.0 / (2.0 * distance_m)))
}

/// Vergence angle in degrees for eyes `ipd_mm` apart fixating at `distance_m`.
/// Infinite distance gives zero.
pub fn vergence_angle(ipd_mm: f64, distance_m: f64) -> Result<f64> {
    Ok(vergence_rad(ipd_mm, distance_m)? * DEG_PER_RAD)
}

/// On-screen disparity (arcmin, crossed positive) that places a point at
/// `target_distance_m`.
pub fn onscreen_disparity_for_distance(geom: &DisplayGeometry, target_distance_m: f64) -> Result<f64> {
    let target = vergence_rad(geom.ipd_mm, target_distance_m)?;
    let screen = vergence_rad(geom.ipd_mm, geom.screen_distance_m)?;
    Ok((target - screen) * ARCMIN_PER_RAD)
}

/// Inverse of [`onscreen_disparity_for_distance`].
pub fn distance_for_onscreen_disparity(geom: &DisplayGeometry, disparity_arcmin: f64) -> Result<f64> {
    let screen = vergence_rad(geom.ipd_mm, geom.screen_distance_m)?;
    let total = screen + disparity_arcmin / ARCMIN_PER_RAD;
    if !(total > 0.0) || !disparity_arcmin.is_finite() {
        return Err(Error::Divergence {
            disparity_arcmin,
            limit_arcmin: -screen * ARCMIN_PER_RAD,
        });
    }
    Ok(geom.ipd_mm / 1000.0 / (2.0 * math::tan(total / 2.0)))
}

/// On-screen disparity of a point with absolute vergence `v`.
pub fn disparity_for_vergence(geom: &DisplayGeometry, v: Diopters) -> Result<f64> {
    if !(v.0 > 0.0) {
        return Err(Error::Domain { what: "vergence (D)", value: v.0 });
    }
    onscreen_disparity_for_distance(geom, v.to_meters())
}

/// How a disparity was specified by the caller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DisparitySpec {
    Distance(f64),
    Vergence(Diopters),
    OnScreen(f64),
    /// `relative` arcmin on top of a reference disparity.
    Relative { reference_arcmin: f64, relative_arcmin: f64 },
}

impl DisparitySpec {
    pub fn onscreen_arcmin(&self, geom: &DisplayGeometry) -> Result<f64> {
        match *self {
            DisparitySpec::Distance(m) => onscreen_disparity_for_distance(geom, m),
            DisparitySpec::Vergence(v) => disparity_for_vergence(geom, v),
            DisparitySpec::OnScreen(a) => {
                if a.is_finite() {
                    Ok(a)
                } else {
                    Err(Error::Domain { what: "disparity (arcmin)", value: a })
                }
            }
            DisparitySpec::Relative { reference_arcmin, relative_arcmin } => {
                let a = reference_arcmin + relative_arcmin;
                if a.is_finite() {
                    Ok(a)
                } else {
                    Err(Error::Domain { what: "disparity (arcmin)", value: a })
                }
            }
        }
    }
}
