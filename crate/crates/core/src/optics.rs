//! Diopter arithmetic, tunable-lens calibration and geometric defocus blur.

use alloc::vec::Vec;
use core::ops::{Add, Neg, Sub};

use crate::error::{Error, Result};
use crate::math::ARCMIN_PER_RAD;

/// Reciprocal meters. Used for every distance-like quantity: screen vergence,
/// fixation vergence, accommodative demand, lens power and conflict size.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Diopters(pub f64);

impl Diopters {
    pub fn from_meters(d: f64) -> Result<Self> {
        diopters_from_meters(d)
    }

    /// Distance in meters. Zero diopters maps to infinity.
    pub fn to_meters(self) -> f64 {
        1.0 / self.0
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn abs(self) -> Self {
        Diopters(self.0.abs())
    }
}

impl Add for Diopters {
    type Output = Diopters;
    fn add(self, rhs: Self) -> Self {
        Diopters(self.0 + rhs.0)
    }
}

impl Sub for Diopters {
    type Output = Diopters;
    fn sub(self, rhs: Self) -> Self {
        Diopters(self.0 - rhs.0)
    }
}

impl Neg for Diopters {
    type Output = Diopters;
    fn neg(self) -> Self {
        Diopters(-self.0)
    }
}

pub fn diopters_from_meters(d: f64) -> Result<Diopters> {
    if !d.is_finite() || d <= 0.0 {
        return Err(Error::Domain { what: "distance (m)", value: d });
    }
    Ok(Diopters(1.0 / d))
}

/// Absolute vergence of a point `offset` diopters nearer than the screen
/// (negative offsets lie behind it).
pub fn absolute_from_relative(screen: Diopters, offset: Diopters) -> Result<Diopters> {
    let v = screen.0 + offset.0;
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::Domain { what: "absolute vergence (D)", value: v });
    }
    Ok(Diopters(v))
}

/// Angular diameter of the geometric blur circle for an eye defocused by
/// `defocus` with a pupil of `pupil_mm`.
pub fn blur_circle_arcmin(defocus: Diopters, pupil_mm: f64) -> Result<f64> {
    if !pupil_mm.is_finite() || pupil_mm <= 0.0 {
        return Err(Error::Domain { what: "pupil diameter (mm)", value: pupil_mm });
    }
    Ok(defocus.0.abs() * pupil_mm / 1000.0 * ARCMIN_PER_RAD)
}

pub const MAX_DRIVE_CURRENT_MA: f64 = 300.0;
pub const DEFAULT_SETTLE_TIME_MS: f64 = 5.0;

/// Range of accommodative demands a lens setup can produce, `near >= far`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandWindow {
    pub near: Diopters,
    pub far: Diopters,
}

impl DemandWindow {
    /// 0.48 m to 3.2 m, the focal range used on the dynamic-lens bench.
    pub fn hardware() -> Self {
        DemandWindow { near: Diopters(1.0 / 0.48), far: Diopters(1.0 / 3.2) }
    }

    pub fn contains(&self, d: Diopters) -> bool {
        let eps = 1e-12 * self.near.0.max(1.0);
        d.0 <= self.near.0 + eps && d.0 >= self.far.0 - eps
    }

    pub fn clamp(&self, d: Diopters) -> (Diopters, bool) {
        let c = Diopters(d.0.clamp(self.far.0, self.near.0));
        (c, c != d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSample {
    pub current_ma: f64,
    pub distance_m: f64,
}

/// Which coordinate the calibration line is fit in. The lens vendor's curve is
/// close to linear in power, the bench measurement is in meters; both are
/// supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitSpace {
    #[default]
    Meters,
    Diopters,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensCommand {
    pub current_ma: f64,
    pub settle_time_ms: f64,
}

/// Straight-line map from drive current to accommodative distance as seen
/// through the lens.
#[derive(Debug, Clone, PartialEq)]
pub struct LensCalibration {
    pub samples: Vec<CalibrationSample>,
    pub space: FitSpace,
    pub slope: f64,
    pub intercept: f64,
    /// Observed minus fitted, in the fit space.
    pub residuals: Vec<f64>,
    pub valid_current_range: (f64, f64),
    pub settle_time_ms: f64,
}

fn sample_coordinate(space: FitSpace, distance_m: f64) -> f64 {
    match space {
        FitSpace::Meters => distance_m,
        FitSpace::Diopters => 1.0 / distance_m,
    }
}

/// Ordinary least squares of distance (or diopters) against current. The valid
/// current range defaults to the hull of the sampled currents.
pub fn fit_calibration(samples: &[CalibrationSample], space: FitSpace) -> Result<LensCalibration> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: samples.len() });
    }
    for s in samples {
        if !(0.0..=MAX_DRIVE_CURRENT_MA).contains(&s.current_ma) || !s.current_ma.is_finite() {
            return Err(Error::Domain { what: "drive current (mA)", value: s.current_ma });
        }
        if !s.distance_m.is_finite() || s.distance_m <= 0.0 {
            return Err(Error::Domain { what: "calibration distance (m)", value: s.distance_m });
        }
    }
    let n = samples.len() as f64;
    let mean_x = samples.iter().map(|s| s.current_ma).sum::<f64>() / n;
    let mean_y = samples.iter().map(|s| sample_coordinate(space, s.distance_m)).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for s in samples {
        let dx = s.current_ma - mean_x;
        sxx += dx * dx;
        sxy += dx * (sample_coordinate(space, s.distance_m) - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::SingularFit);
    }
    let slope = sxy / sxx;
    if slope == 0.0 || !slope.is_finite() {
        return Err(Error::NonMonotoneCalibration);
    }
    let intercept = mean_y - slope * mean_x;
    let residuals = samples
        .iter()
        .map(|s| sample_coordinate(space, s.distance_m) - (slope * s.current_ma + intercept))
        .collect();
    let lo = samples.iter().map(|s| s.current_ma).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.current_ma).fold(f64::NEG_INFINITY, f64::max);
    let cal = LensCalibration {
        samples: samples.to_vec(),
        space,
        slope,
        intercept,
        residuals,
        valid_current_range: (lo, hi),
        settle_time_ms: DEFAULT_SETTLE_TIME_MS,
    };
    cal.check_range(lo, hi)?;
    Ok(cal)
}

impl LensCalibration {
    /// Synthetic bench calibration: three samples at 175, 200 and 225 mA on
    /// the line `d = 0.0136 I - 0.88` m, usable over the 0.48-3.2 m window.
    pub fn reference() -> Self {
        let samples: Vec<_> = [175.0, 200.0, 225.0]
            .iter()
            .map(|&i| CalibrationSample { current_ma: i, distance_m: 0.0136 * i - 0.88 })
            .collect();
        let cal = fit_calibration(&samples, FitSpace::Meters).expect("reference samples are valid");
        cal.with_distance_window(0.48, 3.2).expect("window inside drive range")
    }

    fn check_range(&self, lo: f64, hi: f64) -> Result<()> {
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi > MAX_DRIVE_CURRENT_MA || lo > hi {
            return Err(Error::Invalid(alloc::format!(
                "valid current range [{lo}, {hi}] mA must lie inside [0, {MAX_DRIVE_CURRENT_MA}]"
            )));
        }
        for i in [lo, hi] {
            let y = self.fitted(i);
            if !(y.is_finite() && y > 0.0) {
                return Err(Error::Domain { what: "fitted calibration value", value: y });
            }
        }
        Ok(())
    }

    pub fn with_valid_current_range(mut self, lo: f64, hi: f64) -> Result<Self> {
        self.check_range(lo, hi)?;
        self.valid_current_range = (lo, hi);
        Ok(self)
    }

    /// Restricts the usable currents to those producing accommodative
    /// distances between `near_m` and `far_m`.
    pub fn with_distance_window(self, near_m: f64, far_m: f64) -> Result<Self> {
        let near = diopters_from_meters(near_m)?;
        let far = diopters_from_meters(far_m)?;
        let a = self.current_for_coordinate(sample_coordinate(self.space, near.to_meters()));
        let b = self.current_for_coordinate(sample_coordinate(self.space, far.to_meters()));
        // Round-off can push an exact drive limit just past it.
        let snap = |v: f64| {
            if (v - MAX_DRIVE_CURRENT_MA).abs() < 1e-9 {
                MAX_DRIVE_CURRENT_MA
            } else if v.abs() < 1e-9 {
                0.0
            } else {
                v
            }
        };
        self.with_valid_current_range(snap(a.min(b)), snap(a.max(b)))
    }

    pub fn with_settle_time(mut self, ms: f64) -> Result<Self> {
        if !(ms.is_finite() && ms >= 0.0) {
            return Err(Error::Domain { what: "settle time (ms)", value: ms });
        }
        self.settle_time_ms = ms;
        Ok(self)
    }

    /// Fitted value (meters or diopters per `space`) at `current_ma`.
    pub fn fitted(&self, current_ma: f64) -> f64 {
        self.slope * current_ma + self.intercept
    }

    fn current_for_coordinate(&self, y: f64) -> f64 {
        (y - self.intercept) / self.slope
    }

    fn coordinate_to_demand(&self, y: f64) -> f64 {
        match self.space {
            FitSpace::Meters => 1.0 / y,
            FitSpace::Diopters => y,
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| f64::max(m, r.abs()))
    }

    /// Accommodative demand produced by `current_ma` according to the line.
    pub fn demand_for_current(&self, current_ma: f64) -> Result<Diopters> {
        let y = self.fitted(current_ma);
        if !(y.is_finite() && y > 0.0) {
            return Err(Error::Domain { what: "fitted calibration value", value: y });
        }
        Ok(Diopters(self.coordinate_to_demand(y)))
    }

    /// Demand limits reachable inside the valid current range.
    pub fn demand_window(&self) -> DemandWindow {
        let (lo, hi) = self.valid_current_range;
        let a = self.coordinate_to_demand(self.fitted(lo));
        let b = self.coordinate_to_demand(self.fitted(hi));
        DemandWindow { near: Diopters(a.max(b)), far: Diopters(a.min(b)) }
    }

    /// Inverts the line: demand to current, refusing demands the valid range
    /// cannot produce.
    pub fn current_for_demand(&self, demand: Diopters) -> Result<LensCommand> {
        let DemandWindow { near, far } = self.demand_window();
        if !demand.0.is_finite() || demand.0 <= 0.0 {
            return Err(Error::Domain { what: "accommodative demand (D)", value: demand.0 });
        }
        let eps = 1e-12 * near.0.max(1.0);
        if demand.0 > near.0 + eps || demand.0 < far.0 - eps {
            return Err(Error::OutOfRange { requested: demand.0, near: near.0, far: far.0 });
        }
        let y = sample_coordinate(self.space, 1.0 / demand.0);
        let (lo, hi) = self.valid_current_range;
        let current = self.current_for_coordinate(y).clamp(lo, hi);
        Ok(LensCommand { current_ma: current, settle_time_ms: self.settle_time_ms })
    }

    /// Like [`current_for_demand`](Self::current_for_demand) but clamps to the
    /// nearest reachable demand. Returns the realized demand and whether
    /// clamping occurred.
    pub fn clamped_command(&self, demand: Diopters) -> Result<(LensCommand, Diopters, bool)> {
        let (target, clamped) = self.demand_window().clamp(demand);
        let cmd = self.current_for_demand(target)?;
        Ok((cmd, target, clamped))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn exact_line() -> Vec<CalibrationSample> {
        [175.0, 200.0, 225.0]
            .iter()
            .map(|&i| CalibrationSample { current_ma: i, distance_m: 0.01 * i - 1.0 })
            .collect()
    }

    #[test]
    fn meters_to_diopters() {
        assert_eq!(diopters_from_meters(1.0).unwrap(), Diopters(1.0));
        let s = diopters_from_meters(1.77).unwrap();
        assert!((s.0 - 0.5650).abs() < 5e-5);
        let near = diopters_from_meters(0.48).unwrap();
        assert!((near.0 - 2.0833).abs() < 1e-4);
        assert!(diopters_from_meters(0.0).is_err());
        assert!(diopters_from_meters(-1.0).is_err());
        assert!(diopters_from_meters(f64::NAN).is_err());
    }

    #[test]
    fn relative_offsets() {
        let s = diopters_from_meters(1.77).unwrap();
        let near = absolute_from_relative(s, Diopters(1.5)).unwrap();
        assert!((near.0 - 2.065).abs() < 1e-3);
        assert!((near.to_meters() - 0.484).abs() < 1e-3);
        let far = absolute_from_relative(s, Diopters(-0.25)).unwrap();
        assert!((far.0 - 0.315).abs() < 1e-3);
        assert!((far.to_meters() - 3.17).abs() < 0.01);
        assert_eq!(absolute_from_relative(s, Diopters(0.0)).unwrap(), s);
        assert!(absolute_from_relative(s, Diopters(-0.6)).is_err());
    }

    #[test]
    fn exact_line_fit() {
        let cal = fit_calibration(&exact_line(), FitSpace::Meters).unwrap();
        assert!((cal.slope - 0.01).abs() < 1e-12);
        assert!((cal.intercept + 1.0).abs() < 1e-10);
        assert!(cal.max_residual() < 1e-12);
        let cmd = cal.current_for_demand(Diopters(1.0)).unwrap();
        assert!((cmd.current_ma - 200.0).abs() < 1e-9);
        assert_eq!(cmd.settle_time_ms, DEFAULT_SETTLE_TIME_MS);
    }

    #[test]
    fn out_of_range_demand_names_window() {
        let cal = fit_calibration(&exact_line(), FitSpace::Meters).unwrap();
        match cal.current_for_demand(Diopters(2.5)) {
            Err(Error::OutOfRange { near, far, .. }) => {
                assert!((near - 1.0 / 0.75).abs() < 1e-9);
                assert!((far - 0.8).abs() < 1e-9);
            }
            other => panic!("expected out of range, got {other:?}"),
        }
    }

    #[test]
    fn fit_errors() {
        let one = [CalibrationSample { current_ma: 200.0, distance_m: 1.0 }];
        assert!(matches!(
            fit_calibration(&one, FitSpace::Meters),
            Err(Error::InsufficientData { .. })
        ));
        let same = [
            CalibrationSample { current_ma: 200.0, distance_m: 1.0 },
            CalibrationSample { current_ma: 200.0, distance_m: 1.1 },
        ];
        assert_eq!(fit_calibration(&same, FitSpace::Meters), Err(Error::SingularFit));
        let flat = [
            CalibrationSample { current_ma: 100.0, distance_m: 1.0 },
            CalibrationSample { current_ma: 200.0, distance_m: 1.0 },
        ];
        assert_eq!(fit_calibration(&flat, FitSpace::Meters), Err(Error::NonMonotoneCalibration));
        let hot = [
            CalibrationSample { current_ma: 100.0, distance_m: 1.0 },
            CalibrationSample { current_ma: 400.0, distance_m: 2.0 },
        ];
        assert!(fit_calibration(&hot, FitSpace::Meters).is_err());
    }

    #[test]
    fn sample_demand_maps_to_its_current() {
        let samples = vec![
            CalibrationSample { current_ma: 175.0, distance_m: 0.752 },
            CalibrationSample { current_ma: 200.0, distance_m: 0.995 },
            CalibrationSample { current_ma: 225.0, distance_m: 1.253 },
        ];
        let cal = fit_calibration(&samples, FitSpace::Meters).unwrap();
        let s = samples[1];
        let cmd = cal.current_for_demand(Diopters(1.0 / s.distance_m)).unwrap();
        let tol = cal.max_residual() / cal.slope.abs();
        assert!((cmd.current_ma - s.current_ma).abs() <= tol + 1e-9);
    }

    #[test]
    fn diopter_space_fit() {
        let samples: Vec<_> = [150.0, 200.0, 250.0]
            .iter()
            .map(|&i| CalibrationSample { current_ma: i, distance_m: 1.0 / (3.0 - 0.01 * i) })
            .collect();
        let cal = fit_calibration(&samples, FitSpace::Diopters).unwrap();
        assert!((cal.slope + 0.01).abs() < 1e-12);
        let d = cal.demand_for_current(200.0).unwrap();
        assert!((d.0 - 1.0).abs() < 1e-12);
        let back = cal.current_for_demand(d).unwrap();
        assert!((back.current_ma - 200.0).abs() < 1e-9);
    }

    #[test]
    fn distance_window() {
        // d = 0.0136 I - 0.88 reaches 0.48 m at 100 mA and 3.2 m at 300 mA.
        let samples: Vec<_> = [175.0, 200.0, 225.0]
            .iter()
            .map(|&i| CalibrationSample { current_ma: i, distance_m: 0.0136 * i - 0.88 })
            .collect();
        let cal = fit_calibration(&samples, FitSpace::Meters)
            .unwrap()
            .with_distance_window(0.48, 3.2)
            .unwrap();
        let (lo, hi) = cal.valid_current_range;
        assert!((lo - 100.0).abs() < 1e-9 && (hi - 300.0).abs() < 1e-9);
        let w = cal.demand_window();
        assert!((w.near.to_meters() - 0.48).abs() < 1e-12);
        assert!((w.far.to_meters() - 3.2).abs() < 1e-12);
        let (_, realized, clamped) = cal.clamped_command(Diopters(5.0)).unwrap();
        assert!(clamped);
        assert_eq!(realized, w.near);
        let reference = LensCalibration::reference();
        let (rw, hw) = (reference.demand_window(), DemandWindow::hardware());
        assert!((rw.near.0 - hw.near.0).abs() < 1e-12 && (rw.far.0 - hw.far.0).abs() < 1e-12);
    }

    #[test]
    fn blur_circle() {
        assert_eq!(blur_circle_arcmin(Diopters(0.0), 4.0).unwrap(), 0.0);
        let b = blur_circle_arcmin(Diopters(1.0), 4.0).unwrap();
        assert!((b - 13.7509870831).abs() < 1e-8);
        assert_eq!(blur_circle_arcmin(Diopters(-1.0), 4.0).unwrap(), b);
        assert!(blur_circle_arcmin(Diopters(1.0), 0.0).is_err());
    }
}
