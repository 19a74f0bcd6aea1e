//! Per-eye accommodative demand for the fixed-lens, dynamic-lens and
//! monovision viewing conditions, and the vergence-accommodation conflict.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::DisplayGeometry;
use crate::optics::{DemandWindow, Diopters, LensCalibration, LensCommand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Eye {
    Left,
    Right,
}

impl Eye {
    pub fn as_str(self) -> &'static str {
        match self {
            Eye::Left => "L",
            Eye::Right => "R",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViewingCondition {
    /// Conventional stereo display, both eyes focus on the screen.
    FixedLens,
    /// Tunable lenses driven so the focal distance follows fixation. Both
    /// lenses always receive the same target demand.
    DynamicLens { left: LensCalibration, right: LensCalibration },
    /// Fixed spectacle powers per eye. A -1 D lens moves that eye's focal
    /// demand 1 D nearer.
    Monovision { left_power: Diopters, right_power: Diopters },
}

impl ViewingCondition {
    pub fn monovision(left_power: Diopters, right_power: Diopters) -> Result<Self> {
        for p in [left_power, right_power] {
            if !p.0.is_finite() {
                return Err(Error::Domain { what: "spectacle power (D)", value: p.0 });
            }
        }
        Ok(ViewingCondition::Monovision { left_power, right_power })
    }

    pub fn dynamic_reference() -> Self {
        ViewingCondition::DynamicLens {
            left: LensCalibration::reference(),
            right: LensCalibration::reference(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ViewingCondition::FixedLens => "fixed",
            ViewingCondition::DynamicLens { .. } => "dynamic",
            ViewingCondition::Monovision { .. } => "monovision",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EyeDemands {
    pub left: Diopters,
    pub right: Diopters,
    pub commands: Option<[LensCommand; 2]>,
    /// The requested demand was outside a lens window and got clamped.
    pub clamped: bool,
}

impl EyeDemands {
    pub fn get(&self, eye: Eye) -> Diopters {
        match eye {
            Eye::Left => self.left,
            Eye::Right => self.right,
        }
    }
}

/// Focal demand at the eye for a screen at `screen` viewed through a lens of
/// `lens_power`.
pub fn accommodative_demand(screen: Diopters, lens_power: Diopters) -> Result<Diopters> {
    let d = screen.0 - lens_power.0;
    if !d.is_finite() || d <= 0.0 {
        return Err(Error::Domain { what: "accommodative demand (D)", value: d });
    }
    Ok(Diopters(d))
}

/// Lens power that moves the focal demand from the screen to `fixation`.
pub fn dynamic_lens_power(fixation: Diopters, screen: Diopters, window: DemandWindow) -> Result<Diopters> {
    if !window.contains(fixation) {
        return Err(Error::OutOfRange {
            requested: fixation.0,
            near: window.near.0,
            far: window.far.0,
        });
    }
    Ok(Diopters(screen.0 - fixation.0))
}

fn demands(cond: &ViewingCondition, geom: &DisplayGeometry, fixation: Diopters, clamp: bool) -> Result<EyeDemands> {
    if !(fixation.0 > 0.0) || !fixation.0.is_finite() {
        return Err(Error::Domain { what: "fixation vergence (D)", value: fixation.0 });
    }
    let screen = geom.screen_vergence();
    match cond {
        ViewingCondition::FixedLens => Ok(EyeDemands { left: screen, right: screen, commands: None, clamped: false }),
        ViewingCondition::DynamicLens { left, right } => {
            if clamp {
                let (lc, ld, lclamp) = left.clamped_command(fixation)?;
                let (rc, rd, rclamp) = right.clamped_command(fixation)?;
                Ok(EyeDemands { left: ld, right: rd, commands: Some([lc, rc]), clamped: lclamp || rclamp })
            } else {
                let lc = left.current_for_demand(fixation)?;
                let rc = right.current_for_demand(fixation)?;
                Ok(EyeDemands { left: fixation, right: fixation, commands: Some([lc, rc]), clamped: false })
            }
        }
        ViewingCondition::Monovision { left_power, right_power } => Ok(EyeDemands {
            left: accommodative_demand(screen, *left_power)?,
            right: accommodative_demand(screen, *right_power)?,
            commands: None,
            clamped: false,
        }),
    }
}

/// Per-eye demand for a static fixation request. Dynamic-lens requests outside
/// the lens window are errors.
pub fn demands_for_fixation(cond: &ViewingCondition, geom: &DisplayGeometry, fixation: Diopters) -> Result<EyeDemands> {
    demands(cond, geom, fixation, false)
}

/// Per-eye demand along a continuous trajectory: out-of-window dynamic-lens
/// requests clamp to the nearest reachable demand and set `clamped`.
pub fn demands_along_trajectory(cond: &ViewingCondition, geom: &DisplayGeometry, fixation: Diopters) -> Result<EyeDemands> {
    demands(cond, geom, fixation, true)
}

pub fn va_conflict(vergence: Diopters, demand: Diopters) -> Diopters {
    Diopters((vergence.0 - demand.0).abs())
}

/// Binocular conflict under the rule that the eye focused closer to the
/// vergence distance dictates the percept.
pub fn effective_conflict(vergence: Diopters, demands: &EyeDemands) -> Diopters {
    let l = va_conflict(vergence, demands.left);
    let r = va_conflict(vergence, demands.right);
    if l.0 <= r.0 {
        l
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensCommandRecord {
    pub t_ms: f64,
    pub eye: Eye,
    pub current_ma: f64,
    pub demand: Diopters,
}

/// Lens-command stream for a fixation trajectory, two rows (left, right) per
/// sample. `samples` must be time-ordered.
pub fn schedule_lens_commands(
    cond: &ViewingCondition,
    geom: &DisplayGeometry,
    samples: &[(f64, Diopters)],
) -> Result<Vec<LensCommandRecord>> {
    let mut out = Vec::with_capacity(samples.len() * 2);
    let mut last_t = f64::NEG_INFINITY;
    for &(t_ms, fixation) in samples {
        if !(t_ms >= last_t) {
            return Err(Error::Precondition("lens command samples must be time-ordered".into()));
        }
        last_t = t_ms;
        let d = demands_along_trajectory(cond, geom, fixation)?;
        if let Some([lc, rc]) = d.commands {
            out.push(LensCommandRecord { t_ms, eye: Eye::Left, current_ma: lc.current_ma, demand: d.left });
            out.push(LensCommandRecord { t_ms, eye: Eye::Right, current_ma: rc.current_ma, demand: d.right });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::absolute_from_relative;

    #[test]
    fn demand_examples() {
        assert_eq!(accommodative_demand(Diopters(2.0), Diopters(0.0)).unwrap(), Diopters(2.0));
        assert_eq!(accommodative_demand(Diopters(2.0), Diopters(-1.0)).unwrap(), Diopters(3.0));
        assert_eq!(accommodative_demand(Diopters(0.5), Diopters(-1.0)).unwrap(), Diopters(1.5));
        assert!(accommodative_demand(Diopters(0.5), Diopters(0.5)).is_err());
    }

    #[test]
    fn lens_power_examples() {
        let w = DemandWindow::hardware();
        let s = Diopters(0.565);
        assert_eq!(dynamic_lens_power(s, s, w).unwrap(), Diopters(0.0));
        let p = dynamic_lens_power(Diopters(2.065), s, w).unwrap();
        assert!((p.0 + 1.5).abs() < 1e-12);
        let p = dynamic_lens_power(Diopters(0.315), s, w).unwrap();
        assert!((p.0 - 0.25).abs() < 1e-12);
        assert!(dynamic_lens_power(Diopters(2.5), s, w).is_err());
        let fix = Diopters(2.065);
        let back = accommodative_demand(s, dynamic_lens_power(fix, s, w).unwrap()).unwrap();
        assert!((back.0 - fix.0).abs() < 1e-15);
    }

    #[test]
    fn condition_policies() {
        let g = DisplayGeometry::dynamic_lens_rig();
        let f = demands_for_fixation(&ViewingCondition::FixedLens, &g, Diopters(2.0)).unwrap();
        assert!((f.left.0 - 0.565).abs() < 1e-3 && f.left == f.right && f.commands.is_none());

        let fix = absolute_from_relative(g.screen_vergence(), Diopters(1.5)).unwrap();
        let d = demands_for_fixation(&ViewingCondition::dynamic_reference(), &g, fix).unwrap();
        assert_eq!(d.left, fix);
        assert_eq!(d.right, fix);
        let [lc, rc] = d.commands.unwrap();
        assert_eq!(lc, rc);

        let g05 = g.with_screen_distance(0.5).unwrap();
        let mono = ViewingCondition::monovision(Diopters(0.0), Diopters(-1.0)).unwrap();
        let m = demands_for_fixation(&mono, &g05, Diopters(3.0)).unwrap();
        assert_eq!(m.left, Diopters(2.0));
        assert_eq!(m.right, Diopters(3.0));
    }

    #[test]
    fn dynamic_clamps_only_along_trajectories() {
        let g = DisplayGeometry::dynamic_lens_rig();
        let cond = ViewingCondition::dynamic_reference();
        assert!(demands_for_fixation(&cond, &g, Diopters(3.0)).is_err());
        let d = demands_along_trajectory(&cond, &g, Diopters(3.0)).unwrap();
        assert!(d.clamped);
        assert!((d.left.0 - 1.0 / 0.48).abs() < 1e-9);
    }

    #[test]
    fn conflict_examples() {
        assert!((va_conflict(Diopters(2.065), Diopters(0.565)).0 - 1.5).abs() < 1e-12);
        assert_eq!(va_conflict(Diopters(1.0), Diopters(1.0)), Diopters(0.0));
        let d = EyeDemands { left: Diopters(2.0), right: Diopters(3.0), commands: None, clamped: false };
        assert_eq!(va_conflict(Diopters(3.0), d.left), Diopters(1.0));
        assert_eq!(va_conflict(Diopters(3.0), d.right), Diopters(0.0));
        assert_eq!(effective_conflict(Diopters(3.0), &d), Diopters(0.0));
    }

    #[test]
    fn schedule_rows() {
        let g = DisplayGeometry::dynamic_lens_rig();
        let cond = ViewingCondition::dynamic_reference();
        let rows = schedule_lens_commands(&cond, &g, &[(0.0, Diopters(0.565)), (10.0, Diopters(2.0))]).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].eye, Eye::Left);
        assert!(rows[2].current_ma < rows[0].current_ma);
        assert!(schedule_lens_commands(&cond, &g, &[(5.0, Diopters(1.0)), (1.0, Diopters(1.0))]).is_err());
        assert!(schedule_lens_commands(&ViewingCondition::FixedLens, &g, &[(0.0, Diopters(1.0))]).unwrap().is_empty());
    }
}
