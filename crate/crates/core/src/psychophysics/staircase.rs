use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Multiplicative 1-up/2-down staircase.
#[derive(Debug, Clone, PartialEq)]
pub struct StaircaseState {
    pub level: f64,
    pub up_factor: f64,
    pub down_factor: f64,
    pub min_level: f64,
    pub max_level: f64,
    pub correct_run: u32,
    pub reversals: u32,
    /// +1 after the last move up, -1 after the last move down, 0 before any move.
    pub direction: i8,
    pub history: Vec<(f64, bool)>,
    pub reversal_levels: Vec<f64>,
}

impl StaircaseState {
    pub fn new(start: f64, up_factor: f64, down_factor: f64, min_level: f64, max_level: f64) -> Result<Self> {
        if !(start > 0.0 && min_level > 0.0 && min_level <= start && start <= max_level) {
            return Err(Error::Invalid("staircase needs 0 < min <= start <= max".into()));
        }
        if !(up_factor > 1.0 && down_factor > 0.0 && down_factor < 1.0) {
            return Err(Error::Invalid("staircase needs up factor > 1 and down factor in (0, 1)".into()));
        }
        Ok(StaircaseState {
            level: start,
            up_factor,
            down_factor,
            min_level,
            max_level,
            correct_run: 0,
            reversals: 0,
            direction: 0,
            history: Vec::new(),
            reversal_levels: Vec::new(),
        })
    }

    /// Steps of 1.26 up and 0.794 down (equal in log units).
    pub fn standard(start: f64, min_level: f64, max_level: f64) -> Result<Self> {
        Self::new(start, 1.26, 0.794, min_level, max_level)
    }

    pub fn update(&self, correct: bool) -> StaircaseState {
        let mut s = self.clone();
        s.history.push((self.level, correct));
        let mv = if correct {
            s.correct_run += 1;
            if s.correct_run == 2 {
                s.correct_run = 0;
                -1
            } else {
                0
            }
        } else {
            s.correct_run = 0;
            1
        };
        if mv != 0 {
            if s.direction != 0 && s.direction != mv {
                s.reversals += 1;
                s.reversal_levels.push(self.level);
            }
            s.direction = mv;
            let f = if mv > 0 { s.up_factor } else { s.down_factor };
            s.level = (s.level * f).clamp(s.min_level, s.max_level);
        }
        s
    }

    pub fn finished(&self, max_reversals: u32) -> bool {
        self.reversals >= max_reversals
    }
}
