//! Simulation and analysis core for dynamic-lens and monovision stereoscopic
//! displays.
//!
//! The crate is `no_std` with `alloc`. Everything here is a pure function of
//! its inputs and an explicit seed, so the same call always produces the same
//! bits on every platform. File formats, the CLI and parallel drivers live in
//! the `dynlens` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod controllers;
pub mod error;
pub mod gaze;
pub mod geometry;
pub mod math;
pub mod observer;
pub mod optics;
pub mod psychophysics;
pub mod rng;
pub mod stimuli;

pub use error::{Error, Result};
pub use optics::Diopters;
