//! File formats, parallel drivers and the command-line front end for the
//! `dynlens-core` simulations.

pub mod config;
pub mod error;
pub mod formats;
pub mod commands;
pub mod parallel;
pub mod tune;
