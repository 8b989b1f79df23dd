//! Simulator for a nonlinear, disentangling master equation on few-spin
//! registers, with drivers for its phase-transition and instability studies.

pub mod config;
pub mod disentangle;
pub mod engine;
pub mod experiments;
pub mod error;
pub mod linalg;
pub mod models;
pub mod output;
pub mod random;
pub mod runner;

pub use error::{Error, Result};
