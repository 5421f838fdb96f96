//! Steady states of the two-species SKT cross-diffusion competition model on the
//! unit interval: linear analysis mode by mode, discretization, Newton solves,
//! pseudo-arclength continuation with event detection, spectral stability and
//! implicit time integration.

pub mod banded;
pub mod cli;
pub mod config;
pub mod continuation;
pub mod discretization;
pub mod error;
pub mod evolve;
pub mod linear_analysis;
pub mod model;
pub mod newton;
pub mod output;
pub mod stability;

pub use error::{Error, Result};
