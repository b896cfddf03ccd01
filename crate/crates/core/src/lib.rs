//! Numerical laboratory for coupled Riesz-Bessel fractional kinetic systems
//! with long-range-dependent, Hermite-subordinated Gaussian initial data.
//!
//! The crate solves the two-component kinetic system exactly in Fourier space
//! (exponential or Mittag-Leffler mode multipliers), synthesizes the random
//! initial fields spectrally, and verifies the macro- and micro-scaling
//! covariance limits against deterministic quadrature oracles.

pub mod config;
pub mod error;
pub mod fields;
pub mod hermite;
pub mod kinetic;
pub mod limits;
pub mod quad;
pub mod runner;
pub mod scaling;
pub mod specfun;

pub use error::{Error, Result};
