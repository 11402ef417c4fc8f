//! Bayesian calibration of projectile surrogates and decision-making under
//! model uncertainty.
//!
//! A drag-affected truth model generates noisy range data. Three surrogates
//! are calibrated to it (a vacuum formula, a black-box Gaussian process and a
//! hybrid of the two) and each is used to pick the launch that maximizes the
//! expected utility of hitting a target.

pub mod calibrate;
pub mod data;
pub mod error;
pub mod gp;
pub mod nelder_mead;
pub mod optimize;
pub mod physics;
pub mod quadrature;
pub mod rng;
pub mod surrogate;

pub use error::{Error, Result};
