//! MDL model selection between the Poisson and geometric families.
//!
//! Both families are parameterised by their mean, and both have infinite
//! parametric complexity, so the minimax-optimal NML code does not exist.
//! This crate implements the practical substitutes — BIC/ML, restricted and
//! two-part approximated NML, the prequential plug-in code, and the Bayesian
//! code under the improper Jeffreys prior (exact and asymptotic) — together
//! with a deterministic Monte Carlo harness that measures their error rates,
//! classification bias, calibration, and plug-in regret growth.
//!
//! All codelengths are ideal (real-valued) lengths in nats.

pub mod codes;
pub mod harness;
pub mod models;
pub mod rng;
pub mod selection;

#[cfg(feature = "cli")]
pub mod cli;

mod error;

pub use error::{Error, Result};
