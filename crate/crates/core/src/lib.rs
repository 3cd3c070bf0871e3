//! Sparse identification of the drift and diffusion of Itô SDEs from sampled
//! trajectories, using first- and higher-order Kramers–Moyal estimators.
//!
//! The pipeline is: simulate ([`sde_sim`]), evaluate a function library
//! ([`dictionary`]), assemble normal equations ([`estimators`]), solve them
//! densely or sparsely ([`sparse`]), and score against the known truth
//! ([`metrics`]). [`harness`] drives whole Monte Carlo sweeps from TOML.

pub mod basis;
pub mod dictionary;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod metrics;
pub mod sde_sim;
pub mod sparse;

pub use error::{Error, Result};
