//! Simulation and Bayesian estimation of k-step thinking in p-beauty
//! contests.
//!
//! The library has three layers:
//!
//! - game theory: belief matrices, k-step best responses, and the
//!   one-shot game itself ([`game`]);
//! - the statistical model: monotone spline strategy curves ([`spline`]),
//!   the hierarchical Beta likelihood with its priors ([`model`]), and the
//!   Metropolis-within-Gibbs sampler ([`sampler`]);
//! - tooling: synthetic populations ([`simulate`]), dataset and manifest
//!   IO ([`data`]), posterior summaries and diagnostics ([`analysis`]),
//!   and SVG figures ([`svg`]).

pub mod analysis;
pub mod data;
pub mod error;
pub mod game;
pub mod model;
pub mod sampler;
pub mod simulate;
pub mod spline;
pub mod svg;

pub use error::{Error, Result};
