//! Simulation and verification toolkit for random dynamical systems driven
//! by SDEs with additive noise dX = b(X)dt + σ dW on R^d (plus the angular
//! circle example).
//!
//! The crate estimates Lyapunov spectra, normalizes Gibbs invariant
//! measures, and runs constructive synchronization diagnostics: two-point
//! distance statistics, ball-diameter decay, pullback ensembles, cluster
//! counts of the statistical equilibrium, one-sided-Lipschitz /
//! monotonicity condition checkers, and explicit control-path witnesses for
//! swift transitivity and contraction on large sets.
//!
//! Reproducibility is a first-class contract: noise is generated
//! counter-style from (seed, global index, component), the time shift is an
//! index shift, and every parallel reduction is ordered, so reruns (at any
//! worker count) are bitwise identical.

pub mod acceptance;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod flow;
pub mod lyapunov;
pub mod manifest;
pub mod measure;
pub mod noise;
pub mod runner;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result};
