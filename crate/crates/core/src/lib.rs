//! Binary hypothesis testing with unlabeled discrete observations.
//!
//! The observer sees only the multiset of `n` symbols (equivalently their
//! type), not which marginal produced which symbol. This crate provides the
//! detectors for that setting (ULR, GLRT by assignment, detectors A and B),
//! the exact and auction assignment solvers behind them, the asymptotic error
//! exponents `Omega(alpha)` and `Omega_lab(alpha)`, and a seeded Monte Carlo
//! harness.

pub mod assignment;
pub mod detectors;
pub mod error;
pub mod experiments;
pub mod exponents;
pub mod montecarlo;
pub mod probability;
pub mod rng;
pub mod trellis;

pub use error::{Error, Result};
