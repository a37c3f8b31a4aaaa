//! Nested CMA-ES for black-box bilevel optimization.
//!
//! The upper level runs CMA-ES on `x`, ranking candidates by an estimate of
//! the value function `Φ(x) = F(x, y*(x))`. Each estimate comes from a
//! lower-level CMA-ES on `f(x, ·)` that is warm-started from a shared cache of
//! distributions and refined only until the upper-level ranking stabilizes.

pub mod cma;
pub mod engine;
pub mod error;
pub mod harness;
pub mod problems;

pub use error::{Error, Result};
