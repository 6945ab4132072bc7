//! Numerical laboratory for Hermitian Lévy matrix ensembles and their free
//! probability limits: build the matrix ensemble attached to a free
//! generating pair, simulate its eigenvalue process, solve the limiting
//! complex Burgers equation by characteristics, and measure how fast the
//! empirical spectra converge to the limit laws.

// Negated comparisons like `!(x > 0.0)` are used on purpose: they reject
// NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod measures;
pub mod rng;
pub mod ensemble;
mod eigen;
pub mod spectral;
pub mod burgers;
pub mod export;
pub mod harness;
pub mod cli;

pub use error::{Error, Result};
