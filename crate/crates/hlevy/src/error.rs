//! Error types shared across the crate.

use num_complex::Complex64;
use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A measure violates its structural invariants (negative mass, atom at
    /// the origin where none is allowed, non-integrable weight, ...).
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A moment integral diverges (or overflows) under quadrature.
    #[error("moment divergence: {0}")]
    MomentDivergence(String),

    /// The jump measure has infinite (or non-finite) total rate and cannot be
    /// simulated as a compound Poisson process without truncation.
    #[error("finite-activity violation: {0}")]
    FiniteActivity(String),

    /// A resource guard tripped (e.g. expected jump count too large).
    #[error("resource guard: {0}")]
    ResourceGuard(String),

    /// The eigensolver failed to converge; carries the offending matrix in
    /// packed upper-triangular form so it can be dumped for inspection.
    #[error("eigensolver failed to converge after {iterations} iterations (n = {n})")]
    EigenSolver {
        n: usize,
        iterations: usize,
        packed: Vec<Complex64>,
    },

    /// Newton continuation for the characteristic equation left the upper
    /// half-plane or stalled.
    #[error("branch error at z = {z}, t = {t}: {message} (last iterate {last_iterate})")]
    Branch {
        z: Complex64,
        t: f64,
        last_iterate: Complex64,
        message: String,
    },

    /// Malformed configuration or command line.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    /// Too many Monte Carlo cells failed for the run to be meaningful.
    #[error("experiment aborted: {0}")]
    Experiment(String),
}

impl Error {
    /// Process exit code for the CLI: 1 usage, 2 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
