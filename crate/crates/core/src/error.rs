//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by simulation, analysis, and estimation routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An input fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The adaptive integrator could not continue (step size underflow,
    /// step budget exhausted, or a non-finite state).
    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    /// The stabilizing control law was evaluated at v_z = 0, where it
    /// diverges. Cap or cut off the control before this point.
    #[error("control singularity: v_z = 0 (cap or cut off the control first)")]
    BreakdownSingularity,

    /// A least-squares fit could not be performed or produced an unusable
    /// result (too few points, non-positive slope, ...).
    #[error("fit error: {0}")]
    Fit(String),

    /// An internal consistency check failed. This indicates a bug rather
    /// than bad input.
    #[error("internal inconsistency: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
