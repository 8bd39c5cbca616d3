//! Error taxonomy shared by every module.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input coordinate left its closed domain (slab or time interval).
    #[error("{what} = {value} outside [{lo}, {hi}]")]
    DomainViolation { what: &'static str, value: f64, lo: f64, hi: f64 },

    /// A parameter set (or single argument) fails its documented constraint.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A skew form is rank-deficient beyond corank 1 relative to its scale,
    /// so no characteristic line is defined.
    #[error("degenerate form: sqrt(c1)/|m|^2 = {ratio:.3e} below {floor:.1e}")]
    DegenerateForm { ratio: f64, floor: f64 },

    /// A search routine exhausted its budget without meeting its goal.
    #[error("search failure: {reason}")]
    SearchFailure { reason: String },

    /// The integrator could not continue (step underflow, guard violation).
    #[error("integration failure at s = {arclength}: {reason}")]
    IntegrationFailure { reason: String, arclength: f64 },

    /// Two pieces of geometry that must agree do not (scene interfaces).
    #[error("consistency error: {0}")]
    Consistency(String),

    /// Malformed configuration text.
    #[error("config error: {0}")]
    Config(String),
}
