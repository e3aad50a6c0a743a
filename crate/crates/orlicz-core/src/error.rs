//! Shared error type for every fallible operation in the crate.

use thiserror::Error;

use crate::function::ValidationReport;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// The expression source does not match the grammar.
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },

    /// The expression parsed but fails the Orlicz-function checks.
    #[error("not an Orlicz function: {0}")]
    NotOrlicz(ValidationReport),

    /// Evaluation left the representable range.
    #[error("evaluation overflowed at t = {input:e}")]
    Overflow { input: f64 },

    /// An argument is outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// No sign change could be bracketed within the expansion range.
    #[error("no bracket: {0}")]
    NoBracket(String),

    /// An iteration budget was exhausted before reaching tolerance.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// No certified tail bound is available for the requested integral.
    #[error("tail bound unavailable: {0}")]
    TailUnbounded(String),

    /// The sampled 2-concavity check found a violated midpoint triple.
    #[error(
        "not 2-concave: M(sqrt(u)) fails midpoint concavity between u = {a:e} and u = {b:e} \
         (residual {residual:e})"
    )]
    NotTwoConcave { a: f64, b: f64, residual: f64 },

    /// A Monte Carlo batch produced no usable weight.
    #[error("degenerate batch: {0}")]
    DegenerateBatch(String),

    /// The requested run exceeds the desk-scale resource cap.
    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),
}

impl Error {
    /// Stable machine-readable tag for structured output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "SyntaxError",
            Error::NotOrlicz(_) => "NotOrlicz",
            Error::Overflow { .. } => "Overflow",
            Error::Domain(_) => "DomainError",
            Error::NoBracket(_) => "NoBracket",
            Error::NoConvergence(_) => "NoConvergence",
            Error::TailUnbounded(_) => "TailUnbounded",
            Error::NotTwoConcave { .. } => "NotTwoConcave",
            Error::DegenerateBatch(_) => "DegenerateBatch",
            Error::ResourceCap(_) => "ResourceCap",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
