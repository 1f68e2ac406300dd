use thiserror::Error;

/// Errors produced by model construction, analysis and simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("model has no states")]
    EmptyModel,

    #[error("dimension mismatch: {0}")]
    BadDimension(String),

    #[error("transition {id} has non-positive rate {rate}")]
    NonpositiveRate { id: usize, rate: f64 },

    #[error("model is not irreducible: {0}")]
    NotIrreducible(String),

    #[error("invalid growth rate at state {state}: {detail}")]
    InvalidGrowth { state: usize, detail: String },

    #[error("global balance system is singular")]
    SingularBalance,

    #[error("matrix is singular (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },

    #[error("expected-age system is unstable: {0}")]
    Unstable(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parameters violate the stability conditions: {0}")]
    UnstableParameters(String),

    #[error("outside the domain of the comparison: {0}")]
    DomainViolation(String),

    #[error("state {state} has no outgoing transitions")]
    NoOutgoingTransitions { state: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
