use thiserror::Error;

/// Errors produced by the constructions and evaluators in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate source triangle (signed area {area:e})")]
    DegenerateSource { area: f64 },
    #[error("degenerate triangle (signed area {area:e}); vertices must be counterclockwise")]
    DegenerateTriangle { area: f64 },
    #[error("degenerate interval [{lo}, {hi}]")]
    DegenerateInterval { lo: f64, hi: f64 },
    #[error("weighted integral diverges: {0}")]
    DivergentIntegral(String),
    #[error("weight is negative on the triangle (minimum vertex value {min:e})")]
    NegativeWeight { min: f64 },
    #[error("argument {value} outside of domain {domain}")]
    OutOfDomain { value: f64, domain: &'static str },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid letter {0:?} in word (expected A, B or C)")]
    InvalidLetter(char),
    #[error("parameter mismatch: {0}")]
    ParamMismatch(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("injectivity check failed: {0}")]
    InjectivityCheckFailed(String),
    #[error("non-finite coordinate")]
    NonFinite,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
