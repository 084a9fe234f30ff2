//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KwError {
    #[error("syntax error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("division by zero while evaluating at the given point")]
    DivisionByZero,
    #[error("domain violation in `{func}`: argument {arg}")]
    DomainViolation { func: String, arg: f64 },
    #[error("exact evaluation requested on a transcendental node `{0}`")]
    TranscendentalInExactMode(String),
    #[error("variable `{0}` is not bound at the evaluation point")]
    UnboundVariable(String),
    #[error("expression is not polynomial in `{0}`")]
    NotPolynomial(String),
    #[error("degree {found} in `{var}` exceeds the requested maximum {max}")]
    DegreeExceeded { var: String, found: usize, max: usize },
    #[error("zero test inconclusive: all {0} sample points hit singularities")]
    Inconclusive(usize),
    #[error("chart mismatch: `{0}` vs `{1}`")]
    ChartMismatch(String, String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{0}")]
    Invalid(String),
    #[error("Newton iteration failed to converge: {0}")]
    NewtonDiverged(String),
    #[error("singular matrix: {0}")]
    Singular(String),
}
