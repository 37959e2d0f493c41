use thiserror::Error;

/// Errors produced while parsing expressions, evaluating fields, or
/// integrating flows.
#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdent { name: String, offset: usize },
    #[error("division by zero while evaluating `{subexpr}`")]
    DivisionByZero { subexpr: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("point outside patch: {0}")]
    OutsidePatch(String),
    #[error("missing connection data: {0}")]
    MissingConnection(String),
    #[error("missing Nijenhuis operator: {0}")]
    MissingN(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("flow left the patch at t = {t:.6}")]
    FlowEscape { t: f64 },
    #[error("nonfinite state in flow at t = {t:.6}")]
    NonFinite { t: f64 },
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error("invalid problem file: {0}")]
    Problem(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("degenerate endomorphism: {0}")]
    Degenerate(String),
    #[error("inconsistent catalog data: {0}")]
    Catalog(String),
}

pub type Result<T> = std::result::Result<T, Error>;
