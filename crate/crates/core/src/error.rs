//! Engine-wide error type.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("division by zero scalar")]
    DivisionByZero,

    #[error("division by a series with no invertible leading term")]
    DivisionByNonUnit,

    #[error("variable mismatch: {0} vs {1}")]
    VariableMismatch(String, String),

    #[error("empty window after intersection")]
    EmptyWindow,

    #[error("window too shallow: {0}")]
    WindowTooShallow(String),

    #[error("nonpositive filtration: {0}")]
    NonpositiveFiltration(String),

    #[error("log requires constant term 1, found {0}")]
    LogConstantTerm(String),

    #[error("series has adjoined log terms where none are allowed")]
    UnexpectedLogPart,

    #[error("reversion requires a near-identity series at infinity")]
    NotNearIdentity,

    #[error("residue undecidable at this window")]
    ResidueUndecidable,

    #[error("non-integrable pole: {0}")]
    NonIntegrablePole(String),

    #[error("not triangular: {0}")]
    NotTriangular(String),

    #[error("tameness violated: {0}")]
    NotTame(String),

    #[error("cut overflow: {0}")]
    CutOverflow(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("order mismatch: {0}")]
    OrderMismatch(String),

    #[error("io: {0}")]
    Io(String),

    #[error("bad input: {0}")]
    BadInput(String),
}

impl From<std::io::Error> for EngineError {
    fn from(e: std::io::Error) -> Self {
        EngineError::Io(e.to_string())
    }
}
