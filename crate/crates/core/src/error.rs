use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("variable index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),

    #[error("reference to undeclared decision variable {0}")]
    UnknownVariable(usize),

    #[error("relaxation order {k} is below the minimal order {k_min} of the constraint set")]
    OrderTooLow { k: u32, k_min: u32 },

    #[error("constraint set carries no ball constraint R^2 - |x|^2")]
    MissingBallConstraint,

    #[error("no interior point found after {0} attempts")]
    NoInteriorPoint(usize),

    #[error("Monte Carlo sampling accepted none of {0} draws (empty interior?)")]
    EmptySample(usize),

    #[error("initial state {0:?} is not in the interior of the constraint set")]
    NotInterior(Vec<f64>),

    #[error("non-finite state encountered at t = {0}")]
    NonFinite(f64),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("average exit time estimate does not settle: {0}")]
    DivergentExitTime(String),

    #[error("{0}")]
    Config(String),

    #[error("malformed interchange file, line {line}: {message}")]
    Format { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
