use thiserror::Error;

/// Errors raised across the simulator, solver and learning stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid scenario configuration: {0}")]
    Config(String),

    #[error("channel matrix is rank deficient (condition number {cond:.3e})")]
    RankDeficient { cond: f64 },

    #[error("value {x:.6e} is outside the invertible range of the EH model (saturation {saturation:.6e})")]
    EhDomain { x: f64, saturation: f64 },

    #[error("invalid Young-inequality weight: epsilon = {epsilon:.6e} must exceed 1/S = {bound:.6e}")]
    InvalidEpsilon { epsilon: f64, bound: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("convex program is infeasible")]
    Infeasible,

    #[error("convex solver stalled after {0} iterations")]
    MaxIter(usize),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{label}: {source}")]
    Job { label: String, source: Box<Error> },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
