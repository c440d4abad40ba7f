use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("chart escape: {0}")]
    ChartEscape(String),

    #[error("degenerate fiber for involution {involution} (all quadratic coefficients vanish)")]
    DegenerateFiber { involution: usize },

    #[error("unknown automorphism id {0}")]
    UnknownAutomorphism(usize),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("map does not fix the origin: |f(0)| = {0:e}")]
    OriginNotFixed(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate splitting: angle {0:e} below threshold")]
    DegenerateSplitting(f64),

    #[error("chart radius collapsed to {0:e}")]
    RadiusCollapse(f64),

    #[error("graph transform diverged at iteration {iteration}: slope {slope}")]
    GraphTransformDiverged { iteration: usize, slope: f64 },

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("orbit window exhausted at cell {0}")]
    WindowExhausted(i64),

    #[error("matrix is not an isometry of the Gram form")]
    NotIsometry,

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
