use thiserror::Error;

/// Errors produced by game construction, dynamics, and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty vector passed to {0}")]
    EmptyVector(&'static str),

    #[error("matrix is not 2x2 (got {m}x{n})")]
    NotTwoByTwo { m: usize, n: usize },

    #[error("degenerate game: {0}")]
    Degenerate(String),

    #[error("no interior equilibrium: {0}")]
    NonInterior(String),

    #[error("matrix violates normal-form assumptions: {0}")]
    NotNormalForm(String),

    #[error("invalid mixed strategy: {0}")]
    InvalidStrategy(String),

    #[error("tiebreak contract violation: rule chose index {chosen}, tied set {tied:?}")]
    TiebreakContract { chosen: usize, tied: Vec<usize> },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("trajectory error: {0}")]
    Trajectory(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
