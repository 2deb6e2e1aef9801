use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index out of range: {0}")]
    Index(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid subgame: {0}")]
    InvalidSubgame(String),
    #[error("invalid game: {0}")]
    InvalidGame(String),
    #[error("invalid mixed profile: {0}")]
    InvalidMixedProfile(String),
    #[error("genericity violation: {0}")]
    Genericity(String),
    #[error("state left the simplex at t = {t}: {detail}; retry with a smaller step")]
    StepSize { t: f64, detail: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
