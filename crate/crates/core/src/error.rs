use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("simulation diverged at step {step}")]
    Divergence { step: usize },

    #[error("trajectory too short: need at least {needed} samples, have {available}")]
    TooShort { needed: usize, available: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("system `{system}` is numerically singular (reciprocal condition {rcond:e})")]
    Singular { system: String, rcond: f64 },

    #[error("{0}")]
    NotRepresentable(String),

    #[error("truth has zero norm; normalized error is undefined")]
    ZeroTruth,

    #[error("config error: {0}")]
    Config(String),

    #[error("insufficient sweep coverage: {0}")]
    Coverage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
