use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} is outside [{min}, {max}]")]
    Range {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("state vector is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("internal consistency failure: {0}")]
    Consistency(String),
    #[error("invalid coefficient table: {0}")]
    Coefficients(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid bitstring: {0}")]
    Bitstring(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
