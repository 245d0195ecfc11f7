//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Step size collapsed before reaching the end of the grid.
    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    /// A map returned NaN or an infinity.
    #[error("non-finite value in {what}")]
    Domain { what: String },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("pair (A, C) is not observable: rank {rank} < {n}")]
    NotObservable { rank: usize, n: usize },

    #[error("singular construction: {0}")]
    Singular(String),

    #[error("gain check failed: achieved spectrum differs from assigned by {0:e}")]
    GainCheck(f64),

    #[error("covariance diagonal entry {index} is negative ({value:e})")]
    NegativeVariance { index: usize, value: f64 },

    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },

    #[error("invalid data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name: name.to_string(),
        reason: reason.into(),
    }
}

pub(crate) fn require_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {value}")))
    }
}
