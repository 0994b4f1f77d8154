use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("requested {requested} streams but the numerical rank is {achievable}")]
    RankDeficient { requested: usize, achievable: usize },

    #[error("point is not strictly feasible: {0}")]
    Domain(String),

    #[error("division by zero: {0}")]
    ZeroDenominator(String),

    #[error("retraction failed: {0}")]
    Retraction(String),

    #[error("invalid optimizer state: {0}")]
    State(String),

    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
