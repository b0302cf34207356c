use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("target below the minimum elevation ({elevation_deg:.3} deg < {min_deg:.3} deg)")]
    BelowHorizon { elevation_deg: f64, min_deg: f64 },

    #[error("target is behind the array plane")]
    BehindArray,

    #[error("direction does not intersect the Earth")]
    NoGroundIntersection,

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("regularized Gram matrix is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("regularized Gram matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("beam {0} has no associated users")]
    EmptyBeam(usize),

    #[error("invalid configuration: {field}: {message}")]
    Config { field: String, message: String },

    #[error("loss table: {0}")]
    LossTable(String),

    #[error("gain table: {0}")]
    GainTable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
