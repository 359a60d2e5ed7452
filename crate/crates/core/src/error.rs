use thiserror::Error;

/// Errors raised by the simulation and sensing stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("calibration error on {finger}: raw_min {raw_min} must be below raw_max {raw_max}")]
    Calibration {
        finger: &'static str,
        raw_min: f64,
        raw_max: f64,
    },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
