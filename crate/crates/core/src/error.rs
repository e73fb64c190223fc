use thiserror::Error;

/// Errors produced by the simulator, calibration fits and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid circuit: inlet and vent of actuator {finger} are both open")]
    InvalidCircuit { finger: usize },

    #[error("finger {index}: {source}")]
    Finger {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error(
        "calibration rejected: {cycles} warm-up cycles recorded, at least {required} required"
    )]
    Warmup { cycles: u32, required: u32 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("encode error: {0}")]
    Encode(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
