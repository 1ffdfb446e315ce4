use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid level {grid} is too coarse for wavelet level {level} (need at least {needed})")]
    Resolution { grid: u32, level: u32, needed: u32 },

    #[error("construction error: {0}")]
    Construction(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("planning error: {0}")]
    Planning(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
