use thiserror::Error;

use crate::model::Sign;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown system `{0}`")]
    UnknownSystem(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("point lies outside the chart domain of saddle {saddle}")]
    OutOfChartDomain { saddle: usize },
    #[error("integration diverged at t = {time}")]
    Divergence { time: f64, last: Vec<f64> },
    #[error("orbit from saddle {from} along the {sign} branch does not reach its target within t = {t_max}")]
    ConnectionNotFound { from: usize, sign: Sign, t_max: f64 },
    #[error("orbit from the initial point enters no saddle box within t = {t_max}")]
    NoEntrance { t_max: f64 },
    #[error("operation requires a {expected} network")]
    ModeMismatch { expected: &'static str },
    #[error("invalid entrance: {0}")]
    InvalidEntrance(String),
    #[error("time rescaling needs 0 < epsilon < 1, got {0}")]
    InvalidRescaling(f64),
    #[error("invalid network:\n{0}")]
    Validation(crate::model::ValidationReport),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
