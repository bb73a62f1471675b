use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("probability {0} is outside the open unit interval")]
    ProbabilityDomain(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("residual {residual} lies outside the support of marginal {index}")]
    OutsideSupport { index: usize, residual: f64 },

    #[error("non-finite density at the evaluation point (clamp the point away from the cube boundary)")]
    NonFiniteDensity,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("all particle weights vanished at level {level}")]
    LevelFailure { level: usize },

    #[error("draw cap of {cap} exceeded before collecting {wanted} accepted samples")]
    DrawCapExceeded { cap: u64, wanted: usize },

    #[error("estimate unavailable: {0}")]
    EstimateUnavailable(String),

    #[error("target level {0} is not available in the quantile table")]
    UnknownLevel(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input (as opposed to runtime failures).
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidParameter(_)
                | Error::DimensionMismatch { .. }
                | Error::UnknownLevel(_)
                | Error::Json(_)
        )
    }
}
