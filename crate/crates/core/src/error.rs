use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("requested response lies outside the filter span: residual {residual:e} > {tolerance:e}")]
    InconsistentResponse { residual: f64, tolerance: f64 },

    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    #[error("cyclic prefix condition violated: {0}")]
    CyclicPrefix(String),

    #[error("water level search did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("numerical self-check failed: {0}")]
    NumericalCheck(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
