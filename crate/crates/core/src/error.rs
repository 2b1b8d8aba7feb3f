use thiserror::Error;

use crate::scaling::ScalingResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("{what}: size {n} exceeds the limit of {limit}")]
    SizeLimit {
        what: &'static str,
        n: usize,
        limit: usize,
    },

    #[error("the support of the matrix admits no perfect matching; the permanent is zero")]
    ZeroPermanent,

    #[error(
        "sinkhorn scaling did not converge in {} iterations (best residual {:.3e})",
        .0.iterations,
        .0.residual
    )]
    ScalingNotConverged(Box<ScalingResult>),

    #[error("{what} did not converge in {iterations} iterations (best value {best_value}, stationarity {stationarity:.3e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        best_value: f64,
        stationarity: f64,
    },

    #[error("numerical breakdown: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
