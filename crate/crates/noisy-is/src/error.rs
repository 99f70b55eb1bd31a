//! Crate-wide error type. Each variant names the module that raised it so a
//! one-line diagnostic identifies both where and what went wrong.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("models: {0}")]
    Models(String),
    #[error("proposals: {0}")]
    Proposals(String),
    #[error("variance_analytics: {0}")]
    Quadrature(String),
    #[error("estimators: {0}")]
    Estimators(String),
    #[error("variance_analytics: {0}")]
    Variance(String),
    #[error("experiments: {0}")]
    Experiments(String),
}

pub type Result<T> = std::result::Result<T, Error>;
