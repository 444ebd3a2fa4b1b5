use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("inconsistent inputs: {0}")]
    Mismatch(String),

    #[error("matrix is not symmetric (max |M - M^T| = {0:e})")]
    NonSymmetric(f64),

    #[error("eigensolver did not converge within {0} iterations")]
    EigenNoConvergence(usize),

    #[error("internal consistency failure: {0}")]
    Consistency(String),
}
