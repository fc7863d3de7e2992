use alloc::string::String;

/// Errors raised by the estimators and their numerical kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what}: no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        what: String,
        iterations: usize,
        residual: f64,
    },
    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below -{tol:e}")]
    NotPsd { eigenvalue: f64, tol: f64 },
    #[error("matrix is not positive definite: pivot {pivot:e} at index {index}")]
    NotPd { index: usize, pivot: f64 },
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("forward cache is stale: network parameters changed since the forward pass")]
    StaleCache,
    #[error("non-finite objective at epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("singular iterate at iteration {iteration}")]
    Singular { iteration: usize },
    #[error("root not bracketed: F(lo) - target = {f_low:e}, F(hi) - target = {f_high:e}")]
    NotBracketed { f_low: f64, f_high: f64 },
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = core::result::Result<T, Error>;
