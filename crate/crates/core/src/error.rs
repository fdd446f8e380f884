use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is singular or not positive definite (pivot {pivot:e} below tolerance {tolerance:e})")]
    Singular { pivot: f64, tolerance: f64 },

    #[error("spark condition violated: some set of {0} columns is linearly dependent")]
    Spark(usize),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("support enumeration needs {required} candidates but the budget is {budget}; use the greedy support search")]
    Budget { required: u128, budget: u64 },

    #[error("test-point Gram matrix is ill-conditioned: {usable} of {total} points usable (condition estimate {condition:e})")]
    IllConditioned {
        usable: usize,
        total: usize,
        condition: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
