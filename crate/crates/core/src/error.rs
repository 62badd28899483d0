use thiserror::Error;

/// Errors raised by model fitting, shrinkage and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (pivot {pivot:e} at column {column})")]
    NotPositiveDefinite { column: usize, pivot: f64 },

    #[error("eigensolver did not converge within {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },

    #[error("non-positive eigenvalue {value:e}")]
    NonPositiveEigenvalue { value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    /// The weighted cross-product of a category could not be factorized.
    #[error("weighted cross-product for category `{category}` is numerically singular (multicollinearity): {source}")]
    Multicollinearity {
        category: String,
        #[source]
        source: Box<Error>,
    },

    #[error("coefficients diverged (|beta| > {limit:e}) at iteration {iteration}; the data are likely separated")]
    Separation { iteration: usize, limit: f64 },

    #[error("IRLS did not converge within {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("every replication failed in cell rho={rho}, p={p}, n={n} ({failed} failures)")]
    CellFailed { rho: f64, p: usize, n: usize, failed: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
