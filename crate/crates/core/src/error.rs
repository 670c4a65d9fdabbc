use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("column {0} is constant and cannot be standardized")]
    ConstantColumn(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("design is rank deficient on the requested columns")]
    RankDeficient,

    #[error("sample covariance of the design is singular")]
    SingularCovariance,

    #[error("enumeration over {p} predictors exceeds the limit of {limit}")]
    TooLarge { p: usize, limit: usize },

    #[error("hyperparameter optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("all paired differences are zero")]
    AllZeroDifferences,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Errors that come from numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient
                | Error::SingularCovariance
                | Error::OptimizationFailed(_)
                | Error::AllZeroDifferences
        )
    }
}
