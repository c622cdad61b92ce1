use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Bad arguments: dimensions, indices, lengths, parameter ranges.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    /// A numerical kernel failed to reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("objective became non-finite at iteration {iteration}")]
    Divergence { iteration: usize },

    /// The requested object cannot be constructed (e.g. an empty constraint set).
    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn dims(expected: (usize, usize), got: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            expected: format!("{}x{}", expected.0, expected.1),
            got: format!("{}x{}", got.0, got.1),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
