use thiserror::Error;

use crate::extract::InfeasibilityReport;

/// Errors raised by the extractor library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no reduction polynomial registered for GF(2^{0})")]
    UnsupportedWidth(u32),

    #[error("field width mismatch: {0} vs {1}")]
    WidthMismatch(u32, u32),

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: u128, limit: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed design: {0}")]
    Structural(String),

    #[error("refused: {what} needs {required}, cap is {cap}")]
    Refused {
        what: &'static str,
        required: String,
        cap: String,
    },

    #[error("enumeration budget exceeded: need {required} joint outcomes, cap {cap}")]
    BudgetExceeded { required: u128, cap: u128 },

    #[error("infeasible parameters: {0}")]
    Infeasible(Box<InfeasibilityReport>),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid adversary: {0}")]
    InvalidAdversary(String),
}

pub type Result<T> = std::result::Result<T, Error>;
