use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("prime mismatch: {0} vs {1}")]
    PrimeMismatch(u64, u64),
    #[error("value below working precision: {0}")]
    BelowPrecision(String),
    #[error("invalid singular tuple: {0}")]
    InvalidTuple(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("size guard violated: {0}")]
    SizeGuard(String),
    #[error("label mismatch: {0}")]
    LabelMismatch(String),
}
