use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A precondition on the arguments is violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// An exponent lies outside the range where the zero-infinity laws apply.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// Integer exponent arithmetic left the representable range.
    #[error("exponent overflow: {0}")]
    Overflow(String),

    #[error("materialized cover would hold {count} cubes, cap is {cap}")]
    CapExceeded { count: u128, cap: u128 },

    #[error("memory budget exceeded: {required} bytes required, budget is {budget} bytes")]
    BudgetExceeded { required: u64, budget: u64 },

    /// A raw (numeric-only) evaluator failed or returned a non-positive value.
    #[error("evaluator failure at q = {q}: {reason}")]
    Evaluator { q: u64, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    /// The operation needs a symbolic power-log family.
    #[error("not symbolic: {0}")]
    NotSymbolic(String),
}
