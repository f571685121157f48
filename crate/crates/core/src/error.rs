use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed game, behavior or trial data.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numeric argument lies outside the domain of the operation.
    #[error("argument out of domain: {0}")]
    Domain(String),

    /// The method's preconditions do not hold for this data (for example an
    /// observed average below the local bound).
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// An enumeration would exceed the configured cap.
    #[error("enumeration of {requested} items exceeds the cap of {cap}; raise BELLCERT_CAP or shrink the game")]
    CapExceeded { requested: u128, cap: u128 },

    /// The linear-programming backend failed to reach a verdict.
    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
