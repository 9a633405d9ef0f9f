use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A function was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(&'static str),

    /// Inconsistent or invalid configuration supplied by the caller.
    #[error("configuration error: {0}")]
    Config(String),

    /// Vector length does not match the number of steps.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// Order statistics are invalid for the requested use.
    #[error("order spec error: {0}")]
    OrderSpec(String),

    /// The conditioning event has probability zero in floating point.
    #[error("tail underflow: conditioning event has zero probability in floating point")]
    TailUnderflow,

    /// The requested combination of strategy and parameters is not supported.
    #[error("unsupported configuration: {0}")]
    Unsupported(&'static str),

    /// Partial Monte Carlo results were produced under different configurations.
    #[error("cannot merge partial results with different configuration fingerprints")]
    FingerprintMismatch,

    /// The composed PLD would exceed the maximum support size.
    #[error("PLD support of {cells} cells exceeds the limit of {limit}; use a wider grid step")]
    SupportOverflow { cells: usize, limit: usize },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
