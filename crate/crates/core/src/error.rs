//! Crate-wide error type.

/// Errors raised by the simulator library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Operand shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// An operation received an empty input it cannot define a result for.
    #[error("empty input: {0}")]
    EmptyInput(String),
    /// A NaN or infinity reached an operation that requires finite values.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// Input file does not match the declared dataset schema.
    #[error("schema error: {0}")]
    Schema(String),
    /// Attribute partition request cannot be satisfied.
    #[error("partition error: {0}")]
    Partition(String),
    /// A participant presented the same identifier twice.
    #[error("duplicate id: {0}")]
    DuplicateId(String),
    /// Participants disagree on protocol state (salts, batch plans, shapes).
    #[error("protocol error: {0}")]
    Protocol(String),
    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),
    /// A serialized message failed to decode.
    #[error("corrupt message: {0}")]
    Corrupt(String),
    /// Metric undefined for the given inputs (e.g. single-class AUC).
    #[error("metric undefined: {0}")]
    Undefined(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
