use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An enumeration or table would exceed its configured budget.
    #[error("capacity exceeded in {what}: required {required}, budget {budget}")]
    Capacity {
        what: &'static str,
        required: u128,
        budget: u128,
    },

    /// Argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A system failed structural validation; the message names the offending index.
    #[error("validation error: {0}")]
    Validation(String),

    /// The modulus does not have the group structure the operation requires.
    #[error("structure error: {0}")]
    Structure(String),

    /// Config document could not be parsed; the message carries the field path.
    #[error("config parse error: {0}")]
    Parse(String),

    /// Operation not implemented for this input shape (documented limitation).
    #[error("unsupported shape: {0}")]
    Unsupported(String),

    /// Input produced no usable data (e.g. every sample filtered out).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
