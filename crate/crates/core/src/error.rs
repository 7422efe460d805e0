use thiserror::Error;

/// Crate-wide error type. Variants are grouped by the layer that raises them
/// so tests can match on the failure class.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or layer shape disagreement.
    #[error("shape error: {0}")]
    Shape(String),

    /// API misuse (e.g. backward from a non-scalar loss).
    #[error("usage error: {0}")]
    Usage(String),

    /// Bad configuration value or inconsistent settings.
    #[error("config error: {0}")]
    Config(String),

    /// Text-format parse failure; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Dataset row validation failures, collected with row numbers.
    #[error("validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),

    /// A required record is missing (e.g. contextual vectors for an id).
    #[error("lookup error: {0}")]
    Lookup(String),

    /// Bad input data discovered at compute time (e.g. empty field).
    #[error("data error: {0}")]
    Data(String),

    /// Model file has a wrong magic string or unsupported version.
    #[error("model format error: {0}")]
    ModelVersion(String),

    /// Model file ended early.
    #[error("model file truncated: {0}")]
    ModelTruncated(String),

    /// Model file header disagrees with its payload.
    #[error("model file integrity error: {0}")]
    ModelIntegrity(String),

    /// A forward function expected to be deterministic was not.
    #[error("nondeterministic forward: {0}")]
    Nondeterministic(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that indicate caller/config mistakes rather than
    /// runtime failures; the CLI maps these to exit code 2.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_) | Error::Config(_))
    }
}
