use polyhe_ckks::CkksError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Bad caller-supplied argument (grid size, degree, weight spec...).
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Malformed input file; `location` names the file and the row or field.
    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("validation failed: {0}")]
    Validation(String),

    /// Decrypted values too noisy to trust.
    #[error("precision failure: {0}")]
    Precision(String),

    #[error(transparent)]
    Ckks(#[from] CkksError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// An invariant broke; indicates a bug rather than bad input.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub(crate) fn parse(location: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Self::Parse {
            location: location.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
