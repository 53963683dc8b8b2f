use polyhe_ckks::CkksError;
use polyhe_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    /// A check ran and did not pass.
    #[error("check failed: {0}")]
    Check(String),

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl From<CkksError> for CliError {
    fn from(e: CkksError) -> Self {
        Self::Core(e.into())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// 0 success, 1 usage, 2 validation/parse, 3 precision/depth, 4 internal.
pub fn exit_code(e: &CliError) -> i32 {
    match e {
        CliError::Usage(_) => 1,
        CliError::Check(_) => 2,
        CliError::Core(c) => match c {
            CoreError::Argument(_) => 1,
            CoreError::Domain(_)
            | CoreError::Parse { .. }
            | CoreError::Shape(_)
            | CoreError::Validation(_)
            | CoreError::Io { .. } => 2,
            CoreError::Precision(_) => 3,
            CoreError::Numerical(_) | CoreError::Internal(_) => 4,
            CoreError::Ckks(k) => match k {
                CkksError::Parameter(_) => 1,
                CkksError::Capacity { .. } | CkksError::Serialization(_) => 2,
                CkksError::Scale(_) | CkksError::DepthExhausted(_) => 3,
                CkksError::State(_) | CkksError::MissingKey(_) => 4,
            },
        },
    }
}
