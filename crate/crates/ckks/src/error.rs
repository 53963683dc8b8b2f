use thiserror::Error;

/// Errors raised by the CKKS layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CkksError {
    /// Invalid or unsupported parameter set.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Input vector does not fit into the available slots.
    #[error("capacity error: {len} values exceed {slots} slots")]
    Capacity { len: usize, slots: usize },

    /// Scaled coefficients overflow the coefficient modulus, or the scale is unusable.
    #[error("scale error: {0}")]
    Scale(String),

    /// Operands disagree on level or scale, or an operation is applied in the wrong state.
    #[error("state error: {0}")]
    State(String),

    /// No modulus-chain level is left for a rescale.
    #[error("depth exhausted: {0}")]
    DepthExhausted(String),

    /// A rotation step has no key-switching material.
    #[error("missing galois key for rotation step {0}")]
    MissingKey(usize),

    /// Malformed or incompatible serialized data.
    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, CkksError>;
