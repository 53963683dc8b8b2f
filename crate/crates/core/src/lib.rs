//! Polynomial activations, batch-norm folding and hybrid encrypted inference
//! on top of `polyhe-ckks`.

pub mod approx;
pub mod error;
pub mod inference;
pub mod model;

pub use error::{CoreError, Result};
