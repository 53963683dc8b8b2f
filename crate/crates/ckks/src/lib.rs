//! Leveled RNS-CKKS for approximate arithmetic on encrypted real vectors.
//!
//! Ring `Z_Q[X]/(X^N + 1)` in double-CRT form (one NTT-friendly prime per
//! modulus-chain entry), canonical-embedding encoding into `N/2` slots,
//! public-key encryption, plaintext and ciphertext products with immediate
//! rescaling, and slot rotations via Galois automorphisms with hybrid key
//! switching. There is no bootstrapping.
//!
//! **Research-grade code.** Nothing here is constant time, security of the
//! parameter presets is not independently estimated, and the sampler is a
//! rounded Gaussian. Do not use it to protect real data.

pub mod arith;
pub mod cipher;
pub mod encoding;
pub mod error;
pub mod eval;
pub mod keys;
pub mod ntt;
pub mod params;
pub mod poly;
pub mod sampling;
pub mod serial;

pub use cipher::{Ciphertext, Decryptor, Encryptor, Plaintext};
pub use error::{CkksError, Result};
pub use eval::Evaluator;
pub use keys::{keygen, EvaluationKeys, KeySet, PublicKey, SecretKey};
pub use params::{CkksContext, CkksParams, PRESET_NAMES};
pub use poly::RingPoly;
pub use serial::Serializable;
