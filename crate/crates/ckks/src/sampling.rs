//! Randomness for key generation and encryption. Everything is driven by a
//! caller-supplied [`ChaCha20Rng`] so a seed fixes every output.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::params::CkksContext;
use crate::poly::RingPoly;

pub const ERROR_STD_DEV: f64 = 3.2;
/// Tail cut for the error distribution, in standard deviations.
const ERROR_TAIL: f64 = 6.0;

/// Uniform element over the first `primes` primes (sampled directly in NTT form,
/// which is uniform as well).
pub fn uniform(rng: &mut ChaCha20Rng, ctx: &CkksContext, primes: usize) -> RingPoly {
    let n = ctx.ring_dim();
    let comps = (0..primes)
        .map(|i| {
            let q = ctx.moduli()[i].value();
            (0..n).map(|_| rng.random_range(0..q)).collect()
        })
        .collect();
    RingPoly::from_components(comps)
}

/// Coefficients uniform over {-1, 0, 1}.
pub fn ternary(rng: &mut ChaCha20Rng, n: usize) -> Vec<i64> {
    (0..n).map(|_| rng.random_range(-1i64..=1)).collect()
}

/// Rounded Gaussian with standard deviation [`ERROR_STD_DEV`], tail-cut at 6 sigma.
pub fn gaussian(rng: &mut ChaCha20Rng, n: usize) -> Vec<i64> {
    let normal = Normal::new(0.0, ERROR_STD_DEV).expect("valid std dev");
    let bound = ERROR_STD_DEV * ERROR_TAIL;
    (0..n)
        .map(|_| loop {
            let x: f64 = normal.sample(rng);
            if x.abs() <= bound {
                break x.round() as i64;
            }
        })
        .collect()
}
