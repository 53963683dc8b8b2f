//! Key material.
//!
//! Key switching is the hybrid variant with a single special prime `P`: the
//! switching key for a source secret `s'` holds, for every data prime `q_j`,
//! an encryption of `P * s'` placed only in the `q_j` residue. Decomposing a
//! polynomial by its RNS residues and summing against these keys yields
//! `P * d * s'` plus small noise, which a division by `P` brings back.
//!
//! [`EvaluationKeys`] is everything an evaluating server may hold. The secret
//! key lives only in [`KeySet`], which a client keeps.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::params::CkksContext;
use crate::poly::RingPoly;
use crate::sampling::{gaussian, ternary, uniform};

/// Ternary secret `s`, stored in NTT form over the whole chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretKey {
    pub(crate) poly: RingPoly,
    pub(crate) coeffs: Vec<i8>,
}

impl SecretKey {
    /// Coefficients in {-1, 0, 1}.
    pub fn coefficients(&self) -> &[i8] {
        &self.coeffs
    }

    pub fn hamming_weight(&self) -> usize {
        self.coeffs.iter().filter(|&&c| c != 0).count()
    }
}

/// RLWE public key `(b, a)` with `b = -a*s + e` over the data primes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKey {
    pub(crate) b: RingPoly,
    pub(crate) a: RingPoly,
}

/// One `(b_j, a_j)` pair per data prime, each spanning the full chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeySwitchKey {
    pub(crate) parts: Vec<(RingPoly, RingPoly)>,
}

/// Switching key for a left rotation by `steps` slots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaloisKey {
    pub(crate) steps: usize,
    pub(crate) element: usize,
    pub(crate) perm: Vec<u32>,
    pub(crate) key: KeySwitchKey,
}

impl GaloisKey {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn galois_element(&self) -> usize {
        self.element
    }
}

/// Public evaluation material: safe to hand to an untrusted evaluator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvaluationKeys {
    pub(crate) public: PublicKey,
    pub(crate) relin: KeySwitchKey,
    pub(crate) galois: BTreeMap<usize, GaloisKey>,
}

impl EvaluationKeys {
    pub fn public_key(&self) -> &PublicKey {
        &self.public
    }

    /// Rotation steps with key material.
    pub fn rotation_steps(&self) -> Vec<usize> {
        self.galois.keys().copied().collect()
    }

    pub fn galois_key(&self, steps: usize) -> Option<&GaloisKey> {
        self.galois.get(&steps)
    }

    /// Drops rotation keys whose step fails `keep`, e.g. to ship less key material.
    pub fn retain_rotation_steps(&mut self, keep: impl Fn(usize) -> bool) {
        self.galois.retain(|&s, _| keep(s));
    }
}

/// Full key set, secret included.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeySet {
    pub(crate) secret: SecretKey,
    pub(crate) eval: EvaluationKeys,
}

impl KeySet {
    pub fn secret_key(&self) -> &SecretKey {
        &self.secret
    }

    pub fn evaluation_keys(&self) -> &EvaluationKeys {
        &self.eval
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.eval.public
    }
}

/// Power-of-two rotation steps below the slot count.
pub fn default_rotation_steps(slots: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |s| Some(s * 2))
        .take_while(|&s| s < slots)
        .collect()
}

/// Deterministic key generation: all randomness derives from `seed`.
pub fn keygen(ctx: &CkksContext, seed: u64) -> KeySet {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = ctx.ring_dim();
    let all = ctx.moduli().len();
    let data = all - 1;

    let s_coeffs = ternary(&mut rng, n);
    let secret = SecretKey {
        poly: RingPoly::from_signed(ctx, &s_coeffs, all),
        coeffs: s_coeffs.iter().map(|&c| c as i8).collect(),
    };

    let a = uniform(&mut rng, ctx, data);
    let e = RingPoly::from_signed(ctx, &gaussian(&mut rng, n), data);
    let mut b = a.mul(ctx, &secret.poly.truncated(data));
    b.negate(ctx);
    b.add_assign(ctx, &e);
    let public = PublicKey { b, a };

    let s_squared = secret.poly.mul(ctx, &secret.poly);
    let relin = switch_key(ctx, &mut rng, &secret.poly, &s_squared);

    let mut galois = BTreeMap::new();
    for steps in default_rotation_steps(ctx.slots()) {
        let element = ctx.galois_element(steps);
        let perm = ctx.tables(0).galois_permutation(element);
        let rotated = secret.poly.permuted(&perm);
        let key = switch_key(ctx, &mut rng, &secret.poly, &rotated);
        galois.insert(
            steps,
            GaloisKey {
                steps,
                element,
                perm,
                key,
            },
        );
    }

    KeySet {
        secret,
        eval: EvaluationKeys {
            public,
            relin,
            galois,
        },
    }
}

/// Key switching from `source` to `secret`.
fn switch_key(ctx: &CkksContext, rng: &mut ChaCha20Rng, secret: &RingPoly, source: &RingPoly) -> KeySwitchKey {
    let n = ctx.ring_dim();
    let all = ctx.moduli().len();
    let data = all - 1;
    let parts = (0..data)
        .map(|j| {
            let a = uniform(rng, ctx, all);
            let e = RingPoly::from_signed(ctx, &gaussian(rng, n), all);
            let mut b = a.mul(ctx, secret);
            b.negate(ctx);
            b.add_assign(ctx, &e);
            let q = &ctx.moduli()[j];
            let p_mod = ctx.special_mod(j);
            for (x, &s) in b.comps[j].iter_mut().zip(&source.comps[j]) {
                *x = q.add(*x, q.mul(p_mod, s));
            }
            (b, a)
        })
        .collect();
    KeySwitchKey { parts }
}
