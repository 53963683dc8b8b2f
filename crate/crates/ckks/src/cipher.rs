use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{CkksError, Result};
use crate::keys::{PublicKey, SecretKey};
use crate::params::CkksContext;
use crate::poly::RingPoly;
use crate::sampling::{gaussian, ternary};

/// Encoded message at a fixed scale and level.
#[derive(Clone, Debug, PartialEq)]
pub struct Plaintext {
    pub(crate) poly: RingPoly,
    pub(crate) scale: f64,
}

impl Plaintext {
    pub fn level(&self) -> usize {
        self.poly.level()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn poly(&self) -> &RingPoly {
        &self.poly
    }
}

/// Two ring elements `(c0, c1)` with `c0 + c1*s ≈ m`; three transiently after a
/// ciphertext product.
#[derive(Clone, Debug, PartialEq)]
pub struct Ciphertext {
    pub(crate) parts: Vec<RingPoly>,
    pub(crate) scale: f64,
}

impl Ciphertext {
    pub fn level(&self) -> usize {
        self.parts[0].level()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn size(&self) -> usize {
        self.parts.len()
    }

    pub fn parts(&self) -> &[RingPoly] {
        &self.parts
    }

    pub fn from_parts(parts: Vec<RingPoly>, scale: f64) -> Self {
        assert!((2..=3).contains(&parts.len()));
        Self { parts, scale }
    }
}

/// Public-key encryption.
///
/// Each call draws from a ChaCha stream selected by `(seed, call counter)`, so a
/// fixed call order reproduces ciphertexts bit for bit. Concurrent callers
/// that need reproducibility should use one encryptor per thread with its own seed.
#[derive(Debug)]
pub struct Encryptor {
    ctx: Arc<CkksContext>,
    pk: PublicKey,
    seed: u64,
    counter: AtomicU64,
}

impl Encryptor {
    pub fn new(ctx: Arc<CkksContext>, pk: &PublicKey, seed: u64) -> Self {
        Self {
            ctx,
            pk: pk.clone(),
            seed,
            counter: AtomicU64::new(0),
        }
    }

    pub fn context(&self) -> &Arc<CkksContext> {
        &self.ctx
    }

    /// Encrypts a top-level plaintext.
    pub fn encrypt(&self, pt: &Plaintext) -> Result<Ciphertext> {
        let ctx = &*self.ctx;
        if pt.level() != ctx.top_level() {
            return Err(CkksError::State(format!(
                "fresh encryption needs a level-{} plaintext, got level {}",
                ctx.top_level(),
                pt.level()
            )));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.counter.fetch_add(1, Ordering::Relaxed));

        let n = ctx.ring_dim();
        let primes = ctx.top_level() + 1;
        let v = RingPoly::from_signed(ctx, &ternary(&mut rng, n), primes);
        let e0 = RingPoly::from_signed(ctx, &gaussian(&mut rng, n), primes);
        let e1 = RingPoly::from_signed(ctx, &gaussian(&mut rng, n), primes);

        let mut c0 = v.mul(ctx, &self.pk.b);
        c0.add_assign(ctx, &e0);
        c0.add_assign(ctx, &pt.poly);
        let mut c1 = v.mul(ctx, &self.pk.a);
        c1.add_assign(ctx, &e1);
        Ok(Ciphertext {
            parts: vec![c0, c1],
            scale: pt.scale,
        })
    }

    /// Encodes at the default scale and top level, then encrypts.
    pub fn encrypt_values(&self, values: &[f64]) -> Result<Ciphertext> {
        let ctx = &*self.ctx;
        let pt = ctx.encode(values, ctx.params().scale(), ctx.top_level())?;
        self.encrypt(&pt)
    }
}

/// Secret-key decryption.
#[derive(Debug, Clone)]
pub struct Decryptor {
    ctx: Arc<CkksContext>,
    sk: SecretKey,
}

impl Decryptor {
    pub fn new(ctx: Arc<CkksContext>, sk: &SecretKey) -> Self {
        Self { ctx, sk: sk.clone() }
    }

    pub fn decrypt(&self, ct: &Ciphertext) -> Plaintext {
        let ctx = &*self.ctx;
        let primes = ct.level() + 1;
        let s = self.sk.poly.truncated(primes);
        let mut m = ct.parts[0].clone();
        let mut s_pow = s.clone();
        for part in &ct.parts[1..] {
            m.add_assign(ctx, &part.mul(ctx, &s_pow));
            s_pow = s_pow.mul(ctx, &s);
        }
        Plaintext {
            poly: m,
            scale: ct.scale,
        }
    }

    pub fn decrypt_values(&self, ct: &Ciphertext) -> Vec<f64> {
        self.ctx.decode(&self.decrypt(ct))
    }
}
