//! Binary serialization of ciphertexts and keys.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! header   : b"PHCK" | version: u16 | kind: u8 | reserved: u8
//! ring_dim : u64
//! payload  : kind-specific, built from
//!     u64 array  = len: u64 | len x u64
//!     ring poly  = primes: u64 | primes x (u64 array of ring_dim residues, NTT form)
//! ```
//!
//! Payloads: ciphertext = scale (f64 bits) | parts: u64 | parts x poly;
//! public key = b | a; secret key = coeffs (u64 array of i64 bit patterns) | poly;
//! switching key = count: u64 | count x (b | a);
//! evaluation keys = public key | relin key | count: u64 |
//! count x (steps: u64 | element: u64 | perm: u64 array | switching key);
//! key set = secret key | evaluation keys.
//!
//! The format is versioned but not promised to stay stable across versions.

use std::collections::BTreeMap;

use crate::cipher::Ciphertext;
use crate::error::{CkksError, Result};
use crate::keys::{EvaluationKeys, GaloisKey, KeySet, KeySwitchKey, PublicKey, SecretKey};
use crate::poly::RingPoly;

const MAGIC: &[u8; 4] = b"PHCK";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
enum Kind {
    Ciphertext = 1,
    PublicKey = 2,
    SecretKey = 3,
    EvaluationKeys = 4,
    KeySet = 5,
}

/// Types with a stable binary representation.
pub trait Serializable: Sized {
    fn to_bytes(&self) -> Vec<u8>;
    fn from_bytes(bytes: &[u8]) -> Result<Self>;
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new(kind: Kind, ring_dim: usize) -> Self {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.push(kind as u8);
        buf.push(0);
        let mut w = Self { buf };
        w.u64(ring_dim as u64);
        w
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn array(&mut self, vals: impl ExactSizeIterator<Item = u64>) {
        self.u64(vals.len() as u64);
        for v in vals {
            self.u64(v);
        }
    }

    fn poly(&mut self, p: &RingPoly) {
        self.u64(p.comps.len() as u64);
        for c in &p.comps {
            self.array(c.iter().copied());
        }
    }

    fn switch_key(&mut self, k: &KeySwitchKey) {
        self.u64(k.parts.len() as u64);
        for (b, a) in &k.parts {
            self.poly(b);
            self.poly(a);
        }
    }

    fn public_key(&mut self, pk: &PublicKey) {
        self.poly(&pk.b);
        self.poly(&pk.a);
    }

    fn secret_key(&mut self, sk: &SecretKey) {
        self.array(sk.coeffs.iter().map(|&c| c as i64 as u64));
        self.poly(&sk.poly);
    }

    fn eval_keys(&mut self, ek: &EvaluationKeys) {
        self.public_key(&ek.public);
        self.switch_key(&ek.relin);
        self.u64(ek.galois.len() as u64);
        for gk in ek.galois.values() {
            self.u64(gk.steps as u64);
            self.u64(gk.element as u64);
            self.array(gk.perm.iter().map(|&p| p as u64));
            self.switch_key(&gk.key);
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    ring_dim: usize,
}

fn malformed(msg: impl Into<String>) -> CkksError {
    CkksError::Serialization(msg.into())
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], kind: Kind) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(malformed("bad magic"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(malformed(format!("unsupported format version {version}")));
        }
        if bytes[6] != kind as u8 {
            return Err(malformed(format!("expected object kind {:?}, found tag {}", kind, bytes[6])));
        }
        let mut r = Self {
            bytes,
            pos: 8,
            ring_dim: 0,
        };
        let n = r.u64()? as usize;
        if !n.is_power_of_two() || n > 1 << 17 {
            return Err(malformed(format!("implausible ring dimension {n}")));
        }
        r.ring_dim = n;
        Ok(r)
    }

    fn u64(&mut self) -> Result<u64> {
        let end = self.pos + 8;
        let chunk = self.bytes.get(self.pos..end).ok_or_else(|| malformed("truncated input"))?;
        self.pos = end;
        Ok(u64::from_le_bytes(chunk.try_into().expect("8 bytes")))
    }

    fn len(&mut self, max: usize) -> Result<usize> {
        let len = self.u64()? as usize;
        if len > max {
            return Err(malformed(format!("length {len} exceeds limit {max}")));
        }
        Ok(len)
    }

    fn array(&mut self, max: usize) -> Result<Vec<u64>> {
        let len = self.len(max)?;
        (0..len).map(|_| self.u64()).collect()
    }

    fn poly(&mut self) -> Result<RingPoly> {
        let primes = self.len(64)?;
        if primes == 0 {
            return Err(malformed("ring element without components"));
        }
        let comps = (0..primes)
            .map(|_| {
                let c = self.array(self.ring_dim)?;
                if c.len() != self.ring_dim {
                    return Err(malformed("component length differs from ring dimension"));
                }
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RingPoly { comps })
    }

    fn switch_key(&mut self) -> Result<KeySwitchKey> {
        let count = self.len(64)?;
        let parts = (0..count)
            .map(|_| Ok((self.poly()?, self.poly()?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(KeySwitchKey { parts })
    }

    fn public_key(&mut self) -> Result<PublicKey> {
        Ok(PublicKey {
            b: self.poly()?,
            a: self.poly()?,
        })
    }

    fn secret_key(&mut self) -> Result<SecretKey> {
        let coeffs = self
            .array(self.ring_dim)?
            .into_iter()
            .map(|c| {
                let c = c as i64;
                if (-1..=1).contains(&c) {
                    Ok(c as i8)
                } else {
                    Err(malformed("secret coefficient outside {-1, 0, 1}"))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SecretKey {
            coeffs,
            poly: self.poly()?,
        })
    }

    fn eval_keys(&mut self) -> Result<EvaluationKeys> {
        let public = self.public_key()?;
        let relin = self.switch_key()?;
        let count = self.len(64)?;
        let mut galois = BTreeMap::new();
        for _ in 0..count {
            let steps = self.u64()? as usize;
            let element = self.u64()? as usize;
            let perm = self
                .array(self.ring_dim)?
                .into_iter()
                .map(|p| u32::try_from(p).map_err(|_| malformed("permutation entry out of range")))
                .collect::<Result<Vec<_>>>()?;
            let key = self.switch_key()?;
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
        Ok(EvaluationKeys { public, relin, galois })
    }

    fn finish<T>(self, value: T) -> Result<T> {
        if self.pos != self.bytes.len() {
            return Err(malformed("trailing bytes"));
        }
        Ok(value)
    }
}

impl Serializable for Ciphertext {
    fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(Kind::Ciphertext, self.parts[0].degree());
        w.u64(self.scale.to_bits());
        w.u64(self.parts.len() as u64);
        for p in &self.parts {
            w.poly(p);
        }
        w.buf
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, Kind::Ciphertext)?;
        let scale = f64::from_bits(r.u64()?);
        let count = r.len(3)?;
        if count < 2 {
            return Err(malformed("ciphertext needs two or three parts"));
        }
        let parts = (0..count).map(|_| r.poly()).collect::<Result<Vec<_>>>()?;
        if parts.iter().any(|p| p.level() != parts[0].level()) {
            return Err(malformed("ciphertext parts at different levels"));
        }
        r.finish(Ciphertext { parts, scale })
    }
}

impl Serializable for PublicKey {
    fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(Kind::PublicKey, self.b.degree());
        w.public_key(self);
        w.buf
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, Kind::PublicKey)?;
        let pk = r.public_key()?;
        r.finish(pk)
    }
}

impl Serializable for SecretKey {
    fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(Kind::SecretKey, self.poly.degree());
        w.secret_key(self);
        w.buf
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, Kind::SecretKey)?;
        let sk = r.secret_key()?;
        r.finish(sk)
    }
}

impl Serializable for EvaluationKeys {
    fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(Kind::EvaluationKeys, self.public.b.degree());
        w.eval_keys(self);
        w.buf
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, Kind::EvaluationKeys)?;
        let ek = r.eval_keys()?;
        r.finish(ek)
    }
}

impl Serializable for KeySet {
    fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(Kind::KeySet, self.secret.poly.degree());
        w.secret_key(&self.secret);
        w.eval_keys(&self.eval);
        w.buf
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, Kind::KeySet)?;
        let secret = r.secret_key()?;
        let eval = r.eval_keys()?;
        r.finish(KeySet { secret, eval })
    }
}
