//! Homomorphic operations on ciphertexts. An [`Evaluator`] only ever sees
//! [`EvaluationKeys`]; it cannot decrypt.

use std::borrow::Cow;
use std::iter;

use crate::cipher::{Ciphertext, Plaintext};
use crate::error::{CkksError, Result};
use crate::keys::{EvaluationKeys, KeySwitchKey};
use crate::params::CkksContext;
use crate::poly::RingPoly;

/// Relative scale mismatch tolerated by additions.
pub const SCALE_TOLERANCE: f64 = 1.0 / (1u64 << 20) as f64;

#[derive(Clone, Copy)]
pub struct Evaluator<'a> {
    ctx: &'a CkksContext,
    keys: &'a EvaluationKeys,
}

fn scales_match(a: f64, b: f64) -> bool {
    (a - b).abs() <= SCALE_TOLERANCE * a.max(b)
}

impl<'a> Evaluator<'a> {
    pub fn new(ctx: &'a CkksContext, keys: &'a EvaluationKeys) -> Self {
        Self { ctx, keys }
    }

    pub fn context(&self) -> &'a CkksContext {
        self.ctx
    }

    fn check_compatible(&self, a_level: usize, a_scale: f64, b_level: usize, b_scale: f64) -> Result<()> {
        if a_level != b_level {
            return Err(CkksError::State(format!("level mismatch: {a_level} vs {b_level}")));
        }
        if !scales_match(a_scale, b_scale) {
            return Err(CkksError::State(format!("scale mismatch: {a_scale:e} vs {b_scale:e}")));
        }
        Ok(())
    }

    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.check_compatible(a.level(), a.scale, b.level(), b.scale)?;
        let (long, short) = if a.size() >= b.size() { (a, b) } else { (b, a) };
        let mut parts = long.parts.clone();
        for (p, q) in parts.iter_mut().zip(&short.parts) {
            p.add_assign(self.ctx, q);
        }
        Ok(Ciphertext { parts, scale: a.scale })
    }

    pub fn sub(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.add(a, &self.negate(b))
    }

    pub fn negate(&self, a: &Ciphertext) -> Ciphertext {
        let mut out = a.clone();
        for p in out.parts.iter_mut() {
            p.negate(self.ctx);
        }
        out
    }

    pub fn add_plain(&self, ct: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
        self.check_compatible(ct.level(), ct.scale, pt.level(), pt.scale)?;
        let mut out = ct.clone();
        out.parts[0].add_assign(self.ctx, &pt.poly);
        Ok(out)
    }

    /// Adds a real constant to every slot.
    pub fn add_const(&self, ct: &Ciphertext, value: f64) -> Result<Ciphertext> {
        let pt = self.ctx.encode(&vec![value; self.ctx.slots()], ct.scale, ct.level())?;
        self.add_plain(ct, &pt)
    }

    /// Slotwise product with a plaintext, rescaled by one level.
    pub fn mul_plain(&self, ct: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
        if ct.level() != pt.level() {
            return Err(CkksError::State(format!(
                "level mismatch: ciphertext {} vs plaintext {}",
                ct.level(),
                pt.level()
            )));
        }
        if ct.level() == 0 {
            return Err(CkksError::DepthExhausted("plaintext product needs a level to rescale".into()));
        }
        let parts = ct.parts.iter().map(|p| p.mul(self.ctx, &pt.poly)).collect();
        self.rescale(&Ciphertext {
            parts,
            scale: ct.scale * pt.scale,
        })
    }

    /// Multiplies by an encoding of `values` made at the ciphertext's scale and level.
    pub fn mul_values(&self, ct: &Ciphertext, values: &[f64]) -> Result<Ciphertext> {
        let pt = self.ctx.encode(values, ct.scale, ct.level())?;
        self.mul_plain(ct, &pt)
    }

    /// Ciphertext product, relinearized and rescaled.
    pub fn mul(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        if a.size() != 2 || b.size() != 2 {
            return Err(CkksError::State("ciphertext product expects two-part operands".into()));
        }
        if a.level() != b.level() {
            return Err(CkksError::State(format!("level mismatch: {} vs {}", a.level(), b.level())));
        }
        if a.level() == 0 {
            return Err(CkksError::DepthExhausted("ciphertext product needs a level to rescale".into()));
        }
        let ctx = self.ctx;
        let d0 = a.parts[0].mul(ctx, &b.parts[0]);
        let mut d1 = a.parts[0].mul(ctx, &b.parts[1]);
        d1.add_assign(ctx, &a.parts[1].mul(ctx, &b.parts[0]));
        let d2 = a.parts[1].mul(ctx, &b.parts[1]);
        let product = Ciphertext {
            parts: vec![d0, d1, d2],
            scale: a.scale * b.scale,
        };
        self.rescale(&self.relinearize(&product)?)
    }

    /// Folds a three-part ciphertext back to two parts.
    pub fn relinearize(&self, ct: &Ciphertext) -> Result<Ciphertext> {
        match ct.size() {
            2 => Ok(ct.clone()),
            3 => {
                let (k0, k1) = self.key_switch(&ct.parts[2], &self.keys.relin);
                let mut c0 = ct.parts[0].clone();
                c0.add_assign(self.ctx, &k0);
                let mut c1 = ct.parts[1].clone();
                c1.add_assign(self.ctx, &k1);
                Ok(Ciphertext {
                    parts: vec![c0, c1],
                    scale: ct.scale,
                })
            }
            s => Err(CkksError::State(format!("cannot relinearize a {s}-part ciphertext"))),
        }
    }

    /// Divides by the last active prime, dropping one level.
    pub fn rescale(&self, ct: &Ciphertext) -> Result<Ciphertext> {
        let level = ct.level();
        if level == 0 {
            return Err(CkksError::DepthExhausted("no prime left to rescale by".into()));
        }
        let q_last = self.ctx.moduli()[level].value() as f64;
        let mut parts = ct.parts.clone();
        for p in parts.iter_mut() {
            p.rescale_last(self.ctx);
        }
        Ok(Ciphertext {
            parts,
            scale: ct.scale / q_last,
        })
    }

    /// Rotates slots left by `steps` (negative rotates right), composing
    /// power-of-two rotations.
    pub fn rotate(&self, ct: &Ciphertext, steps: i64) -> Result<Ciphertext> {
        if ct.size() != 2 {
            return Err(CkksError::State("rotate expects a relinearized ciphertext".into()));
        }
        let slots = self.ctx.slots();
        let mut remaining = steps.rem_euclid(slots as i64) as usize;
        let mut out = Cow::Borrowed(ct);
        let mut bit = 1usize;
        while remaining != 0 {
            if remaining & 1 == 1 {
                out = Cow::Owned(self.rotate_pow2(&out, bit)?);
            }
            remaining >>= 1;
            bit <<= 1;
        }
        Ok(out.into_owned())
    }

    fn rotate_pow2(&self, ct: &Ciphertext, steps: usize) -> Result<Ciphertext> {
        let gk = self.keys.galois.get(&steps).ok_or(CkksError::MissingKey(steps))?;
        let mut c0 = ct.parts[0].permuted(&gk.perm);
        let c1 = ct.parts[1].permuted(&gk.perm);
        let (k0, k1) = self.key_switch(&c1, &gk.key);
        c0.add_assign(self.ctx, &k0);
        Ok(Ciphertext {
            parts: vec![c0, k1],
            scale: ct.scale,
        })
    }

    /// Sums the first `width` slots (rounded up to a power of two) into slot 0
    /// with `log2(width)` rotate-and-add steps.
    pub fn sum_slots(&self, ct: &Ciphertext, width: usize) -> Result<Ciphertext> {
        let width = width.max(1).next_power_of_two();
        if width > self.ctx.slots() {
            return Err(CkksError::Capacity {
                len: width,
                slots: self.ctx.slots(),
            });
        }
        let mut acc = ct.clone();
        let mut step = 1;
        while step < width {
            let rotated = self.rotate(&acc, step as i64)?;
            acc = self.add(&acc, &rotated)?;
            step <<= 1;
        }
        Ok(acc)
    }

    /// Inner product of the encrypted vector with plaintext weights `w` of length `d`;
    /// the result sits in slot 0. Consumes one level.
    pub fn dot_plain(&self, ct: &Ciphertext, w: &[f64], d: usize) -> Result<Ciphertext> {
        if w.len() != d {
            return Err(CkksError::State(format!("weight length {} does not match d = {d}", w.len())));
        }
        let padded = d.max(1).next_power_of_two();
        if padded > self.ctx.slots() {
            return Err(CkksError::Capacity {
                len: d,
                slots: self.ctx.slots(),
            });
        }
        let product = self.mul_values(ct, w)?;
        self.sum_slots(&product, padded)
    }

    /// Returns `(k0, k1)` with `k0 + k1*s ≈ d*s'`, where `s'` is the key's source secret.
    fn key_switch(&self, d: &RingPoly, ksk: &KeySwitchKey) -> (RingPoly, RingPoly) {
        let ctx = self.ctx;
        let n = ctx.ring_dim();
        let level = d.level();
        let special = ctx.special_index();
        let targets: Vec<usize> = (0..=level).chain(iter::once(special)).collect();
        let coeffs = d.to_coeffs(ctx);

        let mut acc0 = vec![vec![0u128; n]; targets.len()];
        let mut acc1 = vec![vec![0u128; n]; targets.len()];
        for (j, digit_coeffs) in coeffs.iter().enumerate() {
            let (kb, ka) = &ksk.parts[j];
            for (ti, &t) in targets.iter().enumerate() {
                let digit: Cow<[u64]> = if t == j {
                    Cow::Borrowed(&d.comps[j])
                } else {
                    let q = &ctx.moduli()[t];
                    let mut v: Vec<u64> = digit_coeffs.iter().map(|&x| q.reduce(x)).collect();
                    ctx.tables(t).forward(&mut v);
                    Cow::Owned(v)
                };
                let (b, a) = (&kb.comps[t], &ka.comps[t]);
                for (((x, y), &dg), (&bb, &aa)) in acc0[ti]
                    .iter_mut()
                    .zip(acc1[ti].iter_mut())
                    .zip(digit.iter())
                    .zip(b.iter().zip(a.iter()))
                {
                    *x += dg as u128 * bb as u128;
                    *y += dg as u128 * aa as u128;
                }
            }
        }
        (self.mod_down(acc0, level), self.mod_down(acc1, level))
    }

    /// Reduces accumulators over `q_0..q_level, P` and divides by `P` with rounding.
    fn mod_down(&self, acc: Vec<Vec<u128>>, level: usize) -> RingPoly {
        let ctx = self.ctx;
        let special = ctx.special_index();
        let p = &ctx.moduli()[special];
        let mut last: Vec<u64> = acc[level + 1].iter().map(|&z| p.reduce_u128(z)).collect();
        ctx.tables(special).inverse(&mut last);
        let centered: Vec<i64> = last.iter().map(|&x| p.center(x)).collect();
        let comps = (0..=level)
            .map(|i| {
                let q = &ctx.moduli()[i];
                let mut r: Vec<u64> = centered.iter().map(|&c| q.reduce_i64(c)).collect();
                ctx.tables(i).forward(&mut r);
                let inv = ctx.special_inv(i);
                let inv_shoup = q.shoup(inv);
                acc[i]
                    .iter()
                    .zip(&r)
                    .map(|(&z, &y)| q.mul_shoup(q.sub(q.reduce_u128(z), y), inv, inv_shoup))
                    .collect()
            })
            .collect();
        RingPoly::from_components(comps)
    }
}
