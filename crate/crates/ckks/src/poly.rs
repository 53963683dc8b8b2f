//! RNS ring elements.
//!
//! A [`RingPoly`] stores one residue vector per prime of a prefix of the
//! modulus chain, always in NTT (evaluation) form. Component `i` is taken
//! modulo prime `i` of the context; a polynomial with `level + 1` components
//! lives at `level`. Key material spans the whole chain, special prime
//! included.

use crate::params::CkksContext;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RingPoly {
    pub(crate) comps: Vec<Vec<u64>>,
}

impl RingPoly {
    pub fn zero(n: usize, primes: usize) -> Self {
        Self {
            comps: vec![vec![0u64; n]; primes],
        }
    }

    /// Builds an element from small signed coefficients over the first `primes` primes.
    pub fn from_signed(ctx: &CkksContext, coeffs: &[i64], primes: usize) -> Self {
        let comps = (0..primes)
            .map(|i| {
                let q = &ctx.moduli()[i];
                let mut v: Vec<u64> = coeffs.iter().map(|&c| q.reduce_i64(c)).collect();
                ctx.tables(i).forward(&mut v);
                v
            })
            .collect();
        Self { comps }
    }

    pub fn level(&self) -> usize {
        self.comps.len() - 1
    }

    pub fn num_primes(&self) -> usize {
        self.comps.len()
    }

    pub fn degree(&self) -> usize {
        self.comps[0].len()
    }

    /// Residues modulo prime `i`, in NTT form.
    pub fn component(&self, i: usize) -> &[u64] {
        &self.comps[i]
    }

    pub fn from_components(comps: Vec<Vec<u64>>) -> Self {
        assert!(!comps.is_empty());
        Self { comps }
    }

    /// Keeps the first `primes` components.
    pub fn truncated(&self, primes: usize) -> Self {
        Self {
            comps: self.comps[..primes].to_vec(),
        }
    }

    pub fn add_assign(&mut self, ctx: &CkksContext, other: &RingPoly) {
        for (i, (a, b)) in self.comps.iter_mut().zip(&other.comps).enumerate() {
            let q = &ctx.moduli()[i];
            for (x, &y) in a.iter_mut().zip(b) {
                *x = q.add(*x, y);
            }
        }
    }

    pub fn sub_assign(&mut self, ctx: &CkksContext, other: &RingPoly) {
        for (i, (a, b)) in self.comps.iter_mut().zip(&other.comps).enumerate() {
            let q = &ctx.moduli()[i];
            for (x, &y) in a.iter_mut().zip(b) {
                *x = q.sub(*x, y);
            }
        }
    }

    pub fn negate(&mut self, ctx: &CkksContext) {
        for (i, a) in self.comps.iter_mut().enumerate() {
            let q = &ctx.moduli()[i];
            for x in a.iter_mut() {
                *x = q.neg(*x);
            }
        }
    }

    /// Pointwise product over the primes both operands share.
    pub fn mul(&self, ctx: &CkksContext, other: &RingPoly) -> RingPoly {
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .enumerate()
            .map(|(i, (a, b))| {
                let q = &ctx.moduli()[i];
                a.iter().zip(b).map(|(&x, &y)| q.mul(x, y)).collect()
            })
            .collect();
        RingPoly { comps }
    }

    pub fn mul_assign(&mut self, ctx: &CkksContext, other: &RingPoly) {
        for (i, (a, b)) in self.comps.iter_mut().zip(&other.comps).enumerate() {
            let q = &ctx.moduli()[i];
            for (x, &y) in a.iter_mut().zip(b) {
                *x = q.mul(*x, y);
            }
        }
    }

    /// Applies a slot permutation from [`crate::ntt::NttTables::galois_permutation`].
    pub fn permuted(&self, perm: &[u32]) -> RingPoly {
        let comps = self
            .comps
            .iter()
            .map(|a| perm.iter().map(|&p| a[p as usize]).collect())
            .collect();
        RingPoly { comps }
    }

    /// Coefficient-domain residues, one vector per prime.
    pub fn to_coeffs(&self, ctx: &CkksContext) -> Vec<Vec<u64>> {
        self.comps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let mut v = a.clone();
                ctx.tables(i).inverse(&mut v);
                v
            })
            .collect()
    }

    /// Divides by the last active prime with rounding and drops it.
    pub fn rescale_last(&mut self, ctx: &CkksContext) {
        let last = self.level();
        assert!(last >= 1);
        let mut top = self.comps.pop().expect("non-empty");
        ctx.tables(last).inverse(&mut top);
        let q_last = &ctx.moduli()[last];
        let centered: Vec<i64> = top.iter().map(|&x| q_last.center(x)).collect();
        for (i, comp) in self.comps.iter_mut().enumerate() {
            let q = &ctx.moduli()[i];
            let mut r: Vec<u64> = centered.iter().map(|&c| q.reduce_i64(c)).collect();
            ctx.tables(i).forward(&mut r);
            let inv = ctx.inv_last(last, i);
            let inv_shoup = q.shoup(inv);
            for (x, &y) in comp.iter_mut().zip(&r) {
                *x = q.mul_shoup(q.sub(*x, y), inv, inv_shoup);
            }
        }
    }
}
