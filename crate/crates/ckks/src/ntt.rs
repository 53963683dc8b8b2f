//! Negacyclic number-theoretic transform over `Z_q[X]/(X^N + 1)`.
//!
//! Forward: Cooley-Tukey, natural order in, bit-reversed order out.
//! Inverse: Gentleman-Sande, bit-reversed in, natural out, scaled by `N^-1`.
//! Twiddles are powers of a primitive `2N`-th root `psi`, so no pre/post
//! multiplication by `psi^i` is needed for the negacyclic wrap.

use std::collections::HashMap;

use crate::arith::{primitive_root_2n, Modulus};

#[derive(Clone, Debug)]
pub struct NttTables {
    modulus: Modulus,
    n: usize,
    psi_rev: Vec<u64>,
    psi_rev_shoup: Vec<u64>,
    psi_inv_rev: Vec<u64>,
    psi_inv_rev_shoup: Vec<u64>,
    n_inv: u64,
    n_inv_shoup: u64,
    /// `exponent[i] = e` such that output slot `i` of the forward transform is `a(psi^e)`.
    exponent: Vec<u32>,
    /// Inverse of `exponent`, indexed by odd exponents modulo `2N`.
    index_of_exponent: Vec<u32>,
}

fn bit_reverse(mut x: usize, bits: u32) -> usize {
    let mut r = 0;
    for _ in 0..bits {
        r = (r << 1) | (x & 1);
        x >>= 1;
    }
    r
}

impl NttTables {
    pub fn new(modulus: Modulus, n: usize) -> Self {
        assert!(n.is_power_of_two() && n >= 2);
        assert_eq!((modulus.value() - 1) % (2 * n as u64), 0, "modulus is not NTT friendly");
        let log_n = n.trailing_zeros();
        let psi = primitive_root_2n(&modulus, n);
        let psi_inv = modulus.inv(psi);

        let mut psi_rev = vec![0u64; n];
        let mut psi_inv_rev = vec![0u64; n];
        let mut pw = 1u64;
        let mut pw_inv = 1u64;
        for i in 0..n {
            let r = bit_reverse(i, log_n);
            psi_rev[r] = pw;
            psi_inv_rev[r] = pw_inv;
            pw = modulus.mul(pw, psi);
            pw_inv = modulus.mul(pw_inv, psi_inv);
        }
        let psi_rev_shoup = psi_rev.iter().map(|&w| modulus.shoup(w)).collect();
        let psi_inv_rev_shoup = psi_inv_rev.iter().map(|&w| modulus.shoup(w)).collect();
        let n_inv = modulus.inv(n as u64);

        let mut tables = Self {
            modulus,
            n,
            psi_rev,
            psi_rev_shoup,
            psi_inv_rev,
            psi_inv_rev_shoup,
            n_inv,
            n_inv_shoup: modulus.shoup(n_inv),
            exponent: Vec::new(),
            index_of_exponent: Vec::new(),
        };

        // Locate each evaluation point by transforming X and taking discrete logs.
        let two_n = 2 * n;
        let mut log_table = HashMap::with_capacity(two_n);
        let mut pw = 1u64;
        for e in 0..two_n {
            log_table.insert(pw, e as u32);
            pw = modulus.mul(pw, psi);
        }
        let mut x = vec![0u64; n];
        x[1] = 1;
        tables.forward(&mut x);
        let exponent: Vec<u32> = x.iter().map(|v| log_table[v]).collect();
        let mut index_of_exponent = vec![u32::MAX; two_n];
        for (i, &e) in exponent.iter().enumerate() {
            debug_assert_eq!(e % 2, 1);
            index_of_exponent[e as usize] = i as u32;
        }
        tables.exponent = exponent;
        tables.index_of_exponent = index_of_exponent;
        tables
    }

    #[inline]
    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    /// In-place forward transform. Inputs must be below `4q`; outputs are fully reduced.
    pub fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let q = self.modulus.value();
        let two_q = 2 * q;
        let n = self.n;
        let mut t = n >> 1;
        let mut m = 1;
        // Harvey butterflies: values stay in [0, 4q) between stages.
        while m < n {
            let tw = &self.psi_rev[m..2 * m];
            let tws = &self.psi_rev_shoup[m..2 * m];
            for ((block, &w), &ws) in a.chunks_exact_mut(2 * t).zip(tw).zip(tws) {
                let (lo, hi) = block.split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = (*x).min(x.wrapping_sub(two_q));
                    let v = lazy_mul_shoup(*y, w, ws, q);
                    *x = u + v;
                    *y = u + two_q - v;
                }
            }
            t >>= 1;
            m <<= 1;
        }
        for x in a.iter_mut() {
            let r = (*x).min(x.wrapping_sub(two_q));
            *x = r.min(r.wrapping_sub(q));
        }
    }

    /// In-place inverse transform. Inputs must be below `2q`; outputs are fully reduced.
    pub fn inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let q = self.modulus.value();
        let two_q = 2 * q;
        let n = self.n;
        let mut t = 1;
        let mut m = n;
        // Values stay in [0, 2q) between stages.
        while m > 1 {
            let h = m >> 1;
            let tw = &self.psi_inv_rev[h..m];
            let tws = &self.psi_inv_rev_shoup[h..m];
            for ((block, &w), &ws) in a.chunks_exact_mut(2 * t).zip(tw).zip(tws) {
                let (lo, hi) = block.split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (u, v) = (*x, *y);
                    let s = u + v;
                    *x = s.min(s.wrapping_sub(two_q));
                    *y = lazy_mul_shoup(u + two_q - v, w, ws, q);
                }
            }
            t <<= 1;
            m = h;
        }
        for x in a.iter_mut() {
            let r = lazy_mul_shoup(*x, self.n_inv, self.n_inv_shoup, q);
            *x = r.min(r.wrapping_sub(q));
        }
    }

    /// Index permutation realizing `X -> X^galois` on forward-transformed data:
    /// `out[i] = in[perm[i]]`.
    pub fn galois_permutation(&self, galois: usize) -> Vec<u32> {
        let two_n = 2 * self.n;
        assert_eq!(galois % 2, 1, "galois element must be odd");
        self.exponent
            .iter()
            .map(|&e| self.index_of_exponent[(e as usize * galois) % two_n])
            .collect()
    }
}

/// `x * w mod q` up to one extra `q`: the result lies in `[0, 2q)`.
#[inline(always)]
fn lazy_mul_shoup(x: u64, w: u64, w_shoup: u64, q: u64) -> u64 {
    let hi = ((x as u128 * w_shoup as u128) >> 64) as u64;
    x.wrapping_mul(w).wrapping_sub(hi.wrapping_mul(q))
}

/// Schoolbook negacyclic product, used as a test oracle.
pub fn negacyclic_schoolbook(a: &[u64], b: &[u64], q: &Modulus) -> Vec<u64> {
    let n = a.len();
    let mut out = vec![0u64; n];
    for i in 0..n {
        for j in 0..n {
            let p = q.mul(a[i], b[j]);
            let k = i + j;
            if k < n {
                out[k] = q.add(out[k], p);
            } else {
                out[k - n] = q.sub(out[k - n], p);
            }
        }
    }
    out
}

/// Applies `X -> X^galois` in the coefficient domain.
pub fn automorphism_coeffs(a: &[u64], galois: usize, q: &Modulus) -> Vec<u64> {
    let n = a.len();
    let mut out = vec![0u64; n];
    for (i, &c) in a.iter().enumerate() {
        let k = (i * galois) % (2 * n);
        if k < n {
            out[k] = c;
        } else {
            out[k - n] = q.neg(c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::ntt_primes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_poly(rng: &mut ChaCha20Rng, n: usize, q: u64) -> Vec<u64> {
        (0..n).map(|_| rng.random_range(0..q)).collect()
    }

    #[test]
    fn roundtrip() {
        let n = 1024;
        let q = Modulus::new(ntt_primes(&[60], n).unwrap()[0]);
        let t = NttTables::new(q, n);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let a = random_poly(&mut rng, n, q.value());
        let mut b = a.clone();
        t.forward(&mut b);
        assert_ne!(a, b);
        t.inverse(&mut b);
        assert_eq!(a, b);
    }

    #[test]
    fn forward_outputs_are_evaluations() {
        let n = 16;
        let q = Modulus::new(ntt_primes(&[30], n).unwrap()[0]);
        let t = NttTables::new(q, n);
        let psi = primitive_root_2n(&q, n);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let a = random_poly(&mut rng, n, q.value());
        let mut fa = a.clone();
        t.forward(&mut fa);
        for i in 0..n {
            let x = q.pow(psi, t.exponent[i] as u64);
            let mut acc = 0;
            for &c in a.iter().rev() {
                acc = q.add(q.mul(acc, x), c);
            }
            assert_eq!(fa[i], acc);
        }
    }

    #[test]
    fn multiplication_matches_schoolbook() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for &n in &[2usize, 4, 8, 16, 32, 64] {
            for &bits in &[30u32, 40, 60] {
                let q = Modulus::new(ntt_primes(&[bits], n).unwrap()[0]);
                let t = NttTables::new(q, n);
                for _ in 0..20 {
                    let a = random_poly(&mut rng, n, q.value());
                    let b = random_poly(&mut rng, n, q.value());
                    let (mut fa, mut fb) = (a.clone(), b.clone());
                    t.forward(&mut fa);
                    t.forward(&mut fb);
                    let mut c: Vec<u64> = fa.iter().zip(&fb).map(|(&x, &y)| q.mul(x, y)).collect();
                    t.inverse(&mut c);
                    assert_eq!(c, negacyclic_schoolbook(&a, &b, &q), "n={n} bits={bits}");
                }
            }
        }
    }

    #[test]
    fn galois_permutation_matches_coefficient_automorphism() {
        let n = 64;
        let q = Modulus::new(ntt_primes(&[40], n).unwrap()[0]);
        let t = NttTables::new(q, n);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let a = random_poly(&mut rng, n, q.value());
        for &g in &[5usize, 25, 2 * n - 1, 3] {
            let mut fa = a.clone();
            t.forward(&mut fa);
            let perm = t.galois_permutation(g);
            let mut moved: Vec<u64> = perm.iter().map(|&p| fa[p as usize]).collect();
            t.inverse(&mut moved);
            assert_eq!(moved, automorphism_coeffs(&a, g, &q));
        }
    }
}
