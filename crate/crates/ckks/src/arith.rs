//! Word-sized modular arithmetic and NTT-friendly prime search.
//!
//! All moduli are odd primes below 2^61, so a Barrett reduction of a full
//! 128-bit product needs a single correction step.

/// An odd modulus `q < 2^61` with a precomputed Barrett constant `floor(2^128 / q)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Modulus {
    value: u64,
    ratio_lo: u64,
    ratio_hi: u64,
}

impl Modulus {
    pub fn new(value: u64) -> Self {
        assert!(value > 2 && value < (1 << 61) && value & 1 == 1, "unsupported modulus {value}");
        let ratio = u128::MAX / value as u128;
        Self {
            value,
            ratio_lo: ratio as u64,
            ratio_hi: (ratio >> 64) as u64,
        }
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn bits(&self) -> u32 {
        64 - self.value.leading_zeros()
    }

    /// Reduces a 64-bit word.
    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        let q_hat = ((x as u128 * self.ratio_hi as u128) >> 64) as u64;
        let r = x.wrapping_sub(q_hat.wrapping_mul(self.value));
        csub(r, self.value)
    }

    /// Reduces a full 128-bit value.
    #[inline]
    pub fn reduce_u128(&self, z: u128) -> u64 {
        let z_lo = z as u64;
        let z_hi = (z >> 64) as u64;

        let carry = ((z_lo as u128 * self.ratio_lo as u128) >> 64) as u64;
        let t = z_lo as u128 * self.ratio_hi as u128;
        let (t1, c) = (t as u64).overflowing_add(carry);
        let t3 = ((t >> 64) as u64).wrapping_add(c as u64);

        let t = z_hi as u128 * self.ratio_lo as u128;
        let (_, c) = t1.overflowing_add(t as u64);
        let carry = ((t >> 64) as u64).wrapping_add(c as u64);

        let q_hat = z_hi
            .wrapping_mul(self.ratio_hi)
            .wrapping_add(t3)
            .wrapping_add(carry);
        let r = z_lo.wrapping_sub(q_hat.wrapping_mul(self.value));
        csub(r, self.value)
    }

    /// Reduces a signed integer into `[0, q)`.
    #[inline]
    pub fn reduce_i64(&self, x: i64) -> u64 {
        let r = self.reduce(x.unsigned_abs());
        if x < 0 && r != 0 {
            self.value - r
        } else {
            r
        }
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        csub(a + b, self.value)
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        let d = a.wrapping_sub(b);
        d.min(d.wrapping_add(self.value))
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.value - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 * b as u128)
    }

    /// `floor(w * 2^64 / q)`, the Shoup companion of a fixed multiplicand `w < q`.
    #[inline]
    pub fn shoup(&self, w: u64) -> u64 {
        (((w as u128) << 64) / self.value as u128) as u64
    }

    /// `x * w mod q` for a fixed `w` with Shoup companion `w_shoup`; any `x < 2^64`.
    #[inline]
    pub fn mul_shoup(&self, x: u64, w: u64, w_shoup: u64) -> u64 {
        let hi = ((x as u128 * w_shoup as u128) >> 64) as u64;
        let r = x.wrapping_mul(w).wrapping_sub(hi.wrapping_mul(self.value));
        csub(r, self.value)
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1u64;
        base = self.reduce(base);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Inverse modulo a prime.
    pub fn inv(&self, a: u64) -> u64 {
        debug_assert!(self.reduce(a) != 0);
        self.pow(a, self.value - 2)
    }

    /// Centered lift of a residue into `(-q/2, q/2]`.
    #[inline]
    pub fn center(&self, a: u64) -> i64 {
        if a > self.value / 2 {
            a as i64 - self.value as i64
        } else {
            a as i64
        }
    }
}

/// `x mod q` for `x < 2q`, without a data-dependent branch.
#[inline(always)]
fn csub(x: u64, q: u64) -> u64 {
    x.min(x.wrapping_sub(q))
}

fn mul_mod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod_u64(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod_u64(acc, b, m);
        }
        b = mul_mod_u64(b, b, m);
        e >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &BASES {
        let mut x = pow_mod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_u64(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Picks one distinct prime `p ≡ 1 (mod 2n)` per requested bit length.
///
/// For each length the largest unused candidate below `2^bits` is taken, so the
/// same request always yields the same chain.
pub fn ntt_primes(bit_lengths: &[u32], n: usize) -> Option<Vec<u64>> {
    let step = 2 * n as u64;
    let mut chosen: Vec<u64> = Vec::with_capacity(bit_lengths.len());
    for &bits in bit_lengths {
        if !(2..=61).contains(&bits) {
            return None;
        }
        let upper = 1u64 << bits;
        let lower = 1u64 << (bits - 1);
        let mut candidate = (upper - 1) / step * step + 1;
        if candidate >= upper {
            candidate -= step;
        }
        let found = loop {
            if candidate <= lower {
                break None;
            }
            if !chosen.contains(&candidate) && is_prime(candidate) {
                break Some(candidate);
            }
            candidate -= step;
        }?;
        chosen.push(found);
    }
    Some(chosen)
}

/// Finds a primitive `2n`-th root of unity modulo `q` (requires `q ≡ 1 mod 2n`).
pub fn primitive_root_2n(q: &Modulus, n: usize) -> u64 {
    let two_n = 2 * n as u64;
    let cofactor = (q.value() - 1) / two_n;
    let mut x = 2u64;
    loop {
        let cand = q.pow(x, cofactor);
        // Order divides 2n; it is exactly 2n iff cand^n = -1.
        if q.pow(cand, n as u64) == q.value() - 1 {
            return cand;
        }
        x += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const Q60: u64 = 1152921504606748673; // 60-bit, 1 mod 2^14

    #[test]
    fn primes_are_ntt_friendly_and_distinct() {
        let p = ntt_primes(&[60, 40, 40, 60], 8192).unwrap();
        assert_eq!(p.len(), 4);
        for (&q, &b) in p.iter().zip(&[60u32, 40, 40, 60]) {
            assert!(is_prime(q));
            assert_eq!(q % 16384, 1);
            assert_eq!(64 - q.leading_zeros(), b);
        }
        assert_ne!(p[0], p[3]);
        assert_ne!(p[1], p[2]);
    }

    #[test]
    fn miller_rabin_small_cases() {
        let small: Vec<u64> = (0..60).filter(|&n| is_prime(n)).collect();
        assert_eq!(
            small,
            vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59]
        );
        assert!(!is_prime(3215031751)); // strong pseudoprime to bases 2,3,5,7
        assert!(is_prime(Q60));
    }

    #[test]
    fn root_of_unity_has_exact_order() {
        let q = Modulus::new(ntt_primes(&[40], 1024).unwrap()[0]);
        let psi = primitive_root_2n(&q, 1024);
        assert_eq!(q.pow(psi, 1024), q.value() - 1);
        assert_eq!(q.pow(psi, 2048), 1);
    }

    proptest! {
        #[test]
        fn barrett_matches_native(a in any::<u64>(), b in any::<u64>()) {
            let q = Modulus::new(Q60);
            let z = a as u128 * b as u128;
            prop_assert_eq!(q.reduce_u128(z), (z % Q60 as u128) as u64);
            prop_assert_eq!(q.reduce(a), a % Q60);
        }

        #[test]
        fn shoup_matches_native(x in any::<u64>(), w in 0..Q60) {
            let q = Modulus::new(Q60);
            let expect = ((x as u128 * w as u128) % Q60 as u128) as u64;
            prop_assert_eq!(q.mul_shoup(x, w, q.shoup(w)), expect);
        }

        #[test]
        fn signed_reduction(x in any::<i64>()) {
            let q = Modulus::new(Q60);
            let expect = (x as i128).rem_euclid(Q60 as i128) as u64;
            prop_assert_eq!(q.reduce_i64(x), expect);
        }
    }
}
