//! Canonical-embedding encoder.
//!
//! Slot `j` holds the evaluation of the message polynomial at `zeta^(5^j)`,
//! `zeta = exp(i*pi/N)`, so the automorphism `X -> X^5` rotates slots left by one.
//! Only the `N/2` slots of one conjugate half are addressable.

use std::f64::consts::PI;

use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};

use crate::cipher::Plaintext;
use crate::error::{CkksError, Result};
use crate::params::CkksContext;
use crate::poly::RingPoly;

/// Largest scaled coefficient magnitude accepted before RNS conversion.
const MAX_COEFF: f64 = 4.611_686_018_427_388e18; // 2^62

#[derive(Debug, Clone)]
pub struct Encoder {
    n: usize,
    slots: usize,
    rot_group: Vec<usize>,
    ksi: Vec<Complex64>,
}

fn bit_reverse_permute(vals: &mut [Complex64]) {
    let n = vals.len();
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j >= bit {
            j -= bit;
            bit >>= 1;
        }
        j += bit;
        if i < j {
            vals.swap(i, j);
        }
    }
}

impl Encoder {
    pub fn new(n: usize) -> Self {
        let slots = n / 2;
        let m = 2 * n;
        let mut rot_group = Vec::with_capacity(slots);
        let mut g = 1usize;
        for _ in 0..slots {
            rot_group.push(g);
            g = (g * 5) % m;
        }
        let ksi = (0..=m)
            .map(|j| {
                let angle = 2.0 * PI * j as f64 / m as f64;
                Complex64::new(angle.cos(), angle.sin())
            })
            .collect();
        Self {
            n,
            slots,
            rot_group,
            ksi,
        }
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    /// Slot values -> evaluations of the message polynomial, in place.
    fn fft_special(&self, vals: &mut [Complex64]) {
        let size = vals.len();
        let m = 2 * self.n;
        bit_reverse_permute(vals);
        let mut len = 2;
        while len <= size {
            let lenh = len >> 1;
            let lenq = len << 2;
            let gap = m / lenq;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (self.rot_group[j] % lenq) * gap;
                    let u = vals[i + j];
                    let v = vals[i + j + lenh] * self.ksi[idx];
                    vals[i + j] = u + v;
                    vals[i + j + lenh] = u - v;
                }
            }
            len <<= 1;
        }
    }

    fn fft_special_inv(&self, vals: &mut [Complex64]) {
        let size = vals.len();
        let m = 2 * self.n;
        let mut len = size;
        while len >= 2 {
            let lenh = len >> 1;
            let lenq = len << 2;
            let gap = m / lenq;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (lenq - (self.rot_group[j] % lenq)) * gap;
                    let u = vals[i + j] + vals[i + j + lenh];
                    let v = (vals[i + j] - vals[i + j + lenh]) * self.ksi[idx];
                    vals[i + j] = u;
                    vals[i + j + lenh] = v;
                }
            }
            len >>= 1;
        }
        bit_reverse_permute(vals);
        let inv = 1.0 / size as f64;
        for v in vals.iter_mut() {
            *v *= inv;
        }
    }

    /// Real polynomial coefficients (unscaled) whose slots are `values`,
    /// zero-padded to the full slot count.
    pub fn slots_to_coeffs(&self, values: &[Complex64]) -> Vec<f64> {
        assert!(values.len() <= self.slots);
        let mut u = vec![Complex64::zero(); self.slots];
        u[..values.len()].copy_from_slice(values);
        self.fft_special_inv(&mut u);
        let mut coeffs = vec![0.0; self.n];
        for (i, z) in u.iter().enumerate() {
            coeffs[i] = z.re;
            coeffs[i + self.slots] = z.im;
        }
        coeffs
    }

    /// Inverse of [`Self::slots_to_coeffs`].
    pub fn coeffs_to_slots(&self, coeffs: &[f64]) -> Vec<Complex64> {
        assert_eq!(coeffs.len(), self.n);
        let mut u: Vec<Complex64> = (0..self.slots)
            .map(|i| Complex64::new(coeffs[i], coeffs[i + self.slots]))
            .collect();
        self.fft_special(&mut u);
        u
    }
}

impl CkksContext {
    /// Encodes real values at `scale` over the primes of `level`.
    pub fn encode(&self, values: &[f64], scale: f64, level: usize) -> Result<Plaintext> {
        let complex: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.encode_complex(&complex, scale, level)
    }

    pub fn encode_complex(&self, values: &[Complex64], scale: f64, level: usize) -> Result<Plaintext> {
        if values.len() > self.slots() {
            return Err(CkksError::Capacity {
                len: values.len(),
                slots: self.slots(),
            });
        }
        if level > self.top_level() {
            return Err(CkksError::State(format!(
                "level {level} above top level {}",
                self.top_level()
            )));
        }
        if !(scale.is_finite() && scale >= 1.0) {
            return Err(CkksError::Scale(format!("invalid scale {scale}")));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(CkksError::Scale("non-finite input value".into()));
        }
        let limit = MAX_COEFF.min(self.modulus_at_level(level) / 2.0);
        let real = self.encoder().slots_to_coeffs(values);
        let mut coeffs = Vec::with_capacity(real.len());
        for c in real {
            let scaled = (c * scale).round();
            if scaled.abs() >= limit {
                return Err(CkksError::Scale(format!(
                    "scaled coefficient {scaled:e} overflows the level-{level} modulus"
                )));
            }
            coeffs.push(scaled as i64);
        }
        Ok(Plaintext {
            poly: RingPoly::from_signed(self, &coeffs, level + 1),
            scale,
        })
    }

    /// Decodes every slot, keeping real parts.
    pub fn decode(&self, pt: &Plaintext) -> Vec<f64> {
        self.decode_complex(pt).into_iter().map(|z| z.re).collect()
    }

    pub fn decode_complex(&self, pt: &Plaintext) -> Vec<Complex64> {
        let coeffs = self.centered_coeffs(&pt.poly);
        let real: Vec<f64> = coeffs.into_iter().map(|c| c / pt.scale).collect();
        self.encoder().coeffs_to_slots(&real)
    }

    /// CRT-reconstructs the centered integer coefficients of `poly`, as floats.
    pub fn centered_coeffs(&self, poly: &RingPoly) -> Vec<f64> {
        let residues = poly.to_coeffs(self);
        let primes = residues.len();
        let moduli = &self.moduli()[..primes];
        if primes == 1 {
            return residues[0].iter().map(|&x| moduli[0].center(x) as f64).collect();
        }
        let big_q: BigUint = moduli.iter().map(|q| BigUint::from(q.value())).product();
        let half_q = &big_q >> 1u32;
        let basis: Vec<(BigUint, u64)> = moduli
            .iter()
            .map(|q| {
                let q_hat = &big_q / q.value();
                let q_hat_mod = (&q_hat % q.value()).to_u64().expect("fits");
                (q_hat, q.inv(q_hat_mod))
            })
            .collect();
        (0..self.ring_dim())
            .map(|k| {
                let mut acc = BigUint::zero();
                for (i, q) in moduli.iter().enumerate() {
                    let y = q.mul(residues[i][k], basis[i].1);
                    acc += &basis[i].0 * y;
                }
                acc %= &big_q;
                if acc > half_q {
                    -(&big_q - acc).to_f64().expect("finite")
                } else {
                    acc.to_f64().expect("finite")
                }
            })
            .collect()
    }
}
