use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::arith::{ntt_primes, Modulus};
use crate::encoding::Encoder;
use crate::error::{CkksError, Result};
use crate::ntt::NttTables;

pub const SUPPORTED_RING_DIMS: [usize; 5] = [1024, 2048, 4096, 8192, 16384];

/// Named parameter presets accepted by [`CkksParams::preset`].
pub const PRESET_NAMES: [&str; 3] = ["cifar10-paper", "cifar100-paper", "ci-small"];

/// CKKS parameter set.
///
/// `coeff_mod_bits` lists the prime sizes of the whole chain. The last entry is
/// the key-switching ("special") prime and never carries ciphertext data, so a
/// chain of `k` primes supports `k - 2` rescales.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CkksParams {
    pub ring_dim: usize,
    pub coeff_mod_bits: Vec<u32>,
    pub scale_log2: u32,
    /// Informational only; lattice security is not estimated here.
    pub security_claim: String,
}

impl CkksParams {
    pub fn new(ring_dim: usize, coeff_mod_bits: Vec<u32>, scale_log2: u32) -> Result<Self> {
        let params = Self {
            ring_dim,
            coeff_mod_bits,
            scale_log2,
            security_claim: "unverified".into(),
        };
        params.validate()?;
        Ok(params)
    }

    /// Looks up a named preset.
    pub fn preset(name: &str) -> Result<Self> {
        let (n, bits, scale, claim) = match name {
            "cifar10-paper" => (8192, vec![60, 40, 40, 60], 40, "128-bit (library default, not independently estimated)"),
            "cifar100-paper" => (16384, vec![60, 40, 60], 40, "128-bit (library default, not independently estimated)"),
            "ci-small" => (1024, vec![40, 30, 40], 30, "none (test preset)"),
            other => {
                return Err(CkksError::Parameter(format!(
                    "unknown preset '{other}'; available presets: {}",
                    PRESET_NAMES.join(", ")
                )))
            }
        };
        let params = Self {
            ring_dim: n,
            coeff_mod_bits: bits,
            scale_log2: scale,
            security_claim: claim.into(),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !SUPPORTED_RING_DIMS.contains(&self.ring_dim) {
            return Err(CkksError::Parameter(format!(
                "ring dimension {} not in {:?}",
                self.ring_dim, SUPPORTED_RING_DIMS
            )));
        }
        if self.coeff_mod_bits.len() < 2 {
            return Err(CkksError::Parameter(
                "modulus chain needs at least one data prime and one special prime".into(),
            ));
        }
        if let Some(b) = self.coeff_mod_bits.iter().find(|b| !(30..=60).contains(*b)) {
            return Err(CkksError::Parameter(format!("prime size {b} outside [30, 60] bits")));
        }
        let data = &self.coeff_mod_bits[..self.coeff_mod_bits.len() - 1];
        // Primes that get divided out by rescaling; with a single data prime there are none.
        let min_interior = data[1..].iter().copied().min().unwrap_or(data[0]);
        if self.scale_log2 == 0 || self.scale_log2 > min_interior + 1 {
            return Err(CkksError::Parameter(format!(
                "scale 2^{} incompatible with rescaling primes of {} bits",
                self.scale_log2, min_interior
            )));
        }
        if self.scale_log2 >= data[0] {
            return Err(CkksError::Parameter(format!(
                "scale 2^{} leaves no headroom in the {}-bit base prime",
                self.scale_log2, data[0]
            )));
        }
        Ok(())
    }

    pub fn slots(&self) -> usize {
        self.ring_dim / 2
    }

    /// Number of primes that carry ciphertext data.
    pub fn data_primes(&self) -> usize {
        self.coeff_mod_bits.len() - 1
    }

    /// Level of a freshly encrypted ciphertext.
    pub fn top_level(&self) -> usize {
        self.data_primes() - 1
    }

    pub fn scale(&self) -> f64 {
        (self.scale_log2 as f64).exp2()
    }
}

/// Precomputed state shared by every object built on one parameter set.
#[derive(Debug)]
pub struct CkksContext {
    params: CkksParams,
    moduli: Vec<Modulus>,
    tables: Vec<NttTables>,
    encoder: Encoder,
    /// `inv_last[l][i] = q_l^{-1} mod q_i` for `i < l`.
    inv_last: Vec<Vec<u64>>,
    /// `P mod q_i` and `P^{-1} mod q_i` for the special prime `P`.
    special_mod: Vec<u64>,
    special_inv: Vec<u64>,
}

impl CkksContext {
    pub fn new(params: CkksParams) -> Result<Arc<Self>> {
        params.validate()?;
        let n = params.ring_dim;
        let primes = ntt_primes(&params.coeff_mod_bits, n)
            .ok_or_else(|| CkksError::Parameter("not enough NTT-friendly primes".into()))?;
        let moduli: Vec<Modulus> = primes.iter().map(|&p| Modulus::new(p)).collect();
        let tables = moduli.iter().map(|&q| NttTables::new(q, n)).collect();
        let l = moduli.len() - 1;
        let special = moduli[l].value();
        let inv_last = (0..l)
            .map(|lvl| (0..lvl).map(|i| moduli[i].inv(moduli[i].reduce(moduli[lvl].value()))).collect())
            .collect();
        let special_mod: Vec<u64> = (0..l).map(|i| moduli[i].reduce(special)).collect();
        let special_inv = (0..l).map(|i| moduli[i].inv(special_mod[i])).collect();
        Ok(Arc::new(Self {
            encoder: Encoder::new(n),
            params,
            moduli,
            tables,
            inv_last,
            special_mod,
            special_inv,
        }))
    }

    pub fn params(&self) -> &CkksParams {
        &self.params
    }

    pub fn ring_dim(&self) -> usize {
        self.params.ring_dim
    }

    pub fn slots(&self) -> usize {
        self.params.slots()
    }

    pub fn top_level(&self) -> usize {
        self.params.top_level()
    }

    /// Data primes followed by the special prime.
    pub fn moduli(&self) -> &[Modulus] {
        &self.moduli
    }

    pub fn special_index(&self) -> usize {
        self.moduli.len() - 1
    }

    pub fn tables(&self, prime: usize) -> &NttTables {
        &self.tables[prime]
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub(crate) fn inv_last(&self, level: usize, i: usize) -> u64 {
        self.inv_last[level][i]
    }

    pub(crate) fn special_mod(&self, i: usize) -> u64 {
        self.special_mod[i]
    }

    pub(crate) fn special_inv(&self, i: usize) -> u64 {
        self.special_inv[i]
    }

    /// Product of the data primes active at `level`, as a float.
    pub fn modulus_at_level(&self, level: usize) -> f64 {
        self.moduli[..=level].iter().map(|q| q.value() as f64).product()
    }

    /// Galois element `5^k mod 2N` implementing a left rotation by `k` slots.
    pub fn galois_element(&self, steps: usize) -> usize {
        let two_n = 2 * self.ring_dim();
        let mut g = 1usize;
        for _ in 0..(steps % self.slots()) {
            g = (g * 5) % two_n;
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_reference_tables() {
        let p = CkksParams::preset("cifar10-paper").unwrap();
        assert_eq!(p.ring_dim, 8192);
        assert_eq!(p.coeff_mod_bits, vec![60, 40, 40, 60]);
        assert_eq!(p.scale_log2, 40);
        assert_eq!(p.slots(), 4096);
        assert_eq!(p.top_level(), 2);

        let p = CkksParams::preset("cifar100-paper").unwrap();
        assert_eq!(p.ring_dim, 16384);
        assert_eq!(p.coeff_mod_bits, vec![60, 40, 60]);
        assert_eq!(p.top_level(), 1);

        let p = CkksParams::preset("ci-small").unwrap();
        assert_eq!((p.ring_dim, p.scale_log2), (1024, 30));
    }

    #[test]
    fn unknown_preset_lists_names() {
        let err = CkksParams::preset("bogus").unwrap_err();
        let msg = err.to_string();
        for name in PRESET_NAMES {
            assert!(msg.contains(name), "{msg}");
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(CkksParams::new(1000, vec![40, 40], 30).is_err());
        assert!(CkksParams::new(1024, vec![], 30).is_err());
        assert!(CkksParams::new(1024, vec![40], 30).is_err());
        assert!(CkksParams::new(1024, vec![40, 29, 40], 20).is_err());
        assert!(CkksParams::new(1024, vec![40, 61, 40], 30).is_err());
        assert!(CkksParams::new(1024, vec![60, 30, 60], 40).is_err());
        assert!(CkksParams::new(1024, vec![60, 30, 60], 31).is_ok());
    }

    #[test]
    fn context_builds_distinct_chain() {
        let ctx = CkksContext::new(CkksParams::preset("cifar10-paper").unwrap()).unwrap();
        let q: Vec<u64> = ctx.moduli().iter().map(|m| m.value()).collect();
        assert_eq!(q.len(), 4);
        let mut dedup = q.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 4);
        assert_eq!(ctx.galois_element(0), 1);
        assert_eq!(ctx.galois_element(1), 5);
    }
}
