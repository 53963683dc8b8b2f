use std::sync::{Arc, OnceLock};

use polyhe_ckks::{keygen, CkksContext, CkksError, CkksParams, Decryptor, Encryptor, Evaluator, KeySet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

struct Fixture {
    ctx: Arc<CkksContext>,
    keys: KeySet,
    enc: Encryptor,
    dec: Decryptor,
}

impl Fixture {
    fn new(preset: &str, seed: u64) -> Self {
        let ctx = CkksContext::new(CkksParams::preset(preset).unwrap()).unwrap();
        let keys = keygen(&ctx, seed);
        let enc = Encryptor::new(ctx.clone(), keys.public_key(), seed + 1);
        let dec = Decryptor::new(ctx.clone(), keys.secret_key());
        Self { ctx, keys, enc, dec }
    }

    fn eval(&self) -> Evaluator<'_> {
        Evaluator::new(&self.ctx, self.keys.evaluation_keys())
    }
}

fn small() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| Fixture::new("ci-small", 11))
}

fn paper() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| Fixture::new("cifar10-paper", 12))
}

fn extended() -> bool {
    std::env::var("POLYHE_EXTENDED").is_ok_and(|v| v != "0")
}

fn random_vec(rng: &mut ChaCha20Rng, len: usize, bound: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-bound..bound)).collect()
}

fn max_err(got: &[f64], want: &[f64]) -> f64 {
    want.iter().zip(got).map(|(w, g)| (w - g).abs()).fold(0.0, f64::max)
}

fn padded(v: &[f64], slots: usize) -> Vec<f64> {
    let mut out = v.to_vec();
    out.resize(slots, 0.0);
    out
}

#[test]
fn paper_preset_keygen_has_4096_slots() {
    let f = paper();
    assert_eq!(f.ctx.slots(), 4096);
    assert_eq!(f.keys.evaluation_keys().rotation_steps().len(), 12);
}

#[test]
fn paper_preset_roundtrip_precision() {
    let f = paper();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let v = random_vec(&mut rng, 512, 10.0);
    let out = f.dec.decrypt_values(&f.enc.encrypt_values(&v).unwrap());
    let err = max_err(&out, &padded(&v, 4096));
    assert!(err < 1e-5, "roundtrip error {err:e}");

    let zeros = f.dec.decrypt_values(&f.enc.encrypt_values(&[0.0; 16]).unwrap());
    assert!(zeros.iter().all(|z| z.abs() < 1e-6));
}

#[test]
fn fresh_noise_is_small_at_paper_preset() {
    let f = paper();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let v = random_vec(&mut rng, 4096, 1.0);
    let err = max_err(&f.dec.decrypt_values(&f.enc.encrypt_values(&v).unwrap()), &v);
    assert!(err < 1e-6, "fresh error {err:e}");
}

#[test]
fn wrong_key_decryption_is_uncorrelated() {
    let f = small();
    let other = keygen(&f.ctx, 999);
    let wrong = Decryptor::new(f.ctx.clone(), other.secret_key());
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let v = random_vec(&mut rng, f.ctx.slots(), 1.0);
    let out = wrong.decrypt_values(&f.enc.encrypt_values(&v).unwrap());
    let (mv, mo) = (v.iter().sum::<f64>() / v.len() as f64, out.iter().sum::<f64>() / out.len() as f64);
    let cov: f64 = v.iter().zip(&out).map(|(a, b)| (a - mv) * (b - mo)).sum();
    let var_v: f64 = v.iter().map(|a| (a - mv).powi(2)).sum();
    let var_o: f64 = out.iter().map(|b| (b - mo).powi(2)).sum();
    let corr = cov / (var_v * var_o).sqrt();
    assert!(corr.abs() < 0.2, "correlation {corr}");
    assert!(max_err(&out, &v) > 1.0);
}

#[test]
fn identical_seeds_reproduce_ciphertexts() {
    let a = Fixture::new("ci-small", 5);
    let b = Fixture::new("ci-small", 5);
    let v = [1.5, -2.0, 3.25];
    assert_eq!(a.enc.encrypt_values(&v).unwrap(), b.enc.encrypt_values(&v).unwrap());
    // The call counter advances the stream.
    assert_ne!(a.enc.encrypt_values(&v).unwrap(), a.enc.encrypt_values(&v).unwrap());
}

#[test]
fn addition_oracles() {
    let f = small();
    let ev = f.eval();
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let slots = f.ctx.slots();
    let a = random_vec(&mut rng, slots, 10.0);
    let b = random_vec(&mut rng, slots, 10.0);
    let neg: Vec<f64> = a.iter().map(|x| -x).collect();
    let ca = f.enc.encrypt_values(&a).unwrap();

    let cancel = ev.add(&ca, &f.enc.encrypt_values(&neg).unwrap()).unwrap();
    assert!(max_err(&f.dec.decrypt_values(&cancel), &vec![0.0; slots]) < 1e-2);

    let pb = f.ctx.encode(&b, ca.scale(), ca.level()).unwrap();
    let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    assert!(max_err(&f.dec.decrypt_values(&ev.add_plain(&ca, &pb).unwrap()), &sum) < 1e-2);

    let zero = f.enc.encrypt_values(&[]).unwrap();
    assert!(max_err(&f.dec.decrypt_values(&ev.add(&ca, &zero).unwrap()), &a) < 1e-2);

    let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let cb = f.enc.encrypt_values(&b).unwrap();
    assert!(max_err(&f.dec.decrypt_values(&ev.sub(&ca, &cb).unwrap()), &diff) < 1e-2);
}

#[test]
fn paper_preset_addition_cancels() {
    let f = paper();
    let ev = f.eval();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let a = random_vec(&mut rng, 4096, 10.0);
    let neg: Vec<f64> = a.iter().map(|x| -x).collect();
    let sum = ev
        .add(&f.enc.encrypt_values(&a).unwrap(), &f.enc.encrypt_values(&neg).unwrap())
        .unwrap();
    assert!(max_err(&f.dec.decrypt_values(&sum), &vec![0.0; 4096]) < 1e-5);
}

#[test]
fn scale_mismatch_is_a_state_error() {
    let f = small();
    let ev = f.eval();
    let ct = f.enc.encrypt_values(&[1.0]).unwrap();
    let pt = f.ctx.encode(&[1.0], ct.scale() * 1.01, ct.level()).unwrap();
    assert!(matches!(ev.add_plain(&ct, &pt), Err(CkksError::State(_))));
    let lower = ev.mul_values(&ct, &[1.0]).unwrap();
    assert!(matches!(ev.add(&ct, &lower), Err(CkksError::State(_))));
}

#[test]
fn mul_plain_bookkeeping_and_oracles() {
    for f in [small(), paper()] {
        let ev = f.eval();
        let slots = f.ctx.slots();
        let scale_log2 = f.ctx.params().scale_log2 as f64;
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let a = random_vec(&mut rng, 256, 1.0);
        let b = random_vec(&mut rng, 256, 1.0);
        let ct = f.enc.encrypt_values(&a).unwrap();

        let ones = ev.mul_values(&ct, &vec![1.0; slots]).unwrap();
        assert_eq!(ones.level(), ct.level() - 1);
        assert!((ones.scale().log2() - scale_log2).abs() < 1.0);
        let tol = if slots == 4096 { 1e-4 } else { 1e-2 };
        assert!(max_err(&f.dec.decrypt_values(&ones), &padded(&a, slots)) < tol);

        let zero = ev.mul_values(&ct, &[0.0]).unwrap();
        assert!(max_err(&f.dec.decrypt_values(&zero), &vec![0.0; slots]) < tol);

        let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        let got = f.dec.decrypt_values(&ev.mul_values(&ct, &b).unwrap());
        assert!(max_err(&got, &padded(&prod, slots)) < tol, "product error at N={}", f.ctx.ring_dim());
    }
}

#[test]
fn mul_plain_at_level_zero_is_depth_exhausted() {
    let f = small();
    let ev = f.eval();
    let ct = ev.mul_values(&f.enc.encrypt_values(&[1.0]).unwrap(), &[1.0]).unwrap();
    assert_eq!(ct.level(), 0);
    assert!(matches!(ev.mul_values(&ct, &[1.0]), Err(CkksError::DepthExhausted(_))));
}

#[test]
fn ciphertext_products() {
    let f = paper();
    let ev = f.eval();
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let a = random_vec(&mut rng, 4096, 1.0);
    let ca = f.enc.encrypt_values(&a).unwrap();
    let cones = f.enc.encrypt_values(&[1.0; 4096]).unwrap();

    let id = ev.mul(&ca, &cones).unwrap();
    assert_eq!(id.size(), 2);
    assert_eq!(id.level(), 1);
    assert!(max_err(&f.dec.decrypt_values(&id), &a) < 1e-3);

    let sq = ev.mul(&ca, &ca).unwrap();
    let a2: Vec<f64> = a.iter().map(|x| x * x).collect();
    assert!(max_err(&f.dec.decrypt_values(&sq), &a2) < 1e-3);

    // Two rescales fit in [60, 40, 40, 60]; the third product has nothing left.
    let quad = ev.mul(&sq, &sq).unwrap();
    assert_eq!(quad.level(), 0);
    let a4: Vec<f64> = a2.iter().map(|x| x * x).collect();
    assert!(max_err(&f.dec.decrypt_values(&quad), &a4) < 1e-2);
    assert!(matches!(ev.mul(&quad, &quad), Err(CkksError::DepthExhausted(_))));
}

#[test]
fn rotation_examples() {
    let f = small();
    let ev = f.eval();
    let slots = f.ctx.slots();
    let ct = f.enc.encrypt_values(&[1.0, 2.0, 3.0, 4.0]).unwrap();

    let same = ev.rotate(&ct, 0).unwrap();
    assert_eq!(same, ct);

    let mut want = vec![0.0; slots];
    want[..3].copy_from_slice(&[2.0, 3.0, 4.0]);
    want[slots - 1] = 1.0;
    assert!(max_err(&f.dec.decrypt_values(&ev.rotate(&ct, 1).unwrap()), &want) < 1e-2);

    for k in [3i64, 100, 511] {
        let back = ev.rotate(&ev.rotate(&ct, k).unwrap(), slots as i64 - k).unwrap();
        let mut orig = vec![0.0; slots];
        orig[..4].copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        assert!(max_err(&f.dec.decrypt_values(&back), &orig) < 1e-2);
    }

    let mut right = vec![0.0; slots];
    right[1..5].copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
    assert!(max_err(&f.dec.decrypt_values(&ev.rotate(&ct, -1).unwrap()), &right) < 1e-2);
}

#[test]
fn rotation_without_key_is_reported() {
    let f = small();
    let mut keys = f.keys.evaluation_keys().clone();
    keys.retain_rotation_steps(|s| s != 4);
    let ev = Evaluator::new(&f.ctx, &keys);
    let ct = f.enc.encrypt_values(&[1.0]).unwrap();
    assert!(matches!(ev.rotate(&ct, 4), Err(CkksError::MissingKey(4))));
}

#[test]
fn dot_product_examples() {
    let f = paper();
    let ev = f.eval();
    let d = 512;
    let ones = vec![1.0; d];
    let ct = f.enc.encrypt_values(&ones).unwrap();
    let r = f.dec.decrypt_values(&ev.dot_plain(&ct, &ones, d).unwrap())[0];
    assert!((r - d as f64).abs() < 1e-3 * d as f64);

    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let x = random_vec(&mut rng, d, 1.0);
    let w = random_vec(&mut rng, d, 1.0);
    let cx = f.enc.encrypt_values(&x).unwrap();
    let mut e = vec![0.0; d];
    e[37] = 1.0;
    let got = f.dec.decrypt_values(&ev.dot_plain(&cx, &e, d).unwrap())[0];
    assert!((got - x[37]).abs() < 1e-4);

    let dot = ev.dot_plain(&cx, &w, d).unwrap();
    assert_eq!(dot.level(), cx.level() - 1);
    let want: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
    let got = f.dec.decrypt_values(&dot)[0];
    assert!((got - want).abs() < 1e-3, "dot {got} vs {want}");
}

#[test]
fn dot_product_pads_non_power_of_two() {
    let f = small();
    let ev = f.eval();
    let d = 100;
    let x: Vec<f64> = (0..d).map(|i| (i as f64 / 50.0) - 1.0).collect();
    let w: Vec<f64> = (0..d).map(|i| ((i * 7) % 11) as f64 / 11.0 - 0.5).collect();
    let want: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
    let got = f.dec.decrypt_values(&ev.dot_plain(&f.enc.encrypt_values(&x).unwrap(), &w, d).unwrap())[0];
    assert!((got - want).abs() < 1e-2);
}

/// Two chained plaintext dot products from a fresh ciphertext, re-encrypting in
/// between as the hybrid activation does.
fn two_dot_products(f: &Fixture, seed: u64) -> f64 {
    let ev = f.eval();
    let d = 512;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let x = random_vec(&mut rng, d, 3.0);
    let w1 = random_vec(&mut rng, d, 0.1);
    let w2 = random_vec(&mut rng, d, 0.1);
    let cx = f.enc.encrypt_values(&x).unwrap();
    let h = f.dec.decrypt_values(&ev.dot_plain(&cx, &w1, d).unwrap())[0];
    let hv = vec![h; d];
    let ch = f.enc.encrypt_values(&hv).unwrap();
    let got = f.dec.decrypt_values(&ev.dot_plain(&ch, &w2, d).unwrap())[0];
    let h_true: f64 = x.iter().zip(&w1).map(|(a, b)| a * b).sum();
    let want: f64 = w2.iter().map(|b| h_true * b).sum();
    (got - want).abs()
}

#[test]
fn two_sequential_dot_products_at_paper_preset() {
    let err = two_dot_products(paper(), 9);
    assert!(err < 1e-2, "error {err:e}");
}

#[test]
fn two_sequential_dot_products_at_ci_small() {
    let err = two_dot_products(small(), 10);
    assert!(err < 1e-2, "error {err:e}");
}

fn check_homomorphism(f: &Fixture, a: &[f64], b: &[f64], k: i64) {
    let ev = f.eval();
    let slots = f.ctx.slots();
    let (a, b) = (padded(a, slots), padded(b, slots));
    let ca = f.enc.encrypt_values(&a).unwrap();
    let cb = f.enc.encrypt_values(&b).unwrap();
    let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    assert!(max_err(&f.dec.decrypt_values(&ev.add(&ca, &cb).unwrap()), &sum) < 1e-2);
    let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    assert!(max_err(&f.dec.decrypt_values(&ev.mul_values(&ca, &b).unwrap()), &prod) < 1e-2);
    let r = k.rem_euclid(slots as i64) as usize;
    let rotated: Vec<f64> = (0..slots).map(|i| a[(i + r) % slots]).collect();
    assert!(max_err(&f.dec.decrypt_values(&ev.rotate(&ca, k).unwrap()), &rotated) < 1e-2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn homomorphism_ci_small(
        a in prop::collection::vec(-4.0f64..4.0, 1..512),
        b in prop::collection::vec(-4.0f64..4.0, 1..512),
        k in -600i64..600,
    ) {
        check_homomorphism(small(), &a, &b, k);
    }

    #[test]
    fn homomorphism_paper_preset(
        a in prop::collection::vec(-4.0f64..4.0, 1..4096),
        b in prop::collection::vec(-4.0f64..4.0, 1..4096),
        k in -5000i64..5000,
    ) {
        if extended() {
            check_homomorphism(paper(), &a, &b, k);
        }
    }
}
