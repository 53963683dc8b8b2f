use std::time::Instant;

use polyhe_core::approx::PolyApprox;
use polyhe_core::model::*;
use polyhe_core::CoreError;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn layer(h: usize, d: usize, rng: &mut impl Rng) -> LinearLayer {
    let w = Matrix::from_fn(h, d, |_, _| rng.random_range(-1.0..1.0));
    LinearLayer::new(w, (0..h).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn bn(h: usize, rng: &mut impl Rng) -> BatchNormParams {
    BatchNormParams {
        gamma: (0..h).map(|_| rng.random_range(0.1..2.0)).collect(),
        beta: (0..h).map(|_| rng.random_range(-1.0..1.0)).collect(),
        mu: (0..h).map(|_| rng.random_range(-1.0..1.0)).collect(),
        sigma2: (0..h).map(|_| rng.random_range(0.0..4.0)).collect(),
        epsilon: 1e-5,
    }
}

/// Max |BN(Wx+b) - (W'x+b')| over random layers and inputs.
fn fold_discrepancy(trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let (h, d) = (rng.random_range(1..=16), rng.random_range(1..=16));
        let l = layer(h, d, &mut rng);
        let p = bn(h, &mut rng);
        let f = fold_bn(&l, &p).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-10.0..10.0)).collect();
        let direct = p.apply(&l.apply(&x).unwrap());
        let folded = f.apply(&x).unwrap();
        for (a, b) in direct.iter().zip(&folded) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

#[test]
fn fold_matches_unfolded_evaluation() {
    let e = fold_discrepancy(1000, 3);
    assert!(e < 1e-9, "max discrepancy {e}");
}

#[test]
fn fold_scalar_example() {
    let l = LinearLayer::new(Matrix::new(1, 1, vec![1.0]).unwrap(), vec![0.0]).unwrap();
    let p = BatchNormParams {
        gamma: vec![2.0],
        beta: vec![0.5],
        mu: vec![1.0],
        sigma2: vec![3.0],
        epsilon: 1.0,
    };
    let f = fold_bn(&l, &p).unwrap();
    assert_eq!(f.weights().data(), &[1.0]);
    assert_eq!(f.bias(), &[-0.5]);
}

proptest! {
    #[test]
    fn identity_bn_folds_to_the_same_layer(seed in any::<u64>(), h in 1usize..12, d in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = layer(h, d, &mut rng);
        let sigma2 = (0..h).map(|_| rng.random_range(0.0..5.0)).collect();
        let f = fold_bn(&l, &BatchNormParams::identity(sigma2, 1e-5)).unwrap();
        prop_assert_eq!(f.layer(), &l);
    }

    #[test]
    fn fold_is_exact_algebra(seed in any::<u64>()) {
        prop_assert!(fold_discrepancy(20, seed) < 1e-9);
    }
}

#[test]
fn fold_rejects_bad_batch_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let l = layer(2, 3, &mut rng);
    let mut p = bn(2, &mut rng);
    p.sigma2[1] = -1.0;
    assert!(matches!(fold_bn(&l, &p), Err(CoreError::Domain(_))));
    let p = bn(3, &mut rng);
    assert!(matches!(fold_bn(&l, &p), Err(CoreError::Shape(_))));
}

fn small_bundle(seed: u64) -> ModelBundle {
    let cfg = FixtureConfig {
        seed,
        feature_dim: 6,
        hidden_dim: 5,
        classes: 3,
        samples: 0,
    };
    synthesize_fixture(cfg).unwrap().0
}

#[test]
fn model_roundtrip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let b = small_bundle(9);
    save_model(&b, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back, b);
    assert_eq!(back.hash(), b.hash());
    for (x, y) in back.fc1.weights().data().iter().zip(b.fc1.weights().data()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }

    let (u, _) = synthesize_unfolded(FixtureConfig {
        seed: 9,
        feature_dim: 6,
        hidden_dim: 5,
        classes: 3,
        samples: 0,
    })
    .unwrap();
    save_unfolded(&u, &path).unwrap();
    match load_model_file(&path).unwrap() {
        ModelFile::Unfolded(v) => assert_eq!(v, u),
        other => panic!("expected an unfolded model, got {other:?}"),
    }
    assert!(matches!(load_model(&path), Err(CoreError::Validation(_))));
}

proptest! {
    #[test]
    fn arbitrary_finite_weights_survive_serialization(
        bits in prop::collection::vec(any::<u64>(), 30),
        sub in prop::collection::vec(1u64..(1 << 52), 5),
    ) {
        let mut vals: Vec<f64> = bits.iter().map(|&b| f64::from_bits(b)).map(|v| if v.is_finite() { v } else { 0.5 }).collect();
        // Subnormals.
        for (v, &s) in vals.iter_mut().zip(&sub) {
            *v = f64::from_bits(s);
        }
        let mut b = small_bundle(4);
        b.fc1 = FoldedLinearLayer::from_folded(LinearLayer::new(Matrix::new(5, 6, vals).unwrap(), vec![f64::MIN_POSITIVE / 8.0; 5]).unwrap());
        let back = match parse_model(&b.to_json(), "mem").unwrap() {
            ModelFile::Folded(m) => m,
            ModelFile::Unfolded(_) => unreachable!(),
        };
        let same = back.fc1.weights().data().iter().zip(b.fc1.weights().data()).all(|(x, y)| x.to_bits() == y.to_bits());
        prop_assert!(same);
        prop_assert_eq!(back, b);
    }
}

#[test]
fn dimension_mismatch_names_both_dims() {
    let mut b = small_bundle(2);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    b.fc2 = layer(3, 4, &mut rng);
    let err = parse_model(&b.to_json(), "m.json").unwrap_err();
    match err {
        CoreError::Shape(m) => assert!(m.contains("fc1 output dimension 5") && m.contains("fc2 input dimension 4"), "{m}"),
        other => panic!("expected shape error, got {other:?}"),
    }
}

fn parse_location(text: &str) -> String {
    match parse_model(text, "m.json") {
        Err(CoreError::Parse { location, message }) => format!("{location} | {message}"),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn malformed_files_report_the_field() {
    let good: serde_json::Value = serde_json::from_str(&small_bundle(2).to_json()).unwrap();

    let mut v = good.clone();
    v["schema_version"] = 2.into();
    let loc = parse_location(&v.to_string());
    assert!(loc.contains("schema_version") && loc.contains("unsupported"), "{loc}");

    let mut v = good.clone();
    v.as_object_mut().unwrap().remove("schema_version");
    assert!(parse_location(&v.to_string()).contains("schema_version"));

    let mut v = good.clone();
    v["fc1"].as_object_mut().unwrap().remove("bias");
    let loc = parse_location(&v.to_string());
    assert!(loc.contains("fc1") && loc.contains("bias"), "{loc}");

    let mut v = good.clone();
    v["fc2"]["weights"] = "not base64!".into();
    let loc = parse_location(&v.to_string());
    assert!(loc.contains("fc2.weights") && loc.contains("base64"), "{loc}");

    let mut v = good.clone();
    v["activation"]["coeffs_ascending"] = "x".into();
    assert!(parse_location(&v.to_string()).contains("activation.coeffs_ascending"));

    let mut v = good.clone();
    v["metadata"]["extra"] = 1.into();
    assert!(parse_location(&v.to_string()).contains("metadata"));

    let mut v = good;
    v["fc1"]["rows"] = 7.into();
    match parse_model(&v.to_string(), "m.json") {
        Err(CoreError::Shape(m)) => assert!(m.contains("fc1.weights"), "{m}"),
        other => panic!("expected shape error, got {other:?}"),
    }

    assert!(matches!(parse_model("{", "m.json"), Err(CoreError::Parse { .. })));
}

#[test]
fn epsilon_defaults_when_absent() {
    let (u, _) = synthesize_unfolded(FixtureConfig {
        seed: 1,
        feature_dim: 4,
        hidden_dim: 4,
        classes: 2,
        samples: 0,
    })
    .unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&u.to_json()).unwrap();
    v["batch_norm"].as_object_mut().unwrap().remove("epsilon");
    match parse_model(&v.to_string(), "m.json").unwrap() {
        ModelFile::Unfolded(m) => {
            assert_eq!(m.bn1.epsilon, DEFAULT_BN_EPSILON);
            // Recorded explicitly once saved again.
            assert!(m.to_json().contains("\"epsilon\""));
        }
        ModelFile::Folded(_) => panic!("batch norm block was dropped"),
    }
}

#[test]
fn paper_shaped_bundle_validates() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("paper.json");
    let (b, _) = synthesize_fixture(FixtureConfig::paper_shaped(0)).unwrap();
    save_model(&b, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!((back.metadata.feature_dim, back.hidden_dim(), back.metadata.classes), (512, 512, 10));
    assert_eq!(back.activation, PolyApprox::reference_softplus());
}

#[test]
fn identity_bn_file_folds_to_identical_weights() {
    let (mut u, _) = synthesize_unfolded(FixtureConfig {
        seed: 5,
        feature_dim: 8,
        hidden_dim: 6,
        classes: 3,
        samples: 0,
    })
    .unwrap();
    u.bn1 = BatchNormParams::identity(u.bn1.sigma2.clone(), u.bn1.epsilon);
    let folded = u.fold().unwrap();
    assert_eq!(folded.fc1.layer(), &u.fc1);
}

#[test]
fn hash_tracks_content() {
    let a = small_bundle(3);
    let mut b = a.clone();
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
    b.metadata.dataset.push('x');
    assert_ne!(a.hash(), b.hash());
}

const THREE_ROWS: &str = "label,f0,f1,f2\n0,0.5,1,-2\n2,1e-3,0,3.25\n1,7,8,9\n";

#[test]
fn feature_csv_examples() {
    let fs = parse_features(THREE_ROWS.as_bytes(), 3, "mem").unwrap();
    assert_eq!((fs.len(), fs.dim()), (3, 3));
    assert_eq!(fs.features(1), &[1e-3, 0.0, 3.25]);
    assert_eq!(fs.labels(), &[0, 2, 1]);

    let ragged = "label,f0,f1,f2\n0,1,2,3\n1,1,2\n";
    let cases = [
        (ragged, "line 3"),
        ("label,f0,f1\n0,1,x\n", "line 2"),
        ("label,f0\n0,1\n5,1\n", "line 3"),
        ("label,f0\n-1,1\n", "line 2"),
        ("label,f0\n0,NaN\n", "line 2"),
        ("lbl,f0\n0,1\n", "line 1"),
        ("label,f0,f2\n0,1,2\n", "line 1"),
        ("", "line 1"),
    ];
    for (text, want) in cases {
        match parse_features(text.as_bytes(), 3, "feat.csv") {
            Err(CoreError::Parse { location, .. }) => assert!(location.contains(want), "{location} for {text:?}"),
            other => panic!("expected parse error for {text:?}, got {other:?}"),
        }
    }
}

#[test]
fn feature_csv_roundtrip_and_speed() {
    let (_, fs) = synthesize_fixture(FixtureConfig {
        seed: 8,
        feature_dim: 512,
        hidden_dim: 16,
        classes: 10,
        samples: 10_000,
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.csv");
    save_features(&fs, &path).unwrap();
    let t = Instant::now();
    let back = load_features(&path, 10).unwrap();
    let secs = t.elapsed().as_secs_f64();
    assert_eq!(back, fs);
    // Soft bound from the reference machine.
    assert!(secs < 2.0, "loading 10,000 rows took {secs:.2} s");
    assert!(matches!(load_features(&dir.path().join("missing.csv"), 10), Err(CoreError::Io { .. })));
}

#[test]
fn fixture_is_deterministic() {
    let cfg = FixtureConfig {
        seed: 77,
        feature_dim: 32,
        hidden_dim: 24,
        classes: 10,
        samples: 50,
    };
    assert_eq!(synthesize_fixture(cfg).unwrap(), synthesize_fixture(cfg).unwrap());
    let other = FixtureConfig { seed: 78, ..cfg };
    assert_ne!(synthesize_fixture(cfg).unwrap().0, synthesize_fixture(other).unwrap().0);
    // The model does not depend on the sample count.
    let more = FixtureConfig { samples: 80, ..cfg };
    assert_eq!(synthesize_fixture(cfg).unwrap().0, synthesize_fixture(more).unwrap().0);
}

#[test]
fn paper_fixture_statistics() {
    let (b, fs) = synthesize_fixture(FixtureConfig::paper_shaped(1000)).unwrap();
    let mut inside = 0usize;
    let mut total = 0usize;
    let mut seen = [false; 10];
    let mut correct = 0;
    for i in 0..fs.len() {
        let f = b.forward(fs.features(i)).unwrap();
        inside += f.z.iter().filter(|z| z.abs() <= 3.0).count();
        total += f.z.len();
        seen[f.class] = true;
        correct += usize::from(f.class == fs.label(i));
    }
    let frac = inside as f64 / total as f64;
    assert!((0.95..=1.0).contains(&frac), "fraction in [-3, 3]: {frac}");
    assert!(seen.iter().all(|&s| s), "classes predicted: {seen:?}");
    let acc = correct as f64 / fs.len() as f64;
    assert!(acc > 0.1 && acc < 1.0, "oracle accuracy {acc}");
    assert!((acc - 0.95).abs() < 0.03, "oracle accuracy {acc}");
}

#[test]
fn every_class_is_predicted_for_a_hundred_samples() {
    for seed in 0..12 {
        let (b, fs) = synthesize_fixture(FixtureConfig {
            seed,
            feature_dim: 24,
            hidden_dim: 20,
            classes: 10,
            samples: 100,
        })
        .unwrap();
        let mut seen = [false; 10];
        for i in 0..fs.len() {
            seen[b.forward(fs.features(i)).unwrap().class] = true;
        }
        assert!(seen.iter().all(|&s| s), "seed {seed}: {seen:?}");
    }
}
