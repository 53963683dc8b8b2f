use polyhe_ckks::{
    keygen, Ciphertext, CkksContext, CkksError, CkksParams, Decryptor, Encryptor, EvaluationKeys, Evaluator, KeySet,
    PublicKey, SecretKey, Serializable,
};

fn setup() -> (std::sync::Arc<CkksContext>, KeySet) {
    let ctx = CkksContext::new(CkksParams::preset("ci-small").unwrap()).unwrap();
    let keys = keygen(&ctx, 21);
    (ctx, keys)
}

#[test]
fn objects_roundtrip_bit_for_bit() {
    let (ctx, keys) = setup();
    let enc = Encryptor::new(ctx.clone(), keys.public_key(), 1);
    let ct = enc.encrypt_values(&[1.0, -2.0, 0.5]).unwrap();

    assert_eq!(Ciphertext::from_bytes(&ct.to_bytes()).unwrap(), ct);
    assert_eq!(PublicKey::from_bytes(&keys.public_key().to_bytes()).unwrap(), *keys.public_key());
    assert_eq!(SecretKey::from_bytes(&keys.secret_key().to_bytes()).unwrap(), *keys.secret_key());
    let ek = keys.evaluation_keys();
    assert_eq!(EvaluationKeys::from_bytes(&ek.to_bytes()).unwrap(), *ek);
    assert_eq!(KeySet::from_bytes(&keys.to_bytes()).unwrap(), keys);
}

#[test]
fn deserialized_material_still_works() {
    let (ctx, keys) = setup();
    let keys = KeySet::from_bytes(&keys.to_bytes()).unwrap();
    let enc = Encryptor::new(ctx.clone(), keys.public_key(), 2);
    let dec = Decryptor::new(ctx.clone(), keys.secret_key());
    let ek = EvaluationKeys::from_bytes(&keys.evaluation_keys().to_bytes()).unwrap();
    let ev = Evaluator::new(&ctx, &ek);
    let ct = Ciphertext::from_bytes(&enc.encrypt_values(&[1.0, 2.0, 3.0]).unwrap().to_bytes()).unwrap();
    let out = dec.decrypt_values(&ev.rotate(&ct, 1).unwrap());
    assert!((out[0] - 2.0).abs() < 1e-2 && (out[1] - 3.0).abs() < 1e-2);
}

#[test]
fn header_layout() {
    let (ctx, keys) = setup();
    let ct = Encryptor::new(ctx.clone(), keys.public_key(), 3).encrypt_values(&[0.0]).unwrap();
    let bytes = ct.to_bytes();
    assert_eq!(&bytes[..4], b"PHCK");
    assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
    assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 1024);
    // header + ring_dim + scale + parts + 2 * (primes + len + 1024 residues) at top level (two primes)
    assert_eq!(bytes.len(), 16 + 8 + 8 + 2 * (8 + 2 * (8 + 1024 * 8)));
}

#[test]
fn corrupt_input_is_rejected() {
    let (ctx, keys) = setup();
    let ct = Encryptor::new(ctx.clone(), keys.public_key(), 4).encrypt_values(&[0.0]).unwrap();
    let bytes = ct.to_bytes();

    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    let mut bad_version = bytes.clone();
    bad_version[4] = 9;
    let mut trailing = bytes.clone();
    trailing.push(0);
    for bad in [bad_magic, bad_version, bytes[..bytes.len() - 1].to_vec(), trailing] {
        assert!(matches!(Ciphertext::from_bytes(&bad), Err(CkksError::Serialization(_))));
    }
    // Kind tags are checked.
    assert!(matches!(PublicKey::from_bytes(&bytes), Err(CkksError::Serialization(_))));
}
