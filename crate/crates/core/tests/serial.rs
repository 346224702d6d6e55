use hevf_core::ckks::{encrypt_values, keygen_with_steps, Ciphertext, CkksContext, GaloisKeys, Preset, PublicKey, RelinKey, SecretKey};
use hevf_core::ring::rng_from_seed;
use hevf_core::serial::{params_from_bytes, params_to_bytes, peek_header, Encodable, Kind, MAGIC};
use hevf_core::{Error, ErrorCategory};

fn roundtrip<T: Encodable + PartialEq + std::fmt::Debug>(ctx: &CkksContext, v: &T) {
    let bytes = v.to_bytes(ctx);
    assert_eq!(&bytes[..4], &MAGIC);
    assert_eq!(bytes[6], T::KIND as u8);
    let back = T::from_bytes(ctx, &bytes).unwrap();
    assert_eq!(&back, v);
    assert_eq!(back.to_bytes(ctx), bytes);
}

#[test]
fn every_object_roundtrips_byte_exact() {
    let ctx = CkksContext::new(Preset::SetI.params()).unwrap();
    let mut rng = rng_from_seed(1);
    let keys = keygen_with_steps(&ctx, &[1, 8], &mut rng).unwrap();
    roundtrip(&ctx, &keys.secret);
    roundtrip(&ctx, &keys.public);
    roundtrip(&ctx, &keys.relin);
    roundtrip(&ctx, &keys.galois);
    let ct = encrypt_values(&ctx, &[0.25, -3.0], &keys.public, &mut rng).unwrap();
    roundtrip(&ctx, &ct);

    for p in Preset::ALL {
        let bytes = params_to_bytes(&p.params());
        assert_eq!(params_from_bytes(&bytes).unwrap(), p.params());
        assert_eq!(peek_header(&bytes).unwrap().kind, Kind::Params as u8);
    }
}

#[test]
fn keygen_is_deterministic_under_seed() {
    let ctx = CkksContext::new(Preset::SetI.params()).unwrap();
    let a = keygen_with_steps(&ctx, &[1], &mut rng_from_seed(5)).unwrap();
    let b = keygen_with_steps(&ctx, &[1], &mut rng_from_seed(5)).unwrap();
    assert_eq!(a.public.to_bytes(&ctx), b.public.to_bytes(&ctx));
    assert_eq!(a.galois.to_bytes(&ctx), b.galois.to_bytes(&ctx));
}

#[test]
fn non_secret_objects_do_not_parse_as_secret_key() {
    let ctx = CkksContext::new(Preset::SetI.params()).unwrap();
    let mut rng = rng_from_seed(2);
    let keys = keygen_with_steps(&ctx, &[1], &mut rng).unwrap();
    let ct = encrypt_values(&ctx, &[1.0], &keys.public, &mut rng).unwrap();
    for bytes in [
        keys.public.to_bytes(&ctx),
        keys.relin.to_bytes(&ctx),
        keys.galois.to_bytes(&ctx),
        ct.to_bytes(&ctx),
        params_to_bytes(ctx.params()),
    ] {
        let err = SecretKey::from_bytes(&ctx, &bytes).unwrap_err();
        assert_eq!(err.category(), ErrorCategory::Protocol);
    }
}

#[test]
fn mismatched_parameters_and_corruption_are_rejected() {
    let ctx1 = CkksContext::new(Preset::SetI.params()).unwrap();
    let ctx2 = CkksContext::new(Preset::SetII.params()).unwrap();
    let mut rng = rng_from_seed(3);
    let keys = keygen_with_steps(&ctx1, &[], &mut rng).unwrap();
    let ct = encrypt_values(&ctx1, &[1.0], &keys.public, &mut rng).unwrap();
    let bytes = ct.to_bytes(&ctx1);

    assert!(matches!(Ciphertext::from_bytes(&ctx2, &bytes), Err(Error::Format(_))));
    assert!(Ciphertext::from_bytes(&ctx1, &bytes[..bytes.len() - 1]).is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(Ciphertext::from_bytes(&ctx1, &extra).is_err());
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(Ciphertext::from_bytes(&ctx1, &bad_magic).is_err());
    // a residue forced out of range
    let mut bad_residue = bytes.clone();
    let off = bytes.len() - 8;
    bad_residue[off..].copy_from_slice(&u64::MAX.to_le_bytes());
    assert!(Ciphertext::from_bytes(&ctx1, &bad_residue).is_err());

    assert!(PublicKey::from_bytes(&ctx1, &keys.relin.to_bytes(&ctx1)).is_err());
    assert!(RelinKey::from_bytes(&ctx1, &[]).is_err());
    assert!(GaloisKeys::from_bytes(&ctx1, b"HEVF").is_err());

    let mut p = params_to_bytes(ctx1.params());
    let n = p.len();
    p[n - 1] ^= 1;
    assert!(params_from_bytes(&p).is_err());
}
