use std::sync::Arc;

use hevf_core::ckks::{
    decrypt_values, encode, encrypt, encrypt_values, keygen, keygen_with_steps, CkksContext, Evaluator, KeyBundle,
    Preset,
};
use hevf_core::ring::rng_from_seed;
use hevf_core::Error;
use rand::Rng;

fn setup(preset: Preset, steps: Option<&[usize]>, seed: u64) -> (Arc<CkksContext>, KeyBundle, Evaluator) {
    let ctx = CkksContext::new(preset.params()).unwrap();
    let mut rng = rng_from_seed(seed);
    let keys = match steps {
        Some(s) => keygen_with_steps(&ctx, s, &mut rng).unwrap(),
        None => keygen(&ctx, &mut rng).unwrap(),
    };
    let ev = Evaluator::with_keys(ctx.clone(), Arc::new(keys.relin.clone()), Arc::new(keys.galois.clone()));
    (ctx, keys, ev)
}

fn max_err(got: &[f64], want: &[f64]) -> f64 {
    want.iter().zip(got).map(|(w, g)| (w - g).abs()).fold(0.0, f64::max)
}

#[test]
fn encode_decode_roundtrip_and_padding() {
    let ctx = CkksContext::new(Preset::SetII.params()).unwrap();
    let mut rng = rng_from_seed(1);
    let v: Vec<f64> = (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let pt = encode(&ctx, &v, ctx.default_scale(), ctx.max_level()).unwrap();
    let out = hevf_core::ckks::decode(&pt, &ctx);
    assert_eq!(out.len(), 8192);
    assert!(max_err(&out[..100], &v) <= 1e-6);
    assert!(out[100..].iter().all(|x| x.abs() <= 1e-6));

    let zero = encode(&ctx, &[], ctx.default_scale(), ctx.max_level()).unwrap();
    assert!(zero.poly.limbs().iter().all(|l| l.iter().all(|&c| c == 0)));

    let set1 = CkksContext::new(Preset::SetI.params()).unwrap();
    let short = encode(&set1, &[1.0, 2.0, 3.0], set1.default_scale(), 0).unwrap();
    assert_eq!(hevf_core::ckks::decode(&short, &set1).len(), 4096);
}

#[test]
fn encode_rejects_bad_input() {
    let ctx = CkksContext::new(Preset::SetI.params()).unwrap();
    let long = vec![0.0; ctx.slots() + 1];
    assert!(matches!(encode(&ctx, &long, ctx.default_scale(), 0), Err(Error::Encoding(_))));
    // 2^60 scale on a single 41-bit limb cannot hold the coefficients
    assert!(matches!(encode(&ctx, &[1.0], 2f64.powi(60), 0), Err(Error::Encoding(_))));
}

#[test]
fn encrypt_decrypt_roundtrip() {
    let (ctx, keys, _) = setup(Preset::SetII, Some(&[]), 2);
    let mut rng = rng_from_seed(3);
    let v = [0.5, -0.25, 1.0];
    let ct = encrypt_values(&ctx, &v, &keys.public, &mut rng).unwrap();
    assert_eq!(ct.level(), 4);
    assert_eq!(ct.limb_count(), 5);
    let out = decrypt_values(&ctx, &ct, &keys.secret).unwrap();
    assert!(max_err(&out[..3], &v) <= 1e-5);

    let zero = encrypt_values(&ctx, &[], &keys.public, &mut rng).unwrap();
    let out = decrypt_values(&ctx, &zero, &keys.secret).unwrap();
    assert!(out.iter().all(|x| x.abs() <= 1e-5));
}

#[test]
fn encryption_is_randomized() {
    let (ctx, keys, _) = setup(Preset::SetI, Some(&[]), 4);
    let mut rng = rng_from_seed(5);
    let pt = encode(&ctx, &[1.0, 2.0], ctx.default_scale(), ctx.max_level()).unwrap();
    let a = encrypt(&ctx, &pt, &keys.public, &mut rng).unwrap();
    let b = encrypt(&ctx, &pt, &keys.public, &mut rng).unwrap();
    assert_ne!(a, b);
}

#[test]
fn wrong_secret_gives_garbage() {
    let (ctx, keys, _) = setup(Preset::SetI, Some(&[]), 6);
    let (_, other, _) = setup(Preset::SetI, Some(&[]), 7);
    let mut rng = rng_from_seed(8);
    let ct = encrypt_values(&ctx, &[0.5; 16], &keys.public, &mut rng).unwrap();
    let out = decrypt_values(&ctx, &ct, &other.secret).unwrap();
    assert!(max_err(&out[..16], &[0.5; 16]) > 1.0);
}

#[test]
fn add_sub_and_plain_ops() {
    let (ctx, keys, ev) = setup(Preset::SetII, Some(&[]), 9);
    let mut rng = rng_from_seed(10);
    let a = encrypt_values(&ctx, &[1.0, 2.0], &keys.public, &mut rng).unwrap();
    let b = encrypt_values(&ctx, &[3.0, 4.0], &keys.public, &mut rng).unwrap();
    let sum = decrypt_values(&ctx, &ev.add(&a, &b).unwrap(), &keys.secret).unwrap();
    assert!(max_err(&sum[..2], &[4.0, 6.0]) <= 1e-5);
    let diff = decrypt_values(&ctx, &ev.sub(&a, &b).unwrap(), &keys.secret).unwrap();
    assert!(max_err(&diff[..2], &[-2.0, -2.0]) <= 1e-5);

    let zero = encode(&ctx, &[], a.scale(), a.level()).unwrap();
    let same = decrypt_values(&ctx, &ev.add_plain(&a, &zero).unwrap(), &keys.secret).unwrap();
    assert!(max_err(&same[..2], &[1.0, 2.0]) <= 1e-5);

    let c = encrypt_values(&ctx, &[2.0, 3.0], &keys.public, &mut rng).unwrap();
    let q_last = ctx.chain_moduli()[c.level()].value() as f64;
    let pt = encode(&ctx, &[0.5, 2.0], q_last, c.level()).unwrap();
    let prod = ev.rescale(&ev.mul_plain(&c, &pt).unwrap()).unwrap();
    assert!((prod.scale() / c.scale() - 1.0).abs() < 1e-12);
    let out = decrypt_values(&ctx, &prod, &keys.secret).unwrap();
    assert!(max_err(&out[..2], &[1.0, 6.0]) <= 1e-4);

    let shifted = decrypt_values(&ctx, &ev.add_const(&a, 0.25).unwrap(), &keys.secret).unwrap();
    assert!(max_err(&shifted[..3], &[1.25, 2.25, 0.25]) <= 1e-5);
    let scaled = ev.rescale(&ev.mul_const(&a, -1.5, q_last).unwrap()).unwrap();
    let out = decrypt_values(&ctx, &scaled, &keys.secret).unwrap();
    assert!(max_err(&out[..2], &[-1.5, -3.0]) <= 1e-5);
}

#[test]
fn alignment_errors() {
    let (ctx, keys, ev) = setup(Preset::SetI, Some(&[]), 11);
    let mut rng = rng_from_seed(12);
    let a = encrypt_values(&ctx, &[1.0], &keys.public, &mut rng).unwrap();
    let b = ev.mod_drop_to(&a, 2).unwrap();
    assert!(matches!(ev.add(&a, &b), Err(Error::Alignment(_))));
    let c = a.clone().with_scale(a.scale() * 2.0);
    assert!(matches!(ev.add(&a, &c), Err(Error::Alignment(_))));
    assert!(matches!(ev.mul(&a, &b), Err(Error::Alignment(_))));
}

#[test]
fn mul_relin_rescale() {
    let (ctx, keys, ev) = setup(Preset::SetII, Some(&[]), 13);
    let mut rng = rng_from_seed(14);
    let a = encrypt_values(&ctx, &[2.0, 3.0], &keys.public, &mut rng).unwrap();
    let b = encrypt_values(&ctx, &[4.0, 5.0], &keys.public, &mut rng).unwrap();
    let prod = ev.mul(&a, &b).unwrap();
    assert_eq!(prod.level(), a.level());
    assert!((prod.scale() - 2f64.powi(80)).abs() / 2f64.powi(80) < 1e-12);
    let before = decrypt_values(&ctx, &prod, &keys.secret).unwrap();
    let r = ev.rescale(&prod).unwrap();
    assert_eq!(r.level(), a.level() - 1);
    assert!((r.scale().log2() - 40.0).abs() < 0.01);
    let after = decrypt_values(&ctx, &r, &keys.secret).unwrap();
    assert!(max_err(&after[..2], &[8.0, 15.0]) <= 1e-3);
    assert!(max_err(&after[..8], &before[..8]) <= 1e-4);

    let ones = encrypt_values(&ctx, &vec![1.0; ctx.slots()], &keys.public, &mut rng).unwrap();
    let same = decrypt_values(&ctx, &ev.mul_rescale(&ones, &a).unwrap(), &keys.secret).unwrap();
    assert!(max_err(&same[..2], &[2.0, 3.0]) <= 1e-3);
}

#[test]
fn set1_supports_exactly_four_multiplications() {
    let (ctx, keys, ev) = setup(Preset::SetI, Some(&[]), 15);
    let mut rng = rng_from_seed(16);
    let mut ct = encrypt_values(&ctx, &[1.1, 0.9], &keys.public, &mut rng).unwrap();
    let mut want = [1.1f64, 0.9];
    for _ in 0..4 {
        ct = ev.mul_rescale(&ct, &ct).unwrap();
        want = [want[0] * want[0], want[1] * want[1]];
    }
    assert_eq!(ct.level(), 0);
    let out = decrypt_values(&ctx, &ct, &keys.secret).unwrap();
    assert!(max_err(&out[..2], &want) <= 5e-2, "{:?} vs {want:?}", &out[..2]);
    assert!(matches!(ev.mul(&ct, &ct), Err(Error::LevelExhausted(_))));
    assert!(matches!(ev.rescale(&ct), Err(Error::LevelExhausted(_))));
}

#[test]
fn rotations() {
    let (ctx, keys, ev) = setup(Preset::SetI, None, 17);
    let mut rng = rng_from_seed(18);
    let slots = ctx.slots();
    let v: Vec<f64> = (0..slots).map(|i| ((i * 37) % 101) as f64 / 50.0 - 1.0).collect();
    let ct = encrypt_values(&ctx, &v, &keys.public, &mut rng).unwrap();

    assert_eq!(ev.rotate(&ct, 0).unwrap(), ct);
    for k in [1i64, 5, 64, 1000, -3] {
        let r = ev.rotate(&ct, k).unwrap();
        assert_eq!(r.level(), ct.level());
        let out = decrypt_values(&ctx, &r, &keys.secret).unwrap();
        let want: Vec<f64> = (0..slots).map(|i| v[(i as i64 + k).rem_euclid(slots as i64) as usize]).collect();
        assert!(max_err(&out, &want) <= 1e-4, "k={k}");
    }

    let small = encrypt_values(&ctx, &[1.0, 2.0, 3.0, 4.0], &keys.public, &mut rng).unwrap();
    let out = decrypt_values(&ctx, &ev.rotate(&small, 1).unwrap(), &keys.secret).unwrap();
    assert!(max_err(&out[..4], &[2.0, 3.0, 4.0, 0.0]) <= 1e-5);

    let ab = ev.rotate(&ev.rotate(&ct, 3).unwrap(), 6).unwrap();
    let direct = ev.rotate(&ct, 9).unwrap();
    let x = decrypt_values(&ctx, &ab, &keys.secret).unwrap();
    let y = decrypt_values(&ctx, &direct, &keys.secret).unwrap();
    assert!(max_err(&x, &y) <= 1e-4);
}

#[test]
fn missing_rotation_key() {
    let (ctx, keys, ev) = setup(Preset::SetI, Some(&[4]), 19);
    let mut rng = rng_from_seed(20);
    let ct = encrypt_values(&ctx, &[1.0], &keys.public, &mut rng).unwrap();
    assert!(ev.rotate(&ct, 4).is_ok());
    assert!(matches!(ev.rotate(&ct, 5), Err(Error::MissingGaloisKey(5))));
    assert_eq!(keys.galois.steps(), vec![4]);
}

#[test]
fn default_galois_steps_are_powers_of_two() {
    let ctx = CkksContext::new(Preset::SetI.params()).unwrap();
    let steps = hevf_core::ckks::default_rotation_steps(&ctx);
    assert_eq!(steps.first(), Some(&1));
    assert_eq!(steps.last(), Some(&(ctx.degree() / 4)));
    assert!(steps.iter().all(|s| s.is_power_of_two()));
}
