use std::sync::Arc;

use hevf_core::ckks::{decrypt_values, default_rotation_steps, keygen_with_steps, CkksContext, Evaluator, KeyBundle, Preset};
use hevf_core::linalg::{pack, MatvecMode, ProjectionMatrix};
use hevf_core::ring::rng_from_seed;
use hevf_core::score::{
    cosine_score_plain, derive_x0, newton_inv_sqrt_plain, score_approx_plain, NewtonConfig, ScoreCircuit,
    ScoreCircuitPlan,
};
use hevf_core::Error;
use rand::Rng;

fn rescaled(v: Vec<f64>, norm: f64) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x * norm / n).collect()
}

fn unit_scaled(rng: &mut impl Rng, d: usize, norm: f64) -> Vec<f64> {
    rescaled((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect(), norm)
}

/// Symmetric PSD matrix close to the identity.
fn test_matrix(rng: &mut impl Rng, d: usize) -> ProjectionMatrix {
    let u = unit_scaled(rng, d, 1.0);
    let mut rows = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            rows[i][j] = 0.5 * u[i] * u[j] + if i == j { 0.9 } else { 0.0 };
        }
    }
    ProjectionMatrix::from_rows(&rows).unwrap()
}

#[test]
fn newton_reference_values() {
    let one = NewtonConfig::new(1.0, 1).unwrap();
    assert!((newton_inv_sqrt_plain(0.25, &one) - 1.375).abs() < 1e-12);
    let two = one.with_iterations(2).unwrap();
    assert!((newton_inv_sqrt_plain(0.25, &two) - 1.737_548_828_125).abs() < 1e-12);
    assert!(NewtonConfig::new(1.0, 3).is_err());
    assert!(NewtonConfig::new(-1.0, 1).is_err());
    assert_eq!(NewtonConfig::default().x0, 650.0);
}

#[test]
fn cosine_reference_values() {
    let q = ProjectionMatrix::identity(2);
    let s = cosine_score_plain(&[1.0, 0.0], &[1.0, 1.0], &q).unwrap();
    assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    assert!(matches!(cosine_score_plain(&[0.0, 0.0], &[1.0, 1.0], &q), Err(Error::Degenerate(_))));
    assert!(cosine_score_plain(&[1.0], &[1.0, 1.0], &q).is_err());

    // approximation at the exact inverse square root is the cosine itself
    let (w1, w2) = ([3.0, 4.0], [1.0, 2.0]);
    let a = 25.0 * 5.0;
    let cfg = NewtonConfig::new(1.0 / f64::sqrt(a), 1).unwrap();
    let exact = cosine_score_plain(&w1, &w2, &q).unwrap();
    assert!((score_approx_plain(&w1, &w2, &q, &cfg).unwrap() - exact).abs() < 1e-12);
}

#[test]
fn x0_from_percentiles() {
    let samples: Vec<f64> = (0..=1000).map(|i| 400.0 + 0.5 * i as f64).collect();
    let cfg = derive_x0(&samples).unwrap();
    assert!((cfg.x0 - 585.0).abs() < 1e-9);
    let (lo, hi) = cfg.bounds.unwrap();
    assert!((lo - 405.0).abs() < 1e-9 && (hi - 895.0).abs() < 1e-9);
    assert!(derive_x0(&[]).is_err());
    assert!(derive_x0(&[1.0, f64::NAN]).is_err());
}

#[test]
fn plan_levels() {
    let one = ScoreCircuitPlan::new(1).unwrap();
    let two = ScoreCircuitPlan::new(2).unwrap();
    assert_eq!(one.required_levels, 4);
    assert_eq!(two.required_levels, 6);
    assert!(one.check_params(&Preset::SetI.params()).is_ok());
    assert!(matches!(
        two.check_params(&Preset::SetI.params()),
        Err(Error::Plan { required: 6, available: 4 })
    ));
    assert!(two.check_params(&Preset::SetIII.params()).is_ok());
    assert!(ScoreCircuitPlan::new(3).is_err());

    let report = one.report(4);
    assert_eq!(one.stages.iter().filter(|s| s.level == 2 && s.op == "dot").count(), 4);
    assert!(report.contains("L4"));
    assert!(!report.contains("L5"));

    let ctx = CkksContext::new(Preset::SetI.params()).unwrap();
    let q = ProjectionMatrix::identity(8);
    assert!(matches!(
        ScoreCircuit::new(ctx, q, 2, MatvecMode::BabyGiant),
        Err(Error::Plan { required: 6, available: 4 })
    ));
}

struct Run {
    max_err: f64,
    levels_used: usize,
    scores: Vec<f64>,
}

fn run_encrypted(preset: Preset, iterations: usize, d: usize, seed: u64) -> Run {
    let mut rng = rng_from_seed(seed);
    let ctx = CkksContext::new(preset.params()).unwrap();
    let q = test_matrix(&mut rng, d);
    let circuit = ScoreCircuit::new(ctx.clone(), q.clone(), iterations, MatvecMode::BabyGiant).unwrap();
    let mut steps = default_rotation_steps(&ctx);
    steps.extend(circuit.rotation_steps());
    let keys: KeyBundle = keygen_with_steps(&ctx, &steps, &mut rng).unwrap();
    let ev = Evaluator::with_keys(ctx.clone(), Arc::new(keys.relin.clone()), Arc::new(keys.galois.clone()));

    let layout = *circuit.layout();
    let x0 = NewtonConfig::DEFAULT_X0;
    let cfg = NewtonConfig::new(x0, iterations).unwrap();
    let mut w1s = Vec::new();
    let mut w2s = Vec::new();
    for k in 0..layout.blocks {
        let n1 = rng.gen_range(0.034..0.044);
        let w1 = unit_scaled(&mut rng, d, n1);
        // mix in w1 so scores cover a range of values
        let noise = unit_scaled(&mut rng, d, 1.0);
        let mix = k as f64 / layout.blocks as f64;
        let w2: Vec<f64> = w1.iter().zip(&noise).map(|(a, b)| mix * a / 0.039 + (1.0 - mix) * b).collect();
        let w2 = rescaled(w2, rng.gen_range(0.034..0.044));
        w1s.push(w1);
        w2s.push(w2);
    }
    let ea: Vec<Vec<f64>> = w1s.iter().map(|w| w.iter().map(|x| 1.5 * x0 * x).collect()).collect();
    let eb: Vec<Vec<f64>> = w1s.iter().map(|w| w.iter().map(|x| 0.5 * x0.powi(3) * x).collect()).collect();
    let sa: Vec<&[f64]> = ea.iter().map(|v| v.as_slice()).collect();
    let sb: Vec<&[f64]> = eb.iter().map(|v| v.as_slice()).collect();
    let s2: Vec<&[f64]> = w2s.iter().map(|v| v.as_slice()).collect();
    let ct_a = pack(&ctx, &keys.public, layout, &sa, &mut rng).unwrap();
    let ct_b = pack(&ctx, &keys.public, layout, &sb, &mut rng).unwrap();
    let ct_w2 = pack(&ctx, &keys.public, layout, &s2, &mut rng).unwrap();

    let out = circuit.evaluate(&ev, &ct_a, &ct_b, &ct_w2, x0).unwrap();
    let slots = decrypt_values(&ctx, &out.ct, &keys.secret).unwrap();
    let mut max_err: f64 = 0.0;
    let mut scores = Vec::new();
    for k in 0..layout.blocks {
        let want = score_approx_plain(&w1s[k], &w2s[k], &q, &cfg).unwrap();
        let got = slots[layout.block_offset(k)];
        max_err = max_err.max((got - want).abs());
        scores.push(want);
    }
    Run { max_err, levels_used: ctx.max_level() - out.ct.level(), scores }
}

#[test]
fn encrypted_one_iteration_set_i() {
    let run = run_encrypted(Preset::SetI, 1, 200, 11);
    assert_eq!(run.levels_used, 4);
    assert!(run.max_err <= 5e-2, "max error {}", run.max_err);
    assert!(run.scores.iter().any(|s| *s > 0.5));
}

#[test]
fn encrypted_one_iteration_set_ii() {
    let run = run_encrypted(Preset::SetII, 1, 100, 12);
    assert_eq!(run.levels_used, 4);
    assert!(run.max_err <= 1e-2, "max error {}", run.max_err);
}

#[test]
fn encrypted_two_iterations_set_iii() {
    let run = run_encrypted(Preset::SetIII, 2, 64, 13);
    assert_eq!(run.levels_used, 6);
    assert!(run.max_err <= 1e-2, "max error {}", run.max_err);
}
