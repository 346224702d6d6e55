//! Acceptance run: one PASS/FAIL line per criterion. Criteria marked
//! non-gating are reported but do not fail the run.

use std::collections::HashSet;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use hevf_core::ckks::{
    decrypt_values, encrypt_values, keygen, validate_params, CkksContext, Evaluator, GaloisKeys, ParameterSet, Preset,
    PublicKey, RelinKey, SecretKey,
};
use hevf_core::linalg::{pack, MatvecMode, ProjectionMatrix};
use hevf_core::ring::{rng_from_seed, HeRng};
use hevf_core::score::{newton_inv_sqrt_plain, score_approx_plain, NewtonConfig, ScoreCircuit};
use hevf_core::serial::{params_from_bytes, params_to_bytes, Encodable};
use hevf_core::Error;
use hevf_eval::*;
use hevf_protocol::{
    Client, EnrollAck, EnrollmentRequest, EnrollmentStore, ErrorMessage, Message, Server, ServerConfig,
    VerificationRequest, VerificationResponse,
};

const X0: f64 = 650.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Check = fn() -> Outcome;

fn main() {
    // (id, gating, check)
    let checks: [(&str, bool, Check); 10] = [
        ("AC1 homomorphic correctness", true, ac1),
        ("AC2 level budget", true, ac2),
        ("AC3 parameter gate", true, ac3),
        ("AC4 newton accuracy", false, ac4),
        ("AC5 end-to-end fidelity", true, ac5),
        ("AC6 eer ordering", true, ac6),
        ("AC7 attack far", true, ac7),
        ("AC8 probabilistic encryption", true, ac8),
        ("AC9 performance", false, ac9),
        ("AC10 serialization", true, ac10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut gating_failures = 0;
    for (name, gating, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let note = if gating { "" } else { " (non-gating)" };
        println!("{verdict} {name}{note} [{:.1}s]: {}", start.elapsed().as_secs_f64(), o.detail);
        if gating && !o.pass {
            gating_failures += 1;
        }
    }
    if gating_failures > 0 {
        eprintln!("{gating_failures} gating criteria failed");
        std::process::exit(1);
    }
}

fn random_vec(rng: &mut HeRng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
}

/// Symmetric positive definite matrix `0.9·I + 0.5·uuᵀ` for a random unit `u`.
fn spd_matrix(rng: &mut HeRng, d: usize) -> ProjectionMatrix {
    let u = random_vec(rng, d, 1.0);
    let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let rows: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| 0.5 * u[i] * u[j] / (n * n) + if i == j { 0.9 } else { 0.0 }).collect())
        .collect();
    ProjectionMatrix::from_rows(&rows).unwrap()
}

fn ac1() -> Outcome {
    let ctx = CkksContext::new(Preset::SetII.params()).unwrap();
    let mut rng = rng_from_seed(101);
    let keys = keygen(&ctx, &mut rng).unwrap();
    let ev = Evaluator::with_keys(ctx.clone(), Arc::new(keys.relin.clone()), Arc::new(keys.galois.clone()));
    let d = 200;
    let per_ct = ctx.slots() / d;
    let pairs = 1000;
    let (mut add_err, mut mul_err) = (0.0f64, 0.0f64);
    let mut done = 0;
    while done < pairs {
        let k = per_ct.min(pairs - done);
        let a = random_vec(&mut rng, k * d, 1.0);
        let b = random_vec(&mut rng, k * d, 1.0);
        let ca = encrypt_values(&ctx, &a, &keys.public, &mut rng).unwrap();
        let cb = encrypt_values(&ctx, &b, &keys.public, &mut rng).unwrap();
        let sum = decrypt_values(&ctx, &ev.add(&ca, &cb).unwrap(), &keys.secret).unwrap();
        let prod = decrypt_values(&ctx, &ev.mul_rescale(&ca, &cb).unwrap(), &keys.secret).unwrap();
        for i in 0..k * d {
            add_err = add_err.max((sum[i] - (a[i] + b[i])).abs());
            mul_err = mul_err.max((prod[i] - a[i] * b[i]).abs());
        }
        done += k;
    }
    outcome(
        add_err <= 1e-3 && mul_err <= 1e-3,
        format!("{pairs} pairs d={d} Set II: max add error {add_err:.2e}, max mul+rescale error {mul_err:.2e} (≤ 1e-3)"),
    )
}

fn ac2() -> Outcome {
    let mut rng = rng_from_seed(102);
    let d = 16;
    let q = spd_matrix(&mut rng, d);
    let mut consumed = Vec::new();
    for (preset, iterations) in [(Preset::SetII, 1), (Preset::SetIII, 2)] {
        let ctx = CkksContext::new(preset.params()).unwrap();
        let circuit = ScoreCircuit::new(ctx.clone(), q.clone(), iterations, MatvecMode::BabyGiant).unwrap();
        let keys = hevf_core::ckks::keygen_with_steps(&ctx, &circuit.rotation_steps(), &mut rng).unwrap();
        let ev = Evaluator::with_keys(ctx.clone(), Arc::new(keys.relin), Arc::new(keys.galois));
        let layout = *circuit.layout();
        let w1 = random_vec(&mut rng, d, 0.01);
        let w2 = random_vec(&mut rng, d, 0.01);
        let scaled = |c: f64| w1.iter().map(|x| c * x).collect::<Vec<_>>();
        let (a, b) = (scaled(1.5 * X0), scaled(0.5 * X0 * X0 * X0));
        let ct_a = pack(&ctx, &keys.public, layout, &[&a], &mut rng).unwrap();
        let ct_b = pack(&ctx, &keys.public, layout, &[&b], &mut rng).unwrap();
        let ct_w2 = pack(&ctx, &keys.public, layout, &[&w2], &mut rng).unwrap();
        let out = circuit.evaluate(&ev, &ct_a, &ct_b, &ct_w2, X0).unwrap();
        consumed.push(ct_w2.level() - out.ct.level());
    }
    let set1 = ScoreCircuit::new(
        CkksContext::new(Preset::SetI.params()).unwrap(),
        q,
        2,
        MatvecMode::BabyGiant,
    );
    let plan_error = matches!(set1, Err(Error::Plan { .. }));
    outcome(
        consumed == [4, 6] && plan_error,
        format!(
            "levels consumed: 1 iter {}, 2 iter {} (expect 4, 6); Set I with 2 iterations rejected with plan error: {plan_error}",
            consumed[0], consumed[1]
        ),
    )
}

/// Splits `total` bits into a chain of at least two primes of at most 60 bits.
fn chain_of(total: u32) -> Vec<u32> {
    let parts = total.div_ceil(60).max(2);
    let base = total / parts;
    let mut chain = vec![base; parts as usize];
    for b in chain.iter_mut().take((total % parts) as usize) {
        *b += 1;
    }
    chain
}

fn ac3() -> Outcome {
    // 128-bit column of the HE standard table, written out independently
    let table = [(1024usize, 27u32), (2048, 54), (4096, 109), (8192, 218), (16384, 438), (32768, 881)];
    let mut bad = Vec::new();
    for (n, max) in table {
        let at = validate_params(ParameterSet::custom(n, chain_of(max), 30, 128));
        let over = validate_params(ParameterSet::custom(n, chain_of(max + 1), 30, 128));
        if at.is_err() || !matches!(over, Err(Error::Security { .. })) {
            bad.push(format!("N={n}"));
        }
    }
    let used: Vec<u32> = Preset::ALL
        .iter()
        .map(|p| validate_params(p.params()).map(|p| p.total_bits()).unwrap_or(0))
        .collect();
    outcome(
        bad.is_empty() && used == [218, 280, 360],
        format!("table rows failing: {bad:?}; preset moduli used {used:?} (expect [218, 280, 360])"),
    )
}

fn ac4() -> Outcome {
    let cfg1 = NewtonConfig::new(X0, 1).unwrap();
    let cfg2 = NewtonConfig::new(X0, 2).unwrap();
    let steps = 4000;
    let (lo, hi) = (450.0, 850.0);
    let (mut max1, mut central_max1) = (0.0f64, 0.0f64);
    let mut never_worse = true;
    let mut within = Vec::new();
    for k in 0..=steps {
        let y: f64 = lo + (hi - lo) * k as f64 / steps as f64;
        let a = 1.0 / (y * y);
        // oracle: exact inverse square root and an independent Newton step
        let oracle_step = X0 * (1.5 - 0.5 * a * X0 * X0);
        let x1 = newton_inv_sqrt_plain(a, &cfg1);
        let x2 = newton_inv_sqrt_plain(a, &cfg2);
        assert!((x1 - oracle_step).abs() <= 1e-9 * y);
        let e1 = (x1 - y).abs() / y;
        let e2 = (x2 - y).abs() / y;
        max1 = max1.max(e1);
        if (550.0..=750.0).contains(&y) {
            central_max1 = central_max1.max(e1);
        }
        never_worse &= e2 <= e1 + 1e-12;
        if e1 <= 0.025 {
            within.push(y);
        }
    }
    let band = within.first().zip(within.last()).map(|(a, b)| (*a, *b)).unwrap_or((0.0, 0.0));
    let frac = (band.1 - band.0) / (hi - lo);
    let pass = max1 <= 0.05 && central_max1 <= 0.025 && never_worse;
    outcome(
        pass,
        format!(
            "1 iter max rel. error {:.1}% (≤ 5%), central half max {:.1}% (≤ 2.5%), ≤ 2.5% on [{:.0}, {:.0}] = {:.0}% of band; 2 iter never worse: {never_worse}",
            max1 * 100.0,
            central_max1 * 100.0,
            band.0,
            band.1,
            frac * 100.0
        ),
    )
}

fn ac5() -> Outcome {
    let d = 16;
    let users = 10;
    let probes = 20;
    let corpus = SyntheticCorpus::generate(&CorpusSpec { speakers: users, tests: 2, spread: 0.5, ..CorpusSpec::new(d) }, 105)
        .unwrap();
    let mut summary = Vec::new();
    let mut pass = true;
    for (preset, tol) in [(Preset::SetI, 5e-2), (Preset::SetII, 1e-2), (Preset::SetIII, 1e-2)] {
        let ctx = CkksContext::new(preset.params()).unwrap();
        let q = spd_matrix(&mut rng_from_seed(205), d);
        let dir = tempfile::tempdir().unwrap();
        let config = ServerConfig { iterations: preset.iterations(), mode: MatvecMode::BabyGiant };
        let server = Server::new(ctx.clone(), q.clone(), EnrollmentStore::open(dir.path()).unwrap(), config).unwrap();
        let newton = NewtonConfig::new(X0, preset.iterations()).unwrap();
        let errors: Vec<f64> = (0..users)
            .into_par_iter()
            .flat_map_iter(|u| {
                let mut rng = rng_from_seed(1000 + u as u64);
                let client = Client::generate(ctx.clone(), d, MatvecMode::BabyGiant, &mut rng).unwrap();
                let user = format!("user-{u}");
                let w1 = corpus.enroll[u].as_slice();
                let enroll = Message::Enroll(Box::new(client.enrollment(&user, &[w1], X0, &mut rng).unwrap()));
                let (kind, reply) = server.handle(enroll.kind() as u8, &enroll.to_bytes(&ctx));
                assert!(matches!(Message::from_bytes(&ctx, &reply), Ok(Message::Ack(_))), "enrollment kind {kind}");
                (0..probes)
                    .map(|p| {
                        let (s, j) = ((u + p / 2) % users, p % 2);
                        let w2 = corpus.tests[s][j].as_slice();
                        let req = Message::Verify(client.verification(&user, &[w2], &mut rng).unwrap());
                        let (_, reply) = server.handle(req.kind() as u8, &req.to_bytes(&ctx));
                        let Ok(Message::Response(resp)) = Message::from_bytes(&ctx, &reply) else {
                            panic!("verification failed");
                        };
                        let got = client.decide(&resp, 0.0).unwrap()[0].score;
                        (got - score_approx_plain(w1, w2, &q, &newton).unwrap()).abs()
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let worst = errors.iter().copied().fold(0.0, f64::max);
        pass &= worst <= tol;
        summary.push(format!("{} {} trips max |Δ| {worst:.1e} (≤ {tol:.0e})", preset.label(), errors.len()));
    }
    outcome(pass, summary.join("; "))
}

/// Fixed-seed corpus for the error-rate criteria. Dimension 16 keeps the
/// encrypted run to a couple of hundred ciphertext batches.
fn eer_corpus() -> (SyntheticCorpus, ProjectionMatrix) {
    let spec = CorpusSpec { spread: 0.5, ..CorpusSpec::new(16) };
    (SyntheticCorpus::generate(&spec, 7).unwrap(), ProjectionMatrix::identity(16))
}

fn eer(corpus: &SyntheticCorpus, q: &ProjectionMatrix, scorer: &Scorer) -> EvalReport {
    let t = run_trials(corpus, q, scorer).unwrap();
    compute_eer(&t.genuine, &t.imposter).unwrap()
}

fn ac6() -> Outcome {
    let (corpus, q) = eer_corpus();
    let base = eer(&corpus, &q, &Scorer::Baseline);
    let a2 = eer(&corpus, &q, &Scorer::Approx(NewtonConfig::new(X0, 2).unwrap()));
    let a1 = eer(&corpus, &q, &Scorer::Approx(NewtonConfig::new(X0, 1).unwrap()));
    let enc = eer(
        &corpus,
        &q,
        &Scorer::Encrypted {
            params: Preset::SetII.params(),
            newton: NewtonConfig::new(X0, Preset::SetII.iterations()).unwrap(),
            mode: MatvecMode::BabyGiant,
            seed: 106,
        },
    );
    let ordered = base.eer <= a2.eer && a2.eer <= a1.eer;
    let bounded = enc.eer - base.eer <= 0.035;
    outcome(
        ordered && bounded,
        format!(
            "{}/{} trials: baseline {:.2}%, approx 2 iter {:.2}%, approx 1 iter {:.2}%, encrypted Set II {:.2}% (loss {:+.2}%, ≤ 3.5%)",
            base.genuine_trials,
            base.imposter_trials,
            base.eer * 100.0,
            a2.eer * 100.0,
            a1.eer * 100.0,
            enc.eer * 100.0,
            (enc.eer - base.eer) * 100.0
        ),
    )
}

fn ac7() -> Outcome {
    // plaintext only, so the full default dimension is affordable
    let corpus = SyntheticCorpus::generate(&CorpusSpec::default(), 7).unwrap();
    let q = ProjectionMatrix::identity(corpus.dim);
    let t = run_trials(&corpus, &q, &Scorer::Baseline).unwrap();
    let r = compute_eer(&t.genuine, &t.imposter).unwrap();
    let theta = r.eer_threshold;
    let imposter_far = acceptance_rate(&t.imposter, theta);
    let ones = attack_patterned(&corpus, &q, &Scorer::Baseline, theta, 107).unwrap();
    let random = attack_random(&corpus, &q, &Scorer::Baseline, theta, 107).unwrap();
    outcome(
        ones.far <= imposter_far && random.far <= imposter_far,
        format!(
            "d={} θ={theta:.4}: imposter FAR {:.2}%, all-ones FAR {:.2}%, random FAR {:.2}%",
            corpus.dim,
            imposter_far * 100.0,
            ones.far * 100.0,
            random.far * 100.0
        ),
    )
}

fn ac8() -> Outcome {
    let ctx = CkksContext::new(Preset::SetI.params()).unwrap();
    let mut rng = rng_from_seed(108);
    let keys = keygen(&ctx, &mut rng).unwrap();
    let values = random_vec(&mut rng, 200, 1.0);
    let distinct: HashSet<Vec<u8>> = (0..100)
        .map(|_| encrypt_values(&ctx, &values, &keys.public, &mut rng).unwrap().to_bytes(&ctx))
        .collect();
    outcome(distinct.len() == 100, format!("{} distinct byte strings out of 100", distinct.len()))
}

fn ac9() -> Outcome {
    let mut rng = rng_from_seed(109);
    let rows: Vec<BenchRow> = [100, 200]
        .into_iter()
        .map(|d| bench(&Preset::SetI.params(), &spd_matrix(&mut rng, d), 1, X0, 3, 109).unwrap())
        .collect();
    let (r100, r200) = (&rows[0], &rows[1]);
    let single_digit = r200.verify < 10.0;
    let faster = r100.verify < r200.verify;
    let ratio = r200.verify / r200.decrypt;
    outcome(
        single_digit && faster && ratio >= 100.0,
        format!(
            "Set I verify d=100 {:.3}s, d=200 {:.3}s; decrypt {:.4}s ({:.0}× faster than verify)",
            r100.verify, r200.verify, r200.decrypt, ratio
        ),
    )
}

fn ac10() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };
    for preset in Preset::ALL {
        let p = preset.params();
        let bytes = params_to_bytes(&p);
        check("params", params_from_bytes(&bytes).map(|b| params_to_bytes(&b) == bytes).unwrap_or(false));
    }

    let ctx = CkksContext::new(Preset::SetI.params()).unwrap();
    let d = 16;
    let mut rng = rng_from_seed(110);
    let client = Client::generate(ctx.clone(), d, MatvecMode::BabyGiant, &mut rng).unwrap();
    let keys = client.keys();
    fn same<T: Encodable>(ctx: &CkksContext, v: &T) -> bool {
        let bytes = v.to_bytes(ctx);
        T::from_bytes(ctx, &bytes).map(|b| b.to_bytes(ctx) == bytes).unwrap_or(false)
    }
    check("secret key", same::<SecretKey>(&ctx, &keys.secret));
    check("public key", same::<PublicKey>(&ctx, &keys.public));
    check("relin key", same::<RelinKey>(&ctx, &keys.relin));
    check("galois keys", same::<GaloisKeys>(&ctx, &keys.galois));
    let ct = encrypt_values(&ctx, &[0.25, -0.5], &keys.public, &mut rng).unwrap();
    check("ciphertext", same(&ctx, &ct));

    let dir = tempfile::tempdir().unwrap();
    let server = Server::new(
        ctx.clone(),
        ProjectionMatrix::identity(d),
        EnrollmentStore::open(dir.path()).unwrap(),
        ServerConfig::default(),
    )
    .unwrap();
    let w = random_vec(&mut rng, d, 0.01);
    let enroll = client.enrollment("u", &[&w], X0, &mut rng).unwrap();
    let bytes = enroll.to_bytes(&ctx);
    check("enrollment", EnrollmentRequest::from_bytes(&ctx, &bytes).map(|m| m.to_bytes(&ctx) == bytes).unwrap_or(false));
    let ack = server.enroll(&enroll).unwrap();
    let bytes = ack.to_bytes(&ctx);
    check("ack", EnrollAck::from_bytes(&ctx, &bytes).map(|m| m.to_bytes(&ctx) == bytes).unwrap_or(false));
    let verify = client.verification("u", &[&w], &mut rng).unwrap();
    let bytes = verify.to_bytes(&ctx);
    check("verification", VerificationRequest::from_bytes(&ctx, &bytes).map(|m| m.to_bytes(&ctx) == bytes).unwrap_or(false));
    let resp = server.verify(&verify).unwrap();
    let bytes = resp.to_bytes(&ctx);
    check("response", VerificationResponse::from_bytes(&ctx, &bytes).map(|m| m.to_bytes(&ctx) == bytes).unwrap_or(false));
    let err = ErrorMessage { message: "unknown user".into() };
    let bytes = err.to_bytes(&ctx);
    check("error", ErrorMessage::from_bytes(&ctx, &bytes).map(|m| m.to_bytes(&ctx) == bytes).unwrap_or(false));

    // plaintext artifacts regenerated under the same seed are byte-identical
    let spec = CorpusSpec::new(24);
    let corpus = |seed| SyntheticCorpus::generate(&spec, seed).unwrap();
    check("corpus stability", corpus(110).to_binary() == corpus(110).to_binary());
    check("corpus text stability", corpus(110).to_text() == corpus(110).to_text());
    let matrix = || spd_matrix(&mut rng_from_seed(110), 24).to_binary();
    check("matrix stability", matrix() == matrix());
    check("params stability", params_to_bytes(&Preset::SetII.params()) == params_to_bytes(&Preset::SetII.params()));
    let report = || {
        let c = corpus(111);
        let t = run_trials(&c, &ProjectionMatrix::identity(24), &Scorer::Baseline).unwrap();
        compute_eer(&t.genuine, &t.imposter).unwrap().to_json()
    };
    check("report stability", report() == report());

    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "params, 4 key types, ciphertext, 5 message kinds round trip; corpus, matrix, params and report stable".into()
        } else {
            format!("failed: {failures:?}")
        },
    )
}
