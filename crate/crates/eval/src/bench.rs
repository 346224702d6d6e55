//! Wall-clock timings of the protocol phases.

use std::time::Instant;

use serde::Serialize;

use hevf_core::ckks::{CkksContext, ParameterSet};
use hevf_core::linalg::{MatvecMode, ProjectionMatrix};
use hevf_core::ring::rng_from_seed;
use hevf_protocol::{Client, EnrollmentStore, Server, ServerConfig};

use crate::corpus::{CorpusSpec, SyntheticCorpus};
use crate::error::{EvalError, Result};

/// Median seconds per phase for one parameter set and dimension.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub params: String,
    pub dim: usize,
    pub repetitions: usize,
    /// Client key generation including the rotation keys.
    pub keygen: f64,
    /// Encrypting the enrollment and storing it server-side.
    pub enrol: f64,
    /// Server-side score evaluation, including loading the record.
    pub verify: f64,
    /// Client-side decryption and decision.
    pub decrypt: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let t = Instant::now();
    let v = f()?;
    Ok((v, t.elapsed().as_secs_f64()))
}

/// Runs `repetitions` full keygen → enrol → verify → decrypt cycles with
/// one synthetic speaker and reports medians. The matrix's diagonals are
/// encoded before timing starts, as a server would at start-up.
pub fn bench(params: &ParameterSet, q: &ProjectionMatrix, iterations: usize, x0: f64, repetitions: usize, seed: u64) -> Result<BenchRow> {
    if repetitions == 0 {
        return Err(EvalError::Spec("at least one repetition is needed".into()));
    }
    let d = q.dim();
    let ctx = CkksContext::new(params.clone())?;
    let dir = tempfile::tempdir()?;
    let config = ServerConfig { iterations, mode: MatvecMode::BabyGiant };
    let server = Server::new(ctx.clone(), q.clone(), EnrollmentStore::open(dir.path())?, config)?;
    server.circuit().prepare(ctx.max_level(), x0)?;
    let corpus = SyntheticCorpus::generate(&CorpusSpec { speakers: 2, tests: 1, ..CorpusSpec::new(d) }, seed)?;
    let mut rng = rng_from_seed(seed);
    let (mut kg, mut en, mut ve, mut de) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for rep in 0..repetitions {
        let user = format!("bench-{rep}");
        let (client, t) = timed(|| Ok(Client::generate(ctx.clone(), d, config.mode, &mut rng)?))?;
        kg.push(t);
        let w1 = corpus.enroll[0].as_slice();
        let ((), t) = timed(|| {
            let req = client.enrollment(&user, &[w1], x0, &mut rng)?;
            server.enroll(&req)?;
            Ok(())
        })?;
        en.push(t);
        let probe = client.verification(&user, &[corpus.tests[0][0].as_slice()], &mut rng)?;
        let (resp, t) = timed(|| Ok(server.verify(&probe)?))?;
        ve.push(t);
        let (_, t) = timed(|| Ok(client.decide(&resp, 0.0)?))?;
        de.push(t);
    }
    Ok(BenchRow {
        params: params.name.clone(),
        dim: d,
        repetitions,
        keygen: median(kg),
        enrol: median(en),
        verify: median(ve),
        decrypt: median(de),
    })
}

/// Rows laid out as phases × configurations.
pub fn bench_table(rows: &[BenchRow]) -> String {
    let mut s = format!("{:<8}", "phase");
    for r in rows {
        s.push_str(&format!(" {:>14}", format!("{} d={}", r.params, r.dim)));
    }
    s.push('\n');
    let phases: [(&str, fn(&BenchRow) -> f64); 4] =
        [("KG", |r| r.keygen), ("Enrol", |r| r.enrol), ("Dec.", |r| r.decrypt), ("Veri.", |r| r.verify)];
    for (name, get) in phases {
        s.push_str(&format!("{name:<8}"));
        for r in rows {
            s.push_str(&format!(" {:>14.4}", get(r)));
        }
        s.push('\n');
    }
    s
}
