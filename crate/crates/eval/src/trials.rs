//! Scoring genuine and imposter trials.

use std::sync::Arc;

use rayon::prelude::*;

use hevf_core::ckks::{decrypt_values, CkksContext, Evaluator, ParameterSet};
use hevf_core::linalg::{pack, MatvecMode, ProjectionMatrix};
use hevf_core::ring::rng_from_seed;
use hevf_core::score::{cosine_score_plain, score_approx_plain, NewtonConfig, ScoreCircuit};
use hevf_protocol::Client;

use crate::corpus::SyntheticCorpus;
use crate::error::{EvalError, Result};

#[derive(Clone, Debug)]
pub enum Scorer {
    /// Exact cosine score.
    Baseline,
    /// Newton-approximated score in plaintext.
    Approx(NewtonConfig),
    /// Newton-approximated score evaluated under encryption. One key pair
    /// serves the whole run and trials are packed into ciphertext blocks.
    Encrypted { params: ParameterSet, newton: NewtonConfig, mode: MatvecMode, seed: u64 },
}

impl Scorer {
    pub fn label(&self) -> String {
        match self {
            Scorer::Baseline => "baseline".into(),
            Scorer::Approx(c) => format!("approx({} iter)", c.iterations),
            Scorer::Encrypted { params, newton, .. } => format!("encrypted({}, {} iter)", params.name, newton.iterations),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrialScores {
    pub genuine: Vec<f64>,
    pub imposter: Vec<f64>,
}

/// Scores `(enrollment, probe)` pairs in order.
pub fn run_pairs(pairs: &[(&[f64], &[f64])], q: &ProjectionMatrix, scorer: &Scorer) -> Result<Vec<f64>> {
    match scorer {
        Scorer::Baseline => pairs.iter().map(|(a, b)| Ok(cosine_score_plain(a, b, q)?)).collect(),
        Scorer::Approx(cfg) => pairs.iter().map(|(a, b)| Ok(score_approx_plain(a, b, q, cfg)?)).collect(),
        Scorer::Encrypted { params, newton, mode, seed } => encrypted_pairs(pairs, q, params, newton, *mode, *seed),
    }
}

fn encrypted_pairs(
    pairs: &[(&[f64], &[f64])],
    q: &ProjectionMatrix,
    params: &ParameterSet,
    newton: &NewtonConfig,
    mode: MatvecMode,
    seed: u64,
) -> Result<Vec<f64>> {
    if let Some((a, b)) = pairs.iter().find(|(a, b)| a.len() != q.dim() || b.len() != q.dim()) {
        return Err(EvalError::Spec(format!(
            "pair of dimensions {}/{} for a {}-dimensional matrix",
            a.len(),
            b.len(),
            q.dim()
        )));
    }
    let ctx = CkksContext::new(params.clone())?;
    let circuit = ScoreCircuit::new(ctx.clone(), q.clone(), newton.iterations, mode)?;
    let client = Client::generate(ctx.clone(), q.dim(), mode, &mut rng_from_seed(seed))?;
    let keys = client.keys();
    let ev = Evaluator::with_keys(ctx.clone(), Arc::new(keys.relin.clone()), Arc::new(keys.galois.clone()));
    let layout = *circuit.layout();
    let x0 = newton.x0;
    let batches: Vec<Vec<f64>> = pairs
        .par_chunks(layout.blocks)
        .enumerate()
        .map(|(batch, chunk)| -> Result<Vec<f64>> {
            let mut rng = rng_from_seed(seed ^ (batch as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let scaled = |c: f64| -> Vec<Vec<f64>> { chunk.iter().map(|(a, _)| a.iter().map(|x| c * x).collect()).collect() };
            let ea = scaled(1.5 * x0);
            let eb = scaled(0.5 * x0 * x0 * x0);
            let sa: Vec<&[f64]> = ea.iter().map(Vec::as_slice).collect();
            let sb: Vec<&[f64]> = eb.iter().map(Vec::as_slice).collect();
            let s2: Vec<&[f64]> = chunk.iter().map(|(_, b)| *b).collect();
            let ct_a = pack(&ctx, &keys.public, layout, &sa, &mut rng)?;
            let ct_b = pack(&ctx, &keys.public, layout, &sb, &mut rng)?;
            let ct_w2 = pack(&ctx, &keys.public, layout, &s2, &mut rng)?;
            let out = circuit.evaluate(&ev, &ct_a, &ct_b, &ct_w2, x0)?;
            let slots = decrypt_values(&ctx, &out.ct, &keys.secret)?;
            Ok((0..chunk.len()).map(|k| slots[layout.block_offset(k)]).collect())
        })
        .collect::<Result<_>>()?;
    Ok(batches.into_iter().flatten().collect())
}

/// All `S·T` genuine and `S·(S−1)·T` imposter trials of the corpus.
pub fn run_trials(corpus: &SyntheticCorpus, q: &ProjectionMatrix, scorer: &Scorer) -> Result<TrialScores> {
    let pairs = |trials: Vec<(usize, usize, usize)>| -> Vec<(&[f64], &[f64])> {
        trials
            .into_iter()
            .map(|(s, u, j)| (corpus.enroll[s].as_slice(), corpus.tests[u][j].as_slice()))
            .collect()
    };
    let genuine = pairs(corpus.genuine_trials());
    let imposter = pairs(corpus.imposter_trials());
    // one encrypted run for both lists so they share keys
    let mut all = genuine.clone();
    all.extend(imposter.iter().copied());
    let mut scores = run_pairs(&all, q, scorer)?;
    let imposter_scores = scores.split_off(genuine.len());
    Ok(TrialScores { genuine: scores, imposter: imposter_scores })
}
