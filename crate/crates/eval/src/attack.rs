//! Spoofing attacks: an attacker who controls the device submits vectors
//! that were never produced by the enrolled speaker.

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use hevf_core::linalg::ProjectionMatrix;
use hevf_core::ring::rng_from_seed;

use crate::corpus::SyntheticCorpus;
use crate::error::Result;
use crate::metrics::acceptance_rate;
use crate::trials::{run_pairs, Scorer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AttackKind {
    /// The same all-ones vector against every enrollment.
    AllOnes,
    /// A fresh uniformly random direction per attempt.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttackReport {
    pub kind: AttackKind,
    pub theta: f64,
    pub scores: Vec<f64>,
    /// Fraction of attack attempts accepted at `theta`.
    pub far: f64,
}

/// Median norm over all corpus vectors.
pub fn median_norm(corpus: &SyntheticCorpus) -> f64 {
    let mut norms: Vec<f64> = corpus
        .enroll
        .iter()
        .chain(corpus.tests.iter().flatten())
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    norms.sort_by(f64::total_cmp);
    norms[norms.len() / 2]
}

/// Attack vectors scaled to the corpus's median norm, one per attempt.
pub fn attack_vectors(corpus: &SyntheticCorpus, kind: AttackKind, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let d = corpus.dim;
    let norm = median_norm(corpus);
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|_| {
            let v: Vec<f64> = match kind {
                AttackKind::AllOnes => vec![1.0; d],
                AttackKind::Random => (0..d).map(|_| StandardNormal.sample(&mut rng)).collect::<Vec<f64>>(),
            };
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x * norm / n).collect()
        })
        .collect()
}

/// Runs `T` attack attempts against every enrolled speaker and reports the
/// acceptance rate at `theta`.
pub fn attack(
    corpus: &SyntheticCorpus,
    q: &ProjectionMatrix,
    scorer: &Scorer,
    kind: AttackKind,
    theta: f64,
    seed: u64,
) -> Result<AttackReport> {
    let per = corpus.tests_per_speaker();
    let vectors = attack_vectors(corpus, kind, corpus.speakers() * per, seed);
    let pairs: Vec<(&[f64], &[f64])> =
        vectors.iter().enumerate().map(|(i, v)| (corpus.enroll[i / per].as_slice(), v.as_slice())).collect();
    let scores = run_pairs(&pairs, q, scorer)?;
    let far = acceptance_rate(&scores, theta);
    Ok(AttackReport { kind, theta, scores, far })
}

pub fn attack_random(corpus: &SyntheticCorpus, q: &ProjectionMatrix, scorer: &Scorer, theta: f64, seed: u64) -> Result<AttackReport> {
    attack(corpus, q, scorer, AttackKind::Random, theta, seed)
}

pub fn attack_patterned(corpus: &SyntheticCorpus, q: &ProjectionMatrix, scorer: &Scorer, theta: f64, seed: u64) -> Result<AttackReport> {
    attack(corpus, q, scorer, AttackKind::AllOnes, theta, seed)
}
