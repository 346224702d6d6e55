//! Evaluation harness: synthetic speaker corpora, trial scoring with the
//! plaintext, approximate and encrypted scorers, FAR/FRR/EER reports, attack
//! simulations and timing benchmarks.

pub mod attack;
pub mod bench;
pub mod corpus;
mod error;
pub mod metrics;
pub mod trials;

pub use attack::{attack, attack_patterned, attack_random, AttackKind, AttackReport};
pub use bench::{bench, bench_table, BenchRow};
pub use corpus::{CorpusSpec, SyntheticCorpus};
pub use error::{EvalError, Result};
pub use metrics::{acceptance_rate, compute_eer, EvalReport, PhaseTimings};
pub use trials::{run_pairs, run_trials, Scorer, TrialScores};
