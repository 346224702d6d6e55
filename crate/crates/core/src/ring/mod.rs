//! Exact arithmetic in `Z_Q[X]/(X^N + 1)` under a residue number system.

mod modulus;
mod ntt;
mod poly;
mod sample;

pub use modulus::{generate_ntt_primes, is_prime, Modulus, MAX_MODULUS_BITS};
pub use ntt::NttTable;
pub use poly::{Form, RnsPoly};
pub use sample::{
    rng_from_seed, sample_gaussian, sample_ternary, sample_uniform, split_rng, HeRng, DEFAULT_SIGMA,
};
