//! Randomness for secrets, errors and uniform masks.

use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use super::ntt::NttTable;
use super::poly::{Form, RnsPoly};
use crate::error::{Error, Result};

/// Standard deviation of the discrete error distribution.
pub const DEFAULT_SIGMA: f64 = 3.2;

/// Seedable CSPRNG used throughout; derive independent streams with [`split_rng`].
pub type HeRng = ChaCha20Rng;

pub fn rng_from_seed(seed: u64) -> HeRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Draws a fresh child generator, so work can be partitioned across threads.
pub fn split_rng(parent: &mut impl RngCore) -> HeRng {
    let mut seed = [0u8; 32];
    parent.fill_bytes(&mut seed);
    ChaCha20Rng::from_seed(seed)
}

/// Coefficients uniform in `{-1, 0, 1}`.
pub fn sample_ternary(tables: &[Arc<NttTable>], rng: &mut impl Rng) -> Result<RnsPoly> {
    let n = degree_of(tables)?;
    let coeffs: Vec<i64> = (0..n).map(|_| rng.gen_range(-1i64..=1)).collect();
    RnsPoly::from_signed(tables, &coeffs)
}

/// Rounded centered normal with tails clipped at `6σ`.
pub fn sample_gaussian(tables: &[Arc<NttTable>], sigma: f64, rng: &mut impl Rng) -> Result<RnsPoly> {
    let n = degree_of(tables)?;
    let coeffs = gaussian_coeffs(n, sigma, rng)?;
    RnsPoly::from_signed(tables, &coeffs)
}

pub(crate) fn gaussian_coeffs(n: usize, sigma: f64, rng: &mut impl Rng) -> Result<Vec<i64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Param(format!("sigma must be positive, got {sigma}")));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Param(e.to_string()))?;
    let bound = 6.0 * sigma;
    Ok((0..n)
        .map(|_| loop {
            let x: f64 = normal.sample(rng);
            if x.abs() <= bound {
                break x.round() as i64;
            }
        })
        .collect())
}

/// Independent uniform residues per limb, tagged with the requested form.
pub fn sample_uniform(tables: &[Arc<NttTable>], form: Form, rng: &mut impl Rng) -> Result<RnsPoly> {
    let n = degree_of(tables)?;
    let limbs = tables
        .iter()
        .map(|t| {
            let q = t.modulus().value();
            (0..n).map(|_| rng.gen_range(0..q)).collect()
        })
        .collect();
    RnsPoly::from_limbs(tables, limbs, form)
}

fn degree_of(tables: &[Arc<NttTable>]) -> Result<usize> {
    let t = tables
        .first()
        .ok_or_else(|| Error::Param("sampling needs at least one modulus".into()))?;
    Ok(t.degree())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::modulus::generate_ntt_primes;

    fn tables(n: usize) -> Vec<Arc<NttTable>> {
        generate_ntt_primes(n, &[40, 41])
            .unwrap()
            .into_iter()
            .map(|q| Arc::new(NttTable::new(q, n).unwrap()))
            .collect()
    }

    #[test]
    fn deterministic_under_seed() {
        let t = tables(64);
        let a = sample_uniform(&t, Form::Ntt, &mut rng_from_seed(4)).unwrap();
        let b = sample_uniform(&t, Form::Ntt, &mut rng_from_seed(4)).unwrap();
        assert_eq!(a, b);
        let c = sample_ternary(&t, &mut rng_from_seed(4)).unwrap();
        let d = sample_ternary(&t, &mut rng_from_seed(4)).unwrap();
        assert_eq!(c, d);
        let e = sample_gaussian(&t, DEFAULT_SIGMA, &mut rng_from_seed(5)).unwrap();
        let f = sample_gaussian(&t, DEFAULT_SIGMA, &mut rng_from_seed(5)).unwrap();
        assert_eq!(e, f);
    }

    #[test]
    fn ternary_range() {
        let t = tables(256);
        let p = sample_ternary(&t, &mut rng_from_seed(1)).unwrap();
        for (i, limb) in p.limbs().iter().enumerate() {
            let q = p.modulus(i);
            assert!(limb.iter().all(|&c| c == 0 || c == 1 || c == q.value() - 1));
        }
        // both limbs agree on the signed value
        let s0: Vec<i64> = p.limb(0).iter().map(|&c| p.modulus(0).center(c)).collect();
        let s1: Vec<i64> = p.limb(1).iter().map(|&c| p.modulus(1).center(c)).collect();
        assert_eq!(s0, s1);
    }

    #[test]
    fn gaussian_variance_within_five_percent() {
        let mut rng = rng_from_seed(99);
        let draws = gaussian_coeffs(1_000_000, DEFAULT_SIGMA, &mut rng).unwrap();
        let n = draws.len() as f64;
        let mean = draws.iter().map(|&x| x as f64).sum::<f64>() / n;
        let var = draws.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let target = DEFAULT_SIGMA * DEFAULT_SIGMA;
        assert!((var - target).abs() / target < 0.05, "variance {var}");
        assert!(draws.iter().all(|&x| (x as f64).abs() <= 6.0 * DEFAULT_SIGMA + 0.5));
    }

    #[test]
    fn rejects_bad_sigma() {
        let t = tables(16);
        assert!(sample_gaussian(&t, 0.0, &mut rng_from_seed(0)).is_err());
    }
}
