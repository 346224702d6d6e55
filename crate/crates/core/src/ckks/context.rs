use std::sync::Arc;

use super::encoding::SpecialFft;
use super::params::{validate_params, ParameterSet};
use crate::error::{Error, Result};
use crate::ring::{generate_ntt_primes, Modulus, NttTable};

/// Validated parameters plus everything derived from them: the concrete
/// primes, NTT tables and encoder roots. Immutable and shared behind an `Arc`.
#[derive(Debug)]
pub struct CkksContext {
    params: ParameterSet,
    hash: [u8; 32],
    chain: Vec<Arc<NttTable>>,
    special: Arc<NttTable>,
    fft: SpecialFft,
}

impl CkksContext {
    pub fn new(params: ParameterSet) -> Result<Arc<Self>> {
        let params = validate_params(params)?;
        let primes = generate_ntt_primes(params.degree, &params.chain_bits)?;
        let tables = primes
            .iter()
            .map(|&q| NttTable::new(q, params.degree).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        let (special, chain) = tables.split_last().expect("validated chain has >= 2 primes");
        Ok(Arc::new(Self {
            hash: params.hash(),
            fft: SpecialFft::new(params.degree),
            chain: chain.to_vec(),
            special: special.clone(),
            params,
        }))
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn params_hash(&self) -> [u8; 32] {
        self.hash
    }

    pub fn degree(&self) -> usize {
        self.params.degree
    }

    pub fn slots(&self) -> usize {
        self.params.degree / 2
    }

    /// Level of a fresh ciphertext (number of rescales available).
    pub fn max_level(&self) -> usize {
        self.chain.len() - 1
    }

    pub fn default_scale(&self) -> f64 {
        self.params.scale()
    }

    pub fn chain_moduli(&self) -> Vec<Modulus> {
        self.chain.iter().map(|t| *t.modulus()).collect()
    }

    pub fn special_modulus(&self) -> Modulus {
        *self.special.modulus()
    }

    /// Ciphertext moduli active at `level`: `q_0 .. q_level`.
    pub fn tables_at_level(&self, level: usize) -> Result<&[Arc<NttTable>]> {
        if level > self.max_level() {
            return Err(Error::Structure(format!(
                "level {level} exceeds the chain's maximum {}",
                self.max_level()
            )));
        }
        Ok(&self.chain[..=level])
    }

    /// `q_0 .. q_level` followed by the special prime.
    pub fn extended_tables(&self, level: usize) -> Result<Vec<Arc<NttTable>>> {
        let mut t = self.tables_at_level(level)?.to_vec();
        t.push(self.special.clone());
        Ok(t)
    }

    pub(crate) fn special_table(&self) -> &Arc<NttTable> {
        &self.special
    }

    pub(crate) fn fft(&self) -> &SpecialFft {
        &self.fft
    }

    /// Galois element for a left rotation by `steps` slots.
    pub fn galois_element(&self, steps: usize) -> usize {
        self.fft.galois_element(steps)
    }
}
