//! Parameter sets and the lattice-security size gate.

use std::fmt;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ring::MAX_MODULUS_BITS;

/// Maximum total modulus size (bits) per ring degree for 128/192/256-bit security.
pub const SECURITY_TABLE: [(usize, [u32; 3]); 6] = [
    (1024, [27, 19, 14]),
    (2048, [54, 37, 29]),
    (4096, [109, 75, 58]),
    (8192, [218, 152, 118]),
    (16384, [438, 305, 237]),
    (32768, [881, 611, 476]),
];

/// Largest modulus size in bits permitted for `(degree, security_bits)`.
pub fn max_modulus_bits(degree: usize, security_bits: u32) -> Result<u32> {
    let column = match security_bits {
        128 => 0,
        192 => 1,
        256 => 2,
        other => {
            return Err(Error::Param(format!(
                "unsupported security level {other}; expected 128, 192 or 256"
            )))
        }
    };
    SECURITY_TABLE
        .iter()
        .find(|(n, _)| *n == degree)
        .map(|(_, row)| row[column])
        .ok_or_else(|| Error::Param(format!("no security bound tabulated for N={degree}")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    SetI,
    SetII,
    SetIII,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::SetI, Preset::SetII, Preset::SetIII];

    pub fn label(&self) -> &'static str {
        match self {
            Preset::SetI => "set1",
            Preset::SetII => "set2",
            Preset::SetIII => "set3",
        }
    }

    /// Newton iterations the preset is sized for.
    pub fn iterations(&self) -> usize {
        match self {
            Preset::SetIII => 2,
            _ => 1,
        }
    }

    pub fn params(&self) -> ParameterSet {
        let (degree, base, delta, levels, special) = match self {
            Preset::SetI => (8192, 41, 34, 4, 41),
            Preset::SetII => (16384, 60, 40, 4, 60),
            Preset::SetIII => (16384, 60, 40, 6, 60),
        };
        let mut chain = vec![base];
        chain.extend(std::iter::repeat(delta).take(levels));
        chain.push(special);
        ParameterSet {
            name: self.label().to_string(),
            degree,
            chain_bits: chain,
            delta_bits: delta,
            security_bits: 128,
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_', ' '], "").as_str() {
            "set1" | "seti" | "i" | "1" => Ok(Preset::SetI),
            "set2" | "setii" | "ii" | "2" => Ok(Preset::SetII),
            "set3" | "setiii" | "iii" | "3" => Ok(Preset::SetIII),
            _ => Err(Error::Param(format!("unknown preset '{s}' (expected set1, set2 or set3)"))),
        }
    }
}

/// Outcome of the size gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SecurityMargin {
    /// Modulus uses exactly the tabulated maximum.
    AtBound,
    /// Strictly below the maximum: security exceeds the claimed level.
    AboveTarget,
}

/// Ring degree, modulus chain layout `[base, Δ-sized × L, special]` and scale.
///
/// The chain is described by prime bit sizes; concrete primes are generated
/// deterministically when a [`super::CkksContext`] is built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParameterSet {
    pub name: String,
    pub degree: usize,
    pub chain_bits: Vec<u32>,
    pub delta_bits: u32,
    pub security_bits: u32,
}

impl ParameterSet {
    pub fn custom(degree: usize, chain_bits: Vec<u32>, delta_bits: u32, security_bits: u32) -> Self {
        Self { name: "custom".into(), degree, chain_bits, delta_bits, security_bits }
    }

    /// Multiplicative levels: ciphertext primes after the base prime.
    pub fn levels(&self) -> usize {
        self.chain_bits.len().saturating_sub(2)
    }

    pub fn slots(&self) -> usize {
        self.degree / 2
    }

    pub fn total_bits(&self) -> u32 {
        self.chain_bits.iter().sum()
    }

    pub fn scale(&self) -> f64 {
        2f64.powi(self.delta_bits as i32)
    }

    /// Canonical byte encoding used for hashing and serialization.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.degree as u64).to_le_bytes());
        out.extend_from_slice(&self.delta_bits.to_le_bytes());
        out.extend_from_slice(&self.security_bits.to_le_bytes());
        out.extend_from_slice(&(self.chain_bits.len() as u32).to_le_bytes());
        for b in &self.chain_bits {
            out.extend_from_slice(&b.to_le_bytes());
        }
        out
    }

    /// Identifies the arithmetic (not the label) of this parameter set.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"HEVF-params-v1");
        h.update(self.canonical_bytes());
        h.finalize().into()
    }

    /// `base+Δ×L+special` notation, e.g. `41,34,34,34,34,41`.
    pub fn chain_spec(&self) -> String {
        self.chain_bits.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(",")
    }

    pub fn parse_chain(spec: &str) -> Result<Vec<u32>> {
        spec.split(',')
            .map(|s| {
                s.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::Param(format!("invalid prime size '{s}' in chain")))
            })
            .collect()
    }

    pub fn security_margin(&self) -> Result<SecurityMargin> {
        let max = max_modulus_bits(self.degree, self.security_bits)?;
        Ok(if self.total_bits() == max {
            SecurityMargin::AtBound
        } else {
            SecurityMargin::AboveTarget
        })
    }
}

impl fmt::Display for ParameterSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (N={}, chain=[{}], Δ=2^{}, L={}, {} bits used)",
            self.name,
            self.degree,
            self.chain_spec(),
            self.delta_bits,
            self.levels(),
            self.total_bits()
        )
    }
}

/// Checks structure and the tabulated size bound; returns the accepted set.
pub fn validate_params(candidate: ParameterSet) -> Result<ParameterSet> {
    if !candidate.degree.is_power_of_two() || candidate.degree < 2 {
        return Err(Error::Param(format!("ring degree {} is not a power of two", candidate.degree)));
    }
    if candidate.chain_bits.len() < 2 {
        return Err(Error::Param("modulus chain needs at least a base and a special prime".into()));
    }
    if let Some(b) = candidate.chain_bits.iter().find(|&&b| !(2..=MAX_MODULUS_BITS).contains(&b)) {
        return Err(Error::Param(format!("prime size {b} outside [2, {MAX_MODULUS_BITS}] bits")));
    }
    if candidate.delta_bits == 0 || candidate.delta_bits > MAX_MODULUS_BITS {
        return Err(Error::Param(format!("scale exponent {} out of range", candidate.delta_bits)));
    }
    let max = max_modulus_bits(candidate.degree, candidate.security_bits)?;
    let used = candidate.total_bits();
    if used > max {
        return Err(Error::Security {
            degree: candidate.degree,
            security_bits: candidate.security_bits,
            used_bits: used,
            max_bits: max,
        });
    }
    Ok(candidate)
}
