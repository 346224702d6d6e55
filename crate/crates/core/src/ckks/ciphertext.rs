use crate::error::{Error, Result};
use crate::ring::{Form, RnsPoly};

use super::context::CkksContext;

/// A pair `(c0, c1)` with `c0 + c1·s ≈ scale · m`, over `q_0..q_level`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ciphertext {
    pub(crate) c0: RnsPoly,
    pub(crate) c1: RnsPoly,
    pub(crate) level: usize,
    pub(crate) scale: f64,
}

impl Ciphertext {
    pub fn from_parts(ctx: &CkksContext, c0: RnsPoly, c1: RnsPoly, level: usize, scale: f64) -> Result<Self> {
        let tables = ctx.tables_at_level(level)?;
        let want: Vec<u64> = tables.iter().map(|t| t.modulus().value()).collect();
        for c in [&c0, &c1] {
            if c.moduli_values() != want || c.form() != Form::Ntt {
                return Err(Error::Structure(format!(
                    "ciphertext component does not match level {level} of the parameter set"
                )));
            }
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Structure(format!("invalid ciphertext scale {scale}")));
        }
        Ok(Self { c0, c1, level, scale })
    }

    /// Remaining rescales before the chain is exhausted.
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn limb_count(&self) -> usize {
        self.c0.limb_count()
    }

    pub fn slot_count(&self) -> usize {
        self.c0.degree() / 2
    }

    pub fn c0(&self) -> &RnsPoly {
        &self.c0
    }

    pub fn c1(&self) -> &RnsPoly {
        &self.c1
    }

    /// Reinterprets the payload at a different scale, multiplying the
    /// represented values by `self.scale / scale`.
    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }
}
