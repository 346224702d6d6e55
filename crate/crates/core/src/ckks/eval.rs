//! Encryption, decryption and homomorphic evaluation.

use std::sync::Arc;

use rand::Rng;

use super::ciphertext::Ciphertext;
use super::context::CkksContext;
use super::encoding::{self, Plaintext};
use super::keys::{key_switch, GaloisKeys, PublicKey, RelinKey, SecretKey};
use crate::error::{Error, Result};
use crate::ring::{sample_gaussian, sample_ternary, DEFAULT_SIGMA};

/// Relative tolerance under which two scales are considered equal.
pub const SCALE_TOLERANCE: f64 = 1e-9;

/// Public-key encryption at the plaintext's level. Randomized: `v·pk + (m + e0, e1)`.
pub fn encrypt(ctx: &CkksContext, pt: &Plaintext, pk: &PublicKey, rng: &mut impl Rng) -> Result<Ciphertext> {
    let tables = ctx.tables_at_level(pt.level)?;
    let mut v = sample_ternary(tables, rng)?;
    v.to_ntt();
    let mut e0 = sample_gaussian(tables, DEFAULT_SIGMA, rng)?;
    let mut e1 = sample_gaussian(tables, DEFAULT_SIGMA, rng)?;
    e0.to_ntt();
    e1.to_ntt();
    let b = pk.b.truncate_limbs(pt.level + 1)?;
    let a = pk.a.truncate_limbs(pt.level + 1)?;
    let mut c0 = v.ring_mul(&b)?;
    c0.add_assign(&e0)?;
    c0.add_assign(&pt.poly)?;
    let mut c1 = v.ring_mul(&a)?;
    c1.add_assign(&e1)?;
    Ok(Ciphertext { c0, c1, level: pt.level, scale: pt.scale })
}

/// Encodes at the context's default scale and full level, then encrypts.
pub fn encrypt_values(ctx: &CkksContext, values: &[f64], pk: &PublicKey, rng: &mut impl Rng) -> Result<Ciphertext> {
    let pt = encoding::encode(ctx, values, ctx.default_scale(), ctx.max_level())?;
    encrypt(ctx, &pt, pk, rng)
}

/// `c0 + c1·s`. A wrong secret yields garbage; nothing is authenticated.
pub fn decrypt(ctx: &CkksContext, ct: &Ciphertext, sk: &SecretKey) -> Result<Plaintext> {
    ctx.tables_at_level(ct.level)?;
    let s = sk.at_level(ct.level)?;
    let mut m = ct.c1.ring_mul(&s)?;
    m.add_assign(&ct.c0)?;
    Ok(Plaintext { poly: m, scale: ct.scale, level: ct.level })
}

pub fn decrypt_values(ctx: &CkksContext, ct: &Ciphertext, sk: &SecretKey) -> Result<Vec<f64>> {
    Ok(encoding::decode(&decrypt(ctx, ct, sk)?, ctx))
}

fn scales_match(a: f64, b: f64) -> bool {
    (a - b).abs() <= SCALE_TOLERANCE * a.abs().max(b.abs())
}

/// Homomorphic operations that need only public material.
#[derive(Clone, Debug)]
pub struct Evaluator {
    ctx: Arc<CkksContext>,
    relin: Option<Arc<RelinKey>>,
    galois: Option<Arc<GaloisKeys>>,
}

impl Evaluator {
    pub fn new(ctx: Arc<CkksContext>) -> Self {
        Self { ctx, relin: None, galois: None }
    }

    pub fn with_keys(ctx: Arc<CkksContext>, relin: Arc<RelinKey>, galois: Arc<GaloisKeys>) -> Self {
        Self { ctx, relin: Some(relin), galois: Some(galois) }
    }

    pub fn context(&self) -> &Arc<CkksContext> {
        &self.ctx
    }

    pub fn galois_keys(&self) -> Option<&GaloisKeys> {
        self.galois.as_deref()
    }

    fn check_aligned(&self, a: &Ciphertext, b: &Ciphertext) -> Result<()> {
        if a.level != b.level {
            return Err(Error::Alignment(format!("levels differ: {} vs {}", a.level, b.level)));
        }
        if !scales_match(a.scale, b.scale) {
            return Err(Error::Alignment(format!("scales differ: {:e} vs {:e}", a.scale, b.scale)));
        }
        Ok(())
    }

    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.check_aligned(a, b)?;
        Ok(Ciphertext { c0: a.c0.add(&b.c0)?, c1: a.c1.add(&b.c1)?, level: a.level, scale: a.scale })
    }

    pub fn sub(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.check_aligned(a, b)?;
        Ok(Ciphertext { c0: a.c0.sub(&b.c0)?, c1: a.c1.sub(&b.c1)?, level: a.level, scale: a.scale })
    }

    pub fn negate(&self, a: &Ciphertext) -> Ciphertext {
        Ciphertext { c0: a.c0.neg(), c1: a.c1.neg(), level: a.level, scale: a.scale }
    }

    pub fn add_plain(&self, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
        if a.level != pt.level {
            return Err(Error::Alignment(format!("levels differ: {} vs {}", a.level, pt.level)));
        }
        if !scales_match(a.scale, pt.scale) {
            return Err(Error::Alignment(format!("scales differ: {:e} vs {:e}", a.scale, pt.scale)));
        }
        Ok(Ciphertext { c0: a.c0.add(&pt.poly)?, c1: a.c1.clone(), level: a.level, scale: a.scale })
    }

    /// Adds `value` to every slot.
    pub fn add_const(&self, a: &Ciphertext, value: f64) -> Result<Ciphertext> {
        let scaled = (value * a.scale).round();
        if !scaled.is_finite() || scaled.abs() >= 1.7e38 {
            return Err(Error::Encoding(format!("constant {value} does not fit at scale {:e}", a.scale)));
        }
        Ok(Ciphertext { c0: a.c0.add_constant_i128(scaled as i128), c1: a.c1.clone(), level: a.level, scale: a.scale })
    }

    /// Slotwise product with a plaintext; the result's scale is the product of scales.
    pub fn mul_plain(&self, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
        if a.level != pt.level {
            return Err(Error::Alignment(format!("levels differ: {} vs {}", a.level, pt.level)));
        }
        Ok(Ciphertext {
            c0: a.c0.ring_mul(&pt.poly)?,
            c1: a.c1.ring_mul(&pt.poly)?,
            level: a.level,
            scale: a.scale * pt.scale,
        })
    }

    /// Multiplies every slot by `value` encoded at `const_scale`; needs a rescale afterwards.
    pub fn mul_const(&self, a: &Ciphertext, value: f64, const_scale: f64) -> Result<Ciphertext> {
        let scaled = (value * const_scale).round();
        if !scaled.is_finite() || scaled.abs() >= 1.7e38 {
            return Err(Error::Encoding(format!("constant {value} does not fit at scale {const_scale:e}")));
        }
        let c = scaled as i128;
        Ok(Ciphertext {
            c0: a.c0.mul_scalar_i128(c),
            c1: a.c1.mul_scalar_i128(c),
            level: a.level,
            scale: a.scale * const_scale,
        })
    }

    /// Tensor product followed by relinearization. Does not rescale.
    pub fn mul(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        if a.level != b.level {
            return Err(Error::Alignment(format!("levels differ: {} vs {}", a.level, b.level)));
        }
        if a.level == 0 {
            return Err(Error::LevelExhausted("multiplication at level 0 leaves nothing to rescale".into()));
        }
        let rk = self
            .relin
            .as_ref()
            .ok_or_else(|| Error::Structure("relinearization key not available".into()))?;
        let d0 = a.c0.ring_mul(&b.c0)?;
        let mut d1 = a.c0.ring_mul(&b.c1)?;
        d1.mul_add_assign_ntt(&a.c1, &b.c0)?;
        let d2 = a.c1.ring_mul(&b.c1)?;
        let (u0, u1) = key_switch(&self.ctx, &d2, &rk.key)?;
        Ok(Ciphertext { c0: d0.add(&u0)?, c1: d1.add(&u1)?, level: a.level, scale: a.scale * b.scale })
    }

    pub fn square(&self, a: &Ciphertext) -> Result<Ciphertext> {
        self.mul(a, a)
    }

    /// Divides by the last prime: drops one limb, one level, and divides the scale.
    pub fn rescale(&self, a: &Ciphertext) -> Result<Ciphertext> {
        if a.level == 0 {
            return Err(Error::LevelExhausted("cannot rescale a level-0 ciphertext".into()));
        }
        let q_last = a.c0.modulus(a.level).value() as f64;
        Ok(Ciphertext {
            c0: a.c0.drop_last_limb()?,
            c1: a.c1.drop_last_limb()?,
            level: a.level - 1,
            scale: a.scale / q_last,
        })
    }

    /// `mul` then `rescale`.
    pub fn mul_rescale(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.rescale(&self.mul(a, b)?)
    }

    /// Drops limbs down to `level` without changing the scale.
    pub fn mod_drop_to(&self, a: &Ciphertext, level: usize) -> Result<Ciphertext> {
        if level > a.level {
            return Err(Error::Alignment(format!("cannot raise level {} to {level}", a.level)));
        }
        if level == a.level {
            return Ok(a.clone());
        }
        Ok(Ciphertext {
            c0: a.c0.truncate_limbs(level + 1)?,
            c1: a.c1.truncate_limbs(level + 1)?,
            level,
            scale: a.scale,
        })
    }

    /// Left rotation: slot `i` of the result holds slot `i + steps` of the input.
    ///
    /// Steps without a dedicated key are composed from available keys using
    /// the binary expansion of `steps mod N/2`.
    pub fn rotate(&self, a: &Ciphertext, steps: i64) -> Result<Ciphertext> {
        let slots = self.ctx.slots() as i64;
        let k = steps.rem_euclid(slots) as usize;
        if k == 0 {
            return Ok(a.clone());
        }
        let gk = self.galois.as_ref().ok_or(Error::MissingGaloisKey(steps))?;
        if gk.get(k).is_some() {
            return self.rotate_with_key(a, k);
        }
        let mut plan = Vec::new();
        let mut rest = k;
        let mut bit = 1usize;
        while rest > 0 {
            if rest & bit != 0 {
                if gk.get(bit).is_none() {
                    return Err(Error::MissingGaloisKey(steps));
                }
                plan.push(bit);
                rest &= !bit;
            }
            bit <<= 1;
        }
        let mut out = a.clone();
        for s in plan {
            out = self.rotate_with_key(&out, s)?;
        }
        Ok(out)
    }

    fn rotate_with_key(&self, a: &Ciphertext, step: usize) -> Result<Ciphertext> {
        let gk = self.galois.as_ref().and_then(|g| g.get(step)).ok_or(Error::MissingGaloisKey(step as i64))?;
        let g = gk.galois_element;
        let c0 = a.c0.automorphism(g)?;
        let c1 = a.c1.automorphism(g)?;
        let (u0, u1) = key_switch(&self.ctx, &c1, &gk.key)?;
        Ok(Ciphertext { c0: c0.add(&u0)?, c1: u1, level: a.level, scale: a.scale })
    }

    /// Number of key switches `rotate` performs for `steps`.
    pub fn rotation_cost(&self, steps: i64) -> usize {
        let k = steps.rem_euclid(self.ctx.slots() as i64) as usize;
        match &self.galois {
            Some(g) if g.get(k).is_some() => 1,
            _ => k.count_ones() as usize,
        }
    }
}
