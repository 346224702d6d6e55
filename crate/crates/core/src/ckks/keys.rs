//! Secret, public and key-switching keys.
//!
//! Key switching uses the RNS hybrid method with a single special prime `P`:
//! digit `i` of a polynomial is its residue modulo `q_i`, and key digit `i`
//! carries `P·s'` only in limb `i`. After the inner product the special limb is
//! divided out, leaving `≈ d·s'` modulo `q_0..q_l`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use super::context::CkksContext;
use crate::error::{Error, Result};
use crate::ring::{sample_gaussian, sample_ternary, sample_uniform, Form, RnsPoly, DEFAULT_SIGMA};

/// Ternary secret, NTT form over `q_0..q_L, P`. Never leaves the client.
#[derive(Clone, Debug, PartialEq)]
pub struct SecretKey {
    pub(crate) poly: RnsPoly,
}

impl SecretKey {
    pub fn poly(&self) -> &RnsPoly {
        &self.poly
    }

    pub fn from_poly(ctx: &CkksContext, poly: RnsPoly) -> Result<Self> {
        let expect = ctx.extended_tables(ctx.max_level())?;
        check_basis(&poly, &expect, "secret key")?;
        Ok(Self { poly })
    }

    /// The secret restricted to `q_0..q_level`.
    pub(crate) fn at_level(&self, level: usize) -> Result<RnsPoly> {
        self.poly.truncate_limbs(level + 1)
    }
}

/// RLWE encryption of zero `(b, a)` with `b = -a·s + e`, over the full chain.
#[derive(Clone, Debug, PartialEq)]
pub struct PublicKey {
    pub(crate) b: RnsPoly,
    pub(crate) a: RnsPoly,
}

impl PublicKey {
    pub fn parts(&self) -> (&RnsPoly, &RnsPoly) {
        (&self.b, &self.a)
    }

    pub fn from_parts(ctx: &CkksContext, b: RnsPoly, a: RnsPoly) -> Result<Self> {
        let expect = ctx.tables_at_level(ctx.max_level())?;
        check_basis(&b, expect, "public key")?;
        check_basis(&a, expect, "public key")?;
        Ok(Self { b, a })
    }
}

/// One `(b_i, a_i)` pair per ciphertext prime, over `q_0..q_L, P`.
#[derive(Clone, Debug, PartialEq)]
pub struct KeySwitchKey {
    pub(crate) digits: Vec<(RnsPoly, RnsPoly)>,
}

impl KeySwitchKey {
    pub fn digits(&self) -> &[(RnsPoly, RnsPoly)] {
        &self.digits
    }

    pub fn from_digits(ctx: &CkksContext, digits: Vec<(RnsPoly, RnsPoly)>) -> Result<Self> {
        if digits.len() != ctx.max_level() + 1 {
            return Err(Error::Structure(format!(
                "key-switching key has {} digits, expected {}",
                digits.len(),
                ctx.max_level() + 1
            )));
        }
        let expect = ctx.extended_tables(ctx.max_level())?;
        for (b, a) in &digits {
            check_basis(b, &expect, "key-switching key")?;
            check_basis(a, &expect, "key-switching key")?;
        }
        Ok(Self { digits })
    }

    /// Key switching `from` (NTT form over extended basis) to `secret`.
    fn generate(ctx: &CkksContext, from: &RnsPoly, secret: &SecretKey, rng: &mut impl Rng) -> Result<Self> {
        let tables = ctx.extended_tables(ctx.max_level())?;
        let p = ctx.special_modulus().value();
        let mut digits = Vec::with_capacity(ctx.max_level() + 1);
        for i in 0..=ctx.max_level() {
            let a = sample_uniform(&tables, Form::Ntt, rng)?;
            let mut e = sample_gaussian(&tables, DEFAULT_SIGMA, rng)?;
            e.to_ntt();
            let mut b = e.sub(&a.ring_mul(&secret.poly)?)?;
            let qi = *b.modulus(i);
            let factor = qi.reduce(p);
            let fs = qi.shoup(factor);
            let src = from.limb(i).to_vec();
            let limb = &mut b.limbs_mut()[i];
            for (x, &y) in limb.iter_mut().zip(&src) {
                *x = qi.add(*x, qi.mul_shoup(y, factor, fs));
            }
            digits.push((b, a));
        }
        Ok(Self { digits })
    }
}

/// Switches `s^2` back to `s` after a tensor product.
#[derive(Clone, Debug, PartialEq)]
pub struct RelinKey {
    pub(crate) key: KeySwitchKey,
}

impl RelinKey {
    pub fn key(&self) -> &KeySwitchKey {
        &self.key
    }

    pub fn from_key(key: KeySwitchKey) -> Self {
        Self { key }
    }
}

/// Rotation keys, indexed by left-rotation step.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct GaloisKeys {
    pub(crate) keys: BTreeMap<usize, GaloisKey>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaloisKey {
    pub galois_element: usize,
    pub key: KeySwitchKey,
}

impl GaloisKeys {
    pub fn steps(&self) -> Vec<usize> {
        self.keys.keys().copied().collect()
    }

    pub fn get(&self, step: usize) -> Option<&GaloisKey> {
        self.keys.get(&step)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &GaloisKey)> {
        self.keys.iter().map(|(s, k)| (*s, k))
    }

    pub fn from_keys(keys: BTreeMap<usize, GaloisKey>) -> Self {
        Self { keys }
    }
}

/// Powers of two `1, 2, 4, …, N/4`: enough for rotate-and-sum and for
/// composing any rotation.
pub fn default_rotation_steps(ctx: &CkksContext) -> Vec<usize> {
    let mut steps = Vec::new();
    let mut s = 1;
    while s <= ctx.slots() / 2 {
        steps.push(s);
        s <<= 1;
    }
    steps
}

#[derive(Clone, Debug)]
pub struct KeyBundle {
    pub secret: SecretKey,
    pub public: PublicKey,
    pub relin: RelinKey,
    pub galois: GaloisKeys,
}

/// Full key generation with the default rotation steps.
pub fn keygen(ctx: &CkksContext, rng: &mut impl Rng) -> Result<KeyBundle> {
    keygen_with_steps(ctx, &default_rotation_steps(ctx), rng)
}

pub fn keygen_with_steps(ctx: &CkksContext, steps: &[usize], rng: &mut impl Rng) -> Result<KeyBundle> {
    let secret = gen_secret_key(ctx, rng)?;
    let public = gen_public_key(ctx, &secret, rng)?;
    let relin = gen_relin_key(ctx, &secret, rng)?;
    let galois = gen_galois_keys(ctx, &secret, steps, rng)?;
    Ok(KeyBundle { secret, public, relin, galois })
}

pub fn gen_secret_key(ctx: &CkksContext, rng: &mut impl Rng) -> Result<SecretKey> {
    let tables = ctx.extended_tables(ctx.max_level())?;
    let mut s = sample_ternary(&tables, rng)?;
    s.to_ntt();
    Ok(SecretKey { poly: s })
}

pub fn gen_public_key(ctx: &CkksContext, secret: &SecretKey, rng: &mut impl Rng) -> Result<PublicKey> {
    let level = ctx.max_level();
    let tables = ctx.tables_at_level(level)?;
    let a = sample_uniform(tables, Form::Ntt, rng)?;
    let mut e = sample_gaussian(tables, DEFAULT_SIGMA, rng)?;
    e.to_ntt();
    let b = e.sub(&a.ring_mul(&secret.at_level(level)?)?)?;
    Ok(PublicKey { b, a })
}

pub fn gen_relin_key(ctx: &CkksContext, secret: &SecretKey, rng: &mut impl Rng) -> Result<RelinKey> {
    let s2 = secret.poly.ring_mul(&secret.poly)?;
    Ok(RelinKey { key: KeySwitchKey::generate(ctx, &s2, secret, rng)? })
}

pub fn gen_galois_keys(
    ctx: &CkksContext,
    secret: &SecretKey,
    steps: &[usize],
    rng: &mut impl Rng,
) -> Result<GaloisKeys> {
    let mut keys = BTreeMap::new();
    for &step in steps {
        let step = step % ctx.slots();
        if step == 0 || keys.contains_key(&step) {
            continue;
        }
        let g = ctx.galois_element(step);
        let rotated = secret.poly.automorphism(g)?;
        let key = KeySwitchKey::generate(ctx, &rotated, secret, rng)?;
        keys.insert(step, GaloisKey { galois_element: g, key });
    }
    Ok(GaloisKeys { keys })
}

fn check_basis(poly: &RnsPoly, expect: &[Arc<crate::ring::NttTable>], what: &str) -> Result<()> {
    let want: Vec<u64> = expect.iter().map(|t| t.modulus().value()).collect();
    if poly.moduli_values() != want || poly.form() != Form::Ntt || poly.degree() != expect[0].degree() {
        return Err(Error::Structure(format!("{what} does not match the parameter set")));
    }
    Ok(())
}

/// Applies a key-switching key to `d` (NTT form over `q_0..q_l`), returning
/// `(u0, u1)` with `u0 + u1·s ≈ d·s'`.
pub(crate) fn key_switch(ctx: &CkksContext, d: &RnsPoly, key: &KeySwitchKey) -> Result<(RnsPoly, RnsPoly)> {
    let l = d.limb_count();
    if l == 0 || l > ctx.max_level() + 1 {
        return Err(Error::Structure(format!("cannot key-switch a {l}-limb polynomial")));
    }
    let level = l - 1;
    let ext = ctx.extended_tables(level)?;
    let n = ctx.degree();
    let special_index = ctx.max_level() + 1;
    let key_limb = |j: usize| if j < l { j } else { special_index };

    let mut d_coeff = d.clone();
    d_coeff.to_coeff();

    // products are < q^2 < 2^124 and at most 8 digits are summed, so u128
    // accumulators need a single reduction at the end
    debug_assert!(l <= 8);
    let mut acc0 = vec![vec![0u128; n]; l + 1];
    let mut acc1 = vec![vec![0u128; n]; l + 1];
    let mut lifted = vec![0u64; n];
    for i in 0..l {
        let (k0, k1) = &key.digits[i];
        let src = d_coeff.limb(i);
        for (j, table) in ext.iter().enumerate() {
            let qj = table.modulus();
            let digit: &[u64] = if j == i {
                d.limb(i)
            } else {
                for (dst, &c) in lifted.iter_mut().zip(src) {
                    *dst = if c >= qj.value() { c - qj.value() } else { c };
                }
                table.forward(&mut lifted);
                &lifted
            };
            let (kb, ka) = (k0.limb(key_limb(j)), k1.limb(key_limb(j)));
            for ((((a0, a1), &x), &b), &a) in
                acc0[j].iter_mut().zip(acc1[j].iter_mut()).zip(digit).zip(kb).zip(ka)
            {
                *a0 += x as u128 * b as u128;
                *a1 += x as u128 * a as u128;
            }
        }
    }
    let reduce = |acc: Vec<Vec<u128>>| -> Vec<Vec<u64>> {
        acc.into_iter()
            .zip(ext.iter())
            .map(|(limb, t)| {
                let q = t.modulus();
                limb.into_iter().map(|x| q.reduce_u128_wide(x)).collect()
            })
            .collect()
    };
    let (acc0, acc1) = (reduce(acc0), reduce(acc1));
    let tables = ctx.tables_at_level(level)?;
    let u0 = mod_down(ctx, acc0, &ext)?;
    let u1 = mod_down(ctx, acc1, &ext)?;
    Ok((RnsPoly::from_limbs(tables, u0, Form::Ntt)?, RnsPoly::from_limbs(tables, u1, Form::Ntt)?))
}

/// Divides an extended-basis NTT polynomial by `P` with rounding.
fn mod_down(ctx: &CkksContext, mut acc: Vec<Vec<u64>>, ext: &[Arc<crate::ring::NttTable>]) -> Result<Vec<Vec<u64>>> {
    let special = ctx.special_table();
    let p = *special.modulus();
    let mut last = acc.pop().expect("extended basis has a special limb");
    special.inverse(&mut last);
    let half_p = p.value() / 2;
    let mut tmp = vec![0u64; last.len()];
    for (limb, table) in acc.iter_mut().zip(ext) {
        let q = table.modulus();
        let p_mod_q = q.reduce(p.value());
        let inv = q.inv(p_mod_q)?;
        let inv_s = q.shoup(inv);
        for (dst, &c) in tmp.iter_mut().zip(&last) {
            // centered lift of a residue mod P
            let r = q.reduce(c);
            *dst = if c > half_p { q.sub(r, p_mod_q) } else { r };
        }
        table.forward(&mut tmp);
        for (x, &y) in limb.iter_mut().zip(&tmp) {
            *x = q.mul_shoup(q.sub(*x, y), inv, inv_s);
        }
    }
    Ok(acc)
}
