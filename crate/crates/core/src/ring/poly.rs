//! Residue-number-system polynomials.

use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

use super::modulus::Modulus;
use super::ntt::{bit_reverse, NttTable};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Form {
    Coefficient,
    Ntt,
}

/// An element of `Z_Q[X]/(X^N + 1)` stored as one residue vector per prime of `Q`.
#[derive(Clone, Debug)]
pub struct RnsPoly {
    degree: usize,
    tables: Vec<Arc<NttTable>>,
    limbs: Vec<Vec<u64>>,
    form: Form,
}

impl PartialEq for RnsPoly {
    fn eq(&self, other: &Self) -> bool {
        self.degree == other.degree
            && self.form == other.form
            && self.moduli_values() == other.moduli_values()
            && self.limbs == other.limbs
    }
}

impl Eq for RnsPoly {}

impl RnsPoly {
    pub fn zero(tables: &[Arc<NttTable>], form: Form) -> Result<Self> {
        let degree = common_degree(tables)?;
        Ok(Self {
            degree,
            tables: tables.to_vec(),
            limbs: vec![vec![0u64; degree]; tables.len()],
            form,
        })
    }

    /// Builds a polynomial from residue vectors, checking every range invariant.
    pub fn from_limbs(tables: &[Arc<NttTable>], limbs: Vec<Vec<u64>>, form: Form) -> Result<Self> {
        let degree = common_degree(tables)?;
        if limbs.len() != tables.len() {
            return Err(Error::Structure(format!(
                "{} limbs supplied for {} moduli",
                limbs.len(),
                tables.len()
            )));
        }
        for (limb, t) in limbs.iter().zip(tables) {
            if limb.len() != degree {
                return Err(Error::Structure(format!(
                    "limb of length {} for degree {degree}",
                    limb.len()
                )));
            }
            let q = t.modulus().value();
            if limb.iter().any(|&c| c >= q) {
                return Err(Error::Structure(format!("residue out of range for modulus {q}")));
            }
        }
        Ok(Self { degree, tables: tables.to_vec(), limbs, form })
    }

    /// Coefficient-form polynomial from small signed integer coefficients.
    pub fn from_signed(tables: &[Arc<NttTable>], coeffs: &[i64]) -> Result<Self> {
        let degree = common_degree(tables)?;
        if coeffs.len() != degree {
            return Err(Error::Structure(format!(
                "{} coefficients for degree {degree}",
                coeffs.len()
            )));
        }
        let limbs = tables
            .iter()
            .map(|t| {
                let q = t.modulus();
                coeffs.iter().map(|&c| q.reduce_i64(c)).collect()
            })
            .collect();
        Ok(Self { degree, tables: tables.to_vec(), limbs, form: Form::Coefficient })
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.degree
    }

    #[inline]
    pub fn form(&self) -> Form {
        self.form
    }

    #[inline]
    pub fn limb_count(&self) -> usize {
        self.limbs.len()
    }

    pub fn limbs(&self) -> &[Vec<u64>] {
        &self.limbs
    }

    pub fn limb(&self, i: usize) -> &[u64] {
        &self.limbs[i]
    }

    pub fn tables(&self) -> &[Arc<NttTable>] {
        &self.tables
    }

    pub fn modulus(&self, i: usize) -> &Modulus {
        self.tables[i].modulus()
    }

    pub fn moduli_values(&self) -> Vec<u64> {
        self.tables.iter().map(|t| t.modulus().value()).collect()
    }

    pub(crate) fn limbs_mut(&mut self) -> &mut [Vec<u64>] {
        &mut self.limbs
    }


    /// Switches to NTT form in place; no-op if already there.
    pub fn to_ntt(&mut self) {
        if self.form == Form::Ntt {
            return;
        }
        for (limb, t) in self.limbs.iter_mut().zip(&self.tables) {
            t.forward(limb);
        }
        self.form = Form::Ntt;
    }

    /// Switches to coefficient form in place; no-op if already there.
    pub fn to_coeff(&mut self) {
        if self.form == Form::Coefficient {
            return;
        }
        for (limb, t) in self.limbs.iter_mut().zip(&self.tables) {
            t.inverse(limb);
        }
        self.form = Form::Coefficient;
    }

    /// Forward transform of a coefficient-form polynomial.
    pub fn ntt_forward(&self) -> Result<Self> {
        if self.form != Form::Coefficient {
            return Err(Error::Structure("ntt_forward expects coefficient form".into()));
        }
        let mut out = self.clone();
        out.to_ntt();
        Ok(out)
    }

    /// Inverse transform of an NTT-form polynomial.
    pub fn ntt_inverse(&self) -> Result<Self> {
        if self.form != Form::Ntt {
            return Err(Error::Structure("ntt_inverse expects NTT form".into()));
        }
        let mut out = self.clone();
        out.to_coeff();
        Ok(out)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.degree != other.degree {
            return Err(Error::Structure(format!(
                "degree mismatch: {} vs {}",
                self.degree, other.degree
            )));
        }
        if self.form != other.form {
            return Err(Error::Structure("operands in different forms".into()));
        }
        if self.limbs.len() != other.limbs.len()
            || self.tables.iter().zip(&other.tables).any(|(a, b)| a.modulus() != b.modulus())
        {
            return Err(Error::Structure(format!(
                "modulus sets differ: {:?} vs {:?}",
                self.moduli_values(),
                other.moduli_values()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        for ((a, b), t) in self.limbs.iter_mut().zip(&other.limbs).zip(&self.tables) {
            let q = t.modulus();
            for (x, &y) in a.iter_mut().zip(b) {
                *x = q.add(*x, y);
            }
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.sub_assign(other)?;
        Ok(out)
    }

    pub fn sub_assign(&mut self, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        for ((a, b), t) in self.limbs.iter_mut().zip(&other.limbs).zip(&self.tables) {
            let q = t.modulus();
            for (x, &y) in a.iter_mut().zip(b) {
                *x = q.sub(*x, y);
            }
        }
        Ok(())
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for (a, t) in out.limbs.iter_mut().zip(&self.tables) {
            let q = t.modulus();
            for x in a.iter_mut() {
                *x = q.neg(*x);
            }
        }
        out
    }

    /// Negacyclic product. NTT-form inputs multiply pointwise; coefficient-form
    /// inputs are transformed, multiplied and transformed back.
    pub fn ring_mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        match self.form {
            Form::Ntt => {
                let mut out = self.clone();
                out.mul_assign_ntt(other)?;
                Ok(out)
            }
            Form::Coefficient => {
                let mut a = self.clone();
                let mut b = other.clone();
                a.to_ntt();
                b.to_ntt();
                a.mul_assign_ntt(&b)?;
                a.to_coeff();
                Ok(a)
            }
        }
    }

    /// Pointwise product of two NTT-form polynomials.
    pub fn mul_assign_ntt(&mut self, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        if self.form != Form::Ntt {
            return Err(Error::Structure("pointwise product needs NTT form".into()));
        }
        for ((a, b), t) in self.limbs.iter_mut().zip(&other.limbs).zip(&self.tables) {
            let q = t.modulus();
            for (x, &y) in a.iter_mut().zip(b) {
                *x = q.mul(*x, y);
            }
        }
        Ok(())
    }

    /// `self += a * b` for NTT-form operands.
    pub fn mul_add_assign_ntt(&mut self, a: &Self, b: &Self) -> Result<()> {
        self.check_compatible(a)?;
        self.check_compatible(b)?;
        if self.form != Form::Ntt {
            return Err(Error::Structure("pointwise product needs NTT form".into()));
        }
        for (((acc, x), y), t) in self.limbs.iter_mut().zip(&a.limbs).zip(&b.limbs).zip(&self.tables) {
            let q = t.modulus();
            for ((r, &u), &v) in acc.iter_mut().zip(x).zip(y) {
                *r = q.add(*r, q.mul(u, v));
            }
        }
        Ok(())
    }

    /// Multiplies by an integer scalar, valid in either form.
    pub fn mul_scalar_i128(&self, c: i128) -> Self {
        let mut out = self.clone();
        for (a, t) in out.limbs.iter_mut().zip(&self.tables) {
            let q = t.modulus();
            let cq = c.rem_euclid(q.value() as i128) as u64;
            let cs = q.shoup(cq);
            for x in a.iter_mut() {
                *x = q.mul_shoup(*x, cq, cs);
            }
        }
        out
    }

    /// Adds the integer constant `c` (the polynomial `c·X^0`).
    pub fn add_constant_i128(&self, c: i128) -> Self {
        let mut out = self.clone();
        for (a, t) in out.limbs.iter_mut().zip(&self.tables) {
            let q = t.modulus();
            let cq = c.rem_euclid(q.value() as i128) as u64;
            match self.form {
                // a constant evaluates to itself at every root
                Form::Ntt => a.iter_mut().for_each(|x| *x = q.add(*x, cq)),
                Form::Coefficient => a[0] = q.add(a[0], cq),
            }
        }
        out
    }

    /// Discards limbs beyond the first `count` without dividing.
    pub fn truncate_limbs(&self, count: usize) -> Result<Self> {
        if count == 0 || count > self.limbs.len() {
            return Err(Error::Structure(format!(
                "cannot keep {count} of {} limbs",
                self.limbs.len()
            )));
        }
        Ok(Self {
            degree: self.degree,
            tables: self.tables[..count].to_vec(),
            limbs: self.limbs[..count].to_vec(),
            form: self.form,
        })
    }

    /// Divides by the last modulus with rounding and removes that limb.
    pub fn drop_last_limb(&self) -> Result<Self> {
        if self.limbs.len() < 2 {
            return Err(Error::LevelExhausted("cannot drop the only remaining limb".into()));
        }
        let k = self.limbs.len() - 1;
        let last_table = &self.tables[k];
        let q_last = *last_table.modulus();
        let mut last = self.limbs[k].clone();
        if self.form == Form::Ntt {
            last_table.inverse(&mut last);
        }
        let centered: Vec<i64> = last.iter().map(|&c| q_last.center(c)).collect();
        let mut out = Self {
            degree: self.degree,
            tables: self.tables[..k].to_vec(),
            limbs: self.limbs[..k].to_vec(),
            form: self.form,
        };
        for (limb, t) in out.limbs.iter_mut().zip(&out.tables) {
            let q = t.modulus();
            let mut r: Vec<u64> = centered.iter().map(|&c| q.reduce_i64(c)).collect();
            if self.form == Form::Ntt {
                t.forward(&mut r);
            }
            let inv = q.inv(q_last.value() % q.value())?;
            let inv_s = q.shoup(inv);
            for (x, &y) in limb.iter_mut().zip(&r) {
                *x = q.mul_shoup(q.sub(*x, y), inv, inv_s);
            }
        }
        Ok(out)
    }

    /// Applies `X -> X^g` for odd `g`.
    pub fn automorphism(&self, galois: usize) -> Result<Self> {
        let two_n = 2 * self.degree;
        if galois % 2 == 0 {
            return Err(Error::Param(format!("Galois element {galois} must be odd")));
        }
        let g = galois % two_n;
        let mut out = self.clone();
        match self.form {
            Form::Coefficient => {
                for ((dst, src), t) in out.limbs.iter_mut().zip(&self.limbs).zip(&self.tables) {
                    let q = t.modulus();
                    for (i, &c) in src.iter().enumerate() {
                        let j = (i * g) % two_n;
                        if j < self.degree {
                            dst[j] = c;
                        } else {
                            dst[j - self.degree] = q.neg(c);
                        }
                    }
                }
            }
            Form::Ntt => {
                let perm = ntt_automorphism_permutation(self.degree, g);
                for (dst, src) in out.limbs.iter_mut().zip(&self.limbs) {
                    for (d, &p) in dst.iter_mut().zip(&perm) {
                        *d = src[p];
                    }
                }
            }
        }
        Ok(out)
    }

    /// CRT reconstruction of every coefficient into `(-Q/2, Q/2]`.
    pub fn to_centered_bigints(&self) -> Vec<BigInt> {
        let mut coeff = self.clone();
        coeff.to_coeff();
        let moduli: Vec<BigUint> =
            self.tables.iter().map(|t| BigUint::from(t.modulus().value())).collect();
        let big_q: BigUint = moduli.iter().fold(BigUint::one(), |acc, m| acc * m);
        let half = &big_q >> 1u32;
        // q_hat_i * (q_hat_i^{-1} mod q_i)
        let basis: Vec<BigUint> = self
            .tables
            .iter()
            .zip(&moduli)
            .map(|(t, m)| {
                let q_hat = &big_q / m;
                let q = t.modulus();
                let r = (&q_hat % m).iter_u64_digits().next().unwrap_or(0);
                let inv = q.inv(r).expect("pairwise coprime moduli");
                q_hat * BigUint::from(inv)
            })
            .collect();
        (0..self.degree)
            .map(|j| {
                let mut acc = BigUint::zero();
                for (limb, b) in coeff.limbs.iter().zip(&basis) {
                    acc += b * BigUint::from(limb[j]);
                }
                acc %= &big_q;
                if acc > half {
                    BigInt::from(acc) - BigInt::from(big_q.clone())
                } else {
                    BigInt::from(acc)
                }
            })
            .collect()
    }
}

/// Index map such that `out[i] = in[perm[i]]` realises `X -> X^g` in NTT form.
pub(crate) fn ntt_automorphism_permutation(degree: usize, galois: usize) -> Vec<usize> {
    let log_n = degree.trailing_zeros();
    let two_n = 2 * degree;
    (0..degree)
        .map(|i| {
            let e = 2 * bit_reverse(i, log_n) + 1;
            let target = (e * galois) % two_n;
            bit_reverse((target - 1) / 2, log_n)
        })
        .collect()
}

fn common_degree(tables: &[Arc<NttTable>]) -> Result<usize> {
    let first = tables
        .first()
        .ok_or_else(|| Error::Structure("polynomial needs at least one modulus".into()))?;
    let degree = first.degree();
    if tables.iter().any(|t| t.degree() != degree) {
        return Err(Error::Structure("NTT tables disagree on ring degree".into()));
    }
    Ok(degree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::modulus::generate_ntt_primes;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tables(n: usize, values: &[u64]) -> Vec<Arc<NttTable>> {
        values
            .iter()
            .map(|&v| Arc::new(NttTable::new(Modulus::new(v).unwrap(), n).unwrap()))
            .collect()
    }

    fn random_poly(t: &[Arc<NttTable>], rng: &mut ChaCha8Rng) -> RnsPoly {
        let n = t[0].degree();
        let limbs = t
            .iter()
            .map(|tb| (0..n).map(|_| rng.gen_range(0..tb.modulus().value())).collect())
            .collect();
        RnsPoly::from_limbs(t, limbs, Form::Coefficient).unwrap()
    }

    /// Schoolbook negacyclic convolution, independent of the NTT path.
    fn schoolbook(a: &[u64], b: &[u64], q: u64) -> Vec<u64> {
        let n = a.len();
        let mut out = vec![0i128; n];
        for i in 0..n {
            for j in 0..n {
                let prod = a[i] as i128 * b[j] as i128 % q as i128;
                if i + j < n {
                    out[i + j] += prod;
                } else {
                    out[i + j - n] -= prod;
                }
            }
        }
        out.into_iter().map(|v| v.rem_euclid(q as i128) as u64).collect()
    }

    #[test]
    fn x_times_x3_wraps_to_minus_one() {
        let t = tables(4, &[17]);
        let a = RnsPoly::from_signed(&t, &[0, 1, 0, 0]).unwrap();
        let b = RnsPoly::from_signed(&t, &[0, 0, 0, 1]).unwrap();
        let c = a.ring_mul(&b).unwrap();
        assert_eq!(c.limb(0), &[16, 0, 0, 0]);
    }

    #[test]
    fn ring_mul_matches_schoolbook_n32() {
        let primes = generate_ntt_primes(32, &[30, 40]).unwrap();
        let t: Vec<_> =
            primes.iter().map(|&q| Arc::new(NttTable::new(q, 32).unwrap())).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let a = random_poly(&t, &mut rng);
            let b = random_poly(&t, &mut rng);
            let c = a.ring_mul(&b).unwrap();
            for i in 0..2 {
                assert_eq!(c.limb(i), schoolbook(a.limb(i), b.limb(i), t[i].modulus().value()));
            }
        }
    }

    #[test]
    fn multiplicative_identity() {
        let t = tables(16, &[97]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = random_poly(&t, &mut rng);
        let mut one = vec![0i64; 16];
        one[0] = 1;
        let one = RnsPoly::from_signed(&t, &one).unwrap();
        assert_eq!(one.ring_mul(&b).unwrap(), b);
    }

    #[test]
    fn mismatched_limbs_rejected() {
        let t1 = tables(16, &[97]);
        let t2 = tables(16, &[97, 193]);
        let a = RnsPoly::zero(&t1, Form::Coefficient).unwrap();
        let b = RnsPoly::zero(&t2, Form::Coefficient).unwrap();
        assert!(matches!(a.ring_mul(&b), Err(Error::Structure(_))));
        assert!(a.add(&b).is_err());
    }

    #[test]
    fn drop_last_limb_exact_multiple() {
        // two limbs encoding v * q_last, v small
        let t = tables(16, &[97, 193]);
        let v: Vec<i64> = (0..16).map(|i| i - 8).collect();
        let scaled: Vec<i64> = v.iter().map(|x| x * 193).collect();
        let p = RnsPoly::from_signed(&t, &scaled).unwrap();
        let d = p.drop_last_limb().unwrap();
        let expect = RnsPoly::from_signed(&t[..1], &v).unwrap();
        assert_eq!(d, expect);
    }

    #[test]
    fn drop_last_limb_rounds_like_rational_division() {
        let primes = generate_ntt_primes(16, &[40, 30]).unwrap();
        let t: Vec<_> =
            primes.iter().map(|&q| Arc::new(NttTable::new(q, 16).unwrap())).collect();
        let q0 = primes[0].value() as i128;
        let q1 = primes[1].value() as i128;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_poly(&t, &mut rng);
        for form in [Form::Coefficient, Form::Ntt] {
            let mut input = p.clone();
            if form == Form::Ntt {
                input.to_ntt();
            }
            let mut d = input.drop_last_limb().unwrap();
            d.to_coeff();
            // independent CRT in i128: x = a + q0 * ((b - a) * q0^{-1} mod q1)
            let inv = primes[1].inv(primes[0].value() % primes[1].value()).unwrap() as i128;
            for j in 0..16 {
                let a = p.limb(0)[j] as i128;
                let b = p.limb(1)[j] as i128;
                let k = ((b - a).rem_euclid(q1) * inv).rem_euclid(q1);
                let mut x = a + q0 * k;
                let big_q = q0 * q1;
                if x > big_q / 2 {
                    x -= big_q;
                }
                let got = primes[0].center(d.limb(0)[j]) as i128;
                let exact = x as f64 / q1 as f64;
                assert!((got as f64 - exact).abs() <= 0.5 + 1e-9, "{got} vs {exact}");
            }
        }
    }

    #[test]
    fn drop_only_limb_fails() {
        let t = tables(16, &[97]);
        let p = RnsPoly::zero(&t, Form::Coefficient).unwrap();
        assert!(matches!(p.drop_last_limb(), Err(Error::LevelExhausted(_))));
    }

    #[test]
    fn ntt_automorphism_agrees_with_coefficient_automorphism() {
        let primes = generate_ntt_primes(64, &[40]).unwrap();
        let t = vec![Arc::new(NttTable::new(primes[0], 64).unwrap())];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_poly(&t, &mut rng);
        for g in [3usize, 5, 25, 127] {
            let coeff = p.automorphism(g).unwrap();
            let mut via_ntt = p.ntt_forward().unwrap().automorphism(g).unwrap();
            via_ntt.to_coeff();
            assert_eq!(coeff, via_ntt);
        }
    }

    #[test]
    fn crt_roundtrip_two_limbs() {
        let t = tables(16, &[97, 193]);
        let coeffs: Vec<i64> = (0..16).map(|i| (i * 1171) % 9361 - 4680).collect();
        let p = RnsPoly::from_signed(&t, &coeffs).unwrap();
        let back: Vec<i64> = p
            .to_centered_bigints()
            .iter()
            .map(|b| i64::try_from(b.clone()).unwrap())
            .collect();
        assert_eq!(back, coeffs);
        assert_eq!(RnsPoly::from_signed(&t, &back).unwrap(), p);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn ring_laws(seed in any::<u64>(), log_n in 2u32..7) {
            let n = 1usize << log_n;
            let primes = generate_ntt_primes(n, &[30, 31]).unwrap();
            let t: Vec<_> = primes.iter().map(|&q| Arc::new(NttTable::new(q, n).unwrap())).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_poly(&t, &mut rng);
            let b = random_poly(&t, &mut rng);
            let c = random_poly(&t, &mut rng);
            prop_assert_eq!(a.ring_mul(&b).unwrap(), b.ring_mul(&a).unwrap());
            prop_assert_eq!(
                a.ring_mul(&b).unwrap().ring_mul(&c).unwrap(),
                a.ring_mul(&b.ring_mul(&c).unwrap()).unwrap()
            );
            prop_assert_eq!(
                a.ring_mul(&b.add(&c).unwrap()).unwrap(),
                a.ring_mul(&b).unwrap().add(&a.ring_mul(&c).unwrap()).unwrap()
            );
            let mut an = a.clone();
            an.to_ntt();
            let mut bn = b.clone();
            bn.to_ntt();
            let mut prod = an.ring_mul(&bn).unwrap();
            prod.to_coeff();
            prop_assert_eq!(&prod, &a.ring_mul(&b).unwrap());
            for i in 0..2 {
                prop_assert_eq!(prod.limb(i), &schoolbook(a.limb(i), b.limb(i), t[i].modulus().value())[..]);
            }
            prop_assert_eq!(an.ntt_inverse().unwrap(), a);
        }
    }
}
