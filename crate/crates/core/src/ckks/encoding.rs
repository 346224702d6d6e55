//! Canonical-embedding encoder.
//!
//! Slot `j` of a plaintext polynomial `m` is `m(ζ^(5^j)) / scale` with
//! `ζ = exp(iπ/N)`. Encoding is the inverse special FFT of the slot vector
//! (its conjugates are implied), scaled and rounded to integers.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive, Zero};

use super::context::CkksContext;
use crate::error::{Error, Result};
use crate::ring::{Form, RnsPoly};

/// An encoded message: an NTT-form polynomial with its scale and level.
#[derive(Clone, Debug, PartialEq)]
pub struct Plaintext {
    pub poly: RnsPoly,
    pub scale: f64,
    pub level: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct SpecialFft {
    slots: usize,
    two_n: usize,
    rot_group: Vec<usize>,
    roots: Vec<Complex64>,
}

impl SpecialFft {
    pub(crate) fn new(degree: usize) -> Self {
        let slots = degree / 2;
        let two_n = 2 * degree;
        let mut rot_group = Vec::with_capacity(slots);
        let mut g = 1usize;
        for _ in 0..slots {
            rot_group.push(g);
            g = g * 5 % two_n;
        }
        let roots = (0..=two_n)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / two_n as f64))
            .collect();
        Self { slots, two_n, rot_group, roots }
    }

    /// Galois element realising a left rotation by `steps` slots.
    pub(crate) fn galois_element(&self, steps: usize) -> usize {
        self.rot_group[steps % self.slots]
    }

    fn bit_reverse(vals: &mut [Complex64]) {
        let n = vals.len();
        let mut j = 0usize;
        for i in 1..n {
            let mut bit = n >> 1;
            while j & bit != 0 {
                j ^= bit;
                bit >>= 1;
            }
            j |= bit;
            if i < j {
                vals.swap(i, j);
            }
        }
    }

    /// Slot values from the "folded" coefficient vector.
    pub(crate) fn forward(&self, vals: &mut [Complex64]) {
        let size = vals.len();
        Self::bit_reverse(vals);
        let mut len = 2;
        while len <= size {
            let lenh = len >> 1;
            let lenq = len << 2;
            let gap = self.two_n / lenq;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (self.rot_group[j] % lenq) * gap;
                    let u = vals[i + j];
                    let v = vals[i + j + lenh] * self.roots[idx];
                    vals[i + j] = u + v;
                    vals[i + j + lenh] = u - v;
                }
            }
            len <<= 1;
        }
    }

    pub(crate) fn inverse(&self, vals: &mut [Complex64]) {
        let size = vals.len();
        let mut len = size;
        while len >= 2 {
            let lenh = len >> 1;
            let lenq = len << 2;
            let gap = self.two_n / lenq;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (lenq - (self.rot_group[j] % lenq)) * gap;
                    let u = vals[i + j] + vals[i + j + lenh];
                    let v = (vals[i + j] - vals[i + j + lenh]) * self.roots[idx];
                    vals[i + j] = u;
                    vals[i + j + lenh] = v;
                }
            }
            len >>= 1;
        }
        Self::bit_reverse(vals);
        let inv = 1.0 / size as f64;
        for v in vals.iter_mut() {
            *v *= inv;
        }
    }
}

/// Encodes real values (zero-padded to `N/2` slots) at `scale` and `level`.
pub fn encode(ctx: &CkksContext, values: &[f64], scale: f64, level: usize) -> Result<Plaintext> {
    let slots = ctx.slots();
    if values.len() > slots {
        return Err(Error::Encoding(format!(
            "vector of length {} exceeds {} slots",
            values.len(),
            slots
        )));
    }
    let complex: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    encode_complex(ctx, &complex, scale, level)
}

pub fn encode_complex(
    ctx: &CkksContext,
    values: &[Complex64],
    scale: f64,
    level: usize,
) -> Result<Plaintext> {
    let slots = ctx.slots();
    let n = ctx.degree();
    if values.len() > slots {
        return Err(Error::Encoding(format!("vector of length {} exceeds {slots} slots", values.len())));
    }
    check_scale(scale)?;
    if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Encoding("non-finite input value".into()));
    }
    let tables = ctx.tables_at_level(level)?;
    let mut u = vec![Complex64::zero(); slots];
    u[..values.len()].copy_from_slice(values);
    ctx.fft().inverse(&mut u);

    let mut coeffs = vec![0f64; n];
    for (i, z) in u.iter().enumerate() {
        coeffs[i] = (z.re * scale).round();
        coeffs[i + slots] = (z.im * scale).round();
    }
    let max = coeffs.iter().fold(0f64, |m, c| m.max(c.abs()));
    let modulus_bits: u32 = tables.iter().map(|t| t.modulus().bits()).sum();
    // leave a bit of headroom below Q/2 for subsequent additions
    if max >= 2f64.powi(modulus_bits as i32 - 2) {
        return Err(Error::Encoding(format!(
            "scaled coefficients reach 2^{:.1}, overflowing a {modulus_bits}-bit modulus",
            max.log2()
        )));
    }
    let limbs = tables
        .iter()
        .map(|t| {
            let q = t.modulus();
            let mut limb: Vec<u64> = coeffs.iter().map(|&c| residue_of_integral_f64(c, q)).collect();
            t.forward(&mut limb);
            limb
        })
        .collect();
    Ok(Plaintext { poly: RnsPoly::from_limbs(tables, limbs, Form::Ntt)?, scale, level })
}

/// Encodes the same real constant in every slot; the polynomial is `round(c·scale)`.
pub fn encode_constant(ctx: &CkksContext, value: f64, scale: f64, level: usize) -> Result<Plaintext> {
    check_scale(scale)?;
    let tables = ctx.tables_at_level(level)?;
    let scaled = (value * scale).round();
    if !scaled.is_finite() {
        return Err(Error::Encoding("non-finite constant".into()));
    }
    let limbs = tables
        .iter()
        .map(|t| vec![residue_of_integral_f64(scaled, t.modulus()); ctx.degree()])
        .collect();
    Ok(Plaintext { poly: RnsPoly::from_limbs(tables, limbs, Form::Ntt)?, scale, level })
}

/// Decodes all `N/2` slots (real parts).
pub fn decode(pt: &Plaintext, ctx: &CkksContext) -> Vec<f64> {
    decode_complex(pt, ctx).into_iter().map(|z| z.re).collect()
}

pub fn decode_complex(pt: &Plaintext, ctx: &CkksContext) -> Vec<Complex64> {
    let slots = ctx.slots();
    let coeffs = centered_coefficients_f64(&pt.poly);
    let mut u: Vec<Complex64> = (0..slots)
        .map(|i| Complex64::new(coeffs[i] / pt.scale, coeffs[i + slots] / pt.scale))
        .collect();
    ctx.fft().forward(&mut u);
    u
}

fn check_scale(scale: f64) -> Result<()> {
    if !(scale > 1.0) || !scale.is_finite() {
        return Err(Error::Encoding(format!("scale must be finite and > 1, got {scale}")));
    }
    Ok(())
}

/// Exact residue of an integer-valued float of any magnitude.
fn residue_of_integral_f64(c: f64, q: &crate::ring::Modulus) -> u64 {
    if c.abs() < 9.0e18 {
        return q.reduce_i64(c as i64);
    }
    // c = mantissa * 2^exp with |mantissa| < 2^53
    let bits = c.abs().to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64 - 1075;
    let mantissa = (bits & ((1u64 << 52) - 1)) | (1u64 << 52);
    let r = q.mul(q.reduce(mantissa), q.pow(2, exp as u64));
    if c < 0.0 {
        q.neg(r)
    } else {
        r
    }
}

fn centered_coefficients_f64(poly: &RnsPoly) -> Vec<f64> {
    if poly.limb_count() == 1 {
        let mut p = poly.clone();
        p.to_coeff();
        let q = *p.modulus(0);
        return p.limb(0).iter().map(|&c| q.center(c) as f64).collect();
    }
    poly.to_centered_bigints().iter().map(bigint_to_f64).collect()
}

fn bigint_to_f64(b: &BigInt) -> f64 {
    b.to_f64().unwrap_or_else(|| if b.is_negative() { f64::MIN } else { f64::MAX })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct evaluation of the slot map; O(N^2), independent of the FFT.
    fn naive_decode(coeffs: &[f64], degree: usize) -> Vec<Complex64> {
        let two_n = 2 * degree;
        let mut g = 1usize;
        let mut out = Vec::new();
        for _ in 0..degree / 2 {
            let mut acc = Complex64::zero();
            for (k, &c) in coeffs.iter().enumerate() {
                let e = (k * g) % two_n;
                acc += Complex64::from_polar(c, PI * e as f64 / degree as f64);
            }
            out.push(acc);
            g = g * 5 % two_n;
        }
        out
    }

    #[test]
    fn special_fft_matches_naive_evaluation() {
        let n = 32;
        let fft = SpecialFft::new(n);
        let coeffs: Vec<f64> = (0..n).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let mut u: Vec<Complex64> =
            (0..n / 2).map(|i| Complex64::new(coeffs[i], coeffs[i + n / 2])).collect();
        fft.forward(&mut u);
        let expect = naive_decode(&coeffs, n);
        for (a, b) in u.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn inverse_fft_roundtrip() {
        let fft = SpecialFft::new(64);
        let orig: Vec<Complex64> =
            (0..32).map(|i| Complex64::new(i as f64 * 0.5 - 3.0, (i % 5) as f64)).collect();
        let mut v = orig.clone();
        fft.inverse(&mut v);
        fft.forward(&mut v);
        for (a, b) in v.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn large_magnitude_residues() {
        let q = crate::ring::Modulus::new((1u64 << 58) + 27).unwrap();
        let c = 2f64.powi(70) * 3.0;
        let expect = {
            let big: BigInt = BigInt::from(3) << 70usize;
            let r: BigInt = big % BigInt::from(q.value());
            r.to_u64().unwrap()
        };
        assert_eq!(residue_of_integral_f64(c, &q), expect);
        assert_eq!(residue_of_integral_f64(-c, &q), q.neg(expect));
    }
}
