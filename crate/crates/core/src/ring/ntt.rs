//! Negacyclic number-theoretic transform over `Z_q[X]/(X^N + 1)`.
//!
//! Forward transform is the iterative Cooley-Tukey butterfly with the powers of a
//! primitive `2N`-th root `psi` stored in bit-reversed order, so no explicit
//! pre-twist is needed. Output slot `i` holds the evaluation at
//! `psi^(2*brv(i) + 1)`. The inverse is the matching Gentleman-Sande network.

use super::modulus::Modulus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NttTable {
    modulus: Modulus,
    degree: usize,
    log_degree: u32,
    psi: u64,
    psi_rev: Vec<u64>,
    psi_rev_shoup: Vec<u64>,
    ipsi_rev: Vec<u64>,
    ipsi_rev_shoup: Vec<u64>,
    n_inv: u64,
    n_inv_shoup: u64,
}

#[inline]
pub(crate) fn bit_reverse(x: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - bits)
    }
}

impl NttTable {
    /// Builds root tables; fails unless `modulus ≡ 1 (mod 2N)`.
    pub fn new(modulus: Modulus, degree: usize) -> Result<Self> {
        if !degree.is_power_of_two() || degree < 2 {
            return Err(Error::Param(format!("ring degree {degree} is not a power of two")));
        }
        let q = modulus.value();
        let two_n = 2 * degree as u64;
        if (q - 1) % two_n != 0 {
            return Err(Error::Param(format!(
                "modulus {q} is not NTT-friendly for N={degree} (needs q ≡ 1 mod {two_n})"
            )));
        }
        let psi = find_primitive_root(&modulus, two_n)?;
        let psi_inv = modulus.inv(psi)?;
        let log_degree = degree.trailing_zeros();

        let mut psi_rev = vec![0u64; degree];
        let mut ipsi_rev = vec![0u64; degree];
        let mut pw = 1u64;
        let mut ipw = 1u64;
        for i in 0..degree {
            let r = bit_reverse(i, log_degree);
            psi_rev[r] = pw;
            ipsi_rev[r] = ipw;
            pw = modulus.mul(pw, psi);
            ipw = modulus.mul(ipw, psi_inv);
        }
        let psi_rev_shoup = psi_rev.iter().map(|&w| modulus.shoup(w)).collect();
        let ipsi_rev_shoup = ipsi_rev.iter().map(|&w| modulus.shoup(w)).collect();
        let n_inv = modulus.inv(degree as u64)?;
        Ok(Self {
            modulus,
            degree,
            log_degree,
            psi,
            psi_rev,
            psi_rev_shoup,
            ipsi_rev,
            ipsi_rev_shoup,
            n_inv,
            n_inv_shoup: modulus.shoup(n_inv),
        })
    }

    #[inline]
    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// The primitive `2N`-th root of unity the transform evaluates at.
    pub fn psi(&self) -> u64 {
        self.psi
    }

    /// Exponent `e` such that output slot `i` is the evaluation at `psi^e`.
    #[inline]
    pub fn slot_exponent(&self, i: usize) -> usize {
        2 * bit_reverse(i, self.log_degree) + 1
    }

    pub fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.degree);
        let q = self.modulus.value();
        let two_q = 2 * q;
        let n = self.degree;
        // Harvey butterflies: values stay in [0, 4q) until the final pass
        let mut t = n;
        let mut m = 1;
        while m < n {
            t >>= 1;
            for i in 0..m {
                let j1 = 2 * i * t;
                let w = self.psi_rev[m + i];
                let ws = self.psi_rev_shoup[m + i];
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let mut u = *x;
                    if u >= two_q {
                        u -= two_q;
                    }
                    let v = mul_shoup_lazy(*y, w, ws, q);
                    *x = u + v;
                    *y = u + two_q - v;
                }
            }
            m <<= 1;
        }
        for x in a.iter_mut() {
            let mut v = *x;
            if v >= two_q {
                v -= two_q;
            }
            if v >= q {
                v -= q;
            }
            *x = v;
        }
    }

    pub fn inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.degree);
        let q = self.modulus.value();
        let two_q = 2 * q;
        let n = self.degree;
        let mut t = 1;
        let mut m = n;
        while m > 1 {
            let h = m >> 1;
            let mut j1 = 0;
            for i in 0..h {
                let w = self.ipsi_rev[h + i];
                let ws = self.ipsi_rev_shoup[h + i];
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = *y;
                    let mut s = u + v;
                    if s >= two_q {
                        s -= two_q;
                    }
                    *x = s;
                    *y = mul_shoup_lazy(u + two_q - v, w, ws, q);
                }
                j1 += 2 * t;
            }
            t <<= 1;
            m = h;
        }
        let qm = &self.modulus;
        for x in a.iter_mut() {
            *x = qm.mul_shoup(*x, self.n_inv, self.n_inv_shoup);
        }
    }
}

/// `a * w mod q` up to one extra `q`: the result lies in `[0, 2q)`.
#[inline(always)]
fn mul_shoup_lazy(a: u64, w: u64, w_shoup: u64, q: u64) -> u64 {
    let quot = ((a as u128 * w_shoup as u128) >> 64) as u64;
    a.wrapping_mul(w).wrapping_sub(quot.wrapping_mul(q))
}

fn find_primitive_root(modulus: &Modulus, order: u64) -> Result<u64> {
    let q = modulus.value();
    let cofactor = (q - 1) / order;
    for g in 2..q.min(1 << 20) {
        let cand = modulus.pow(g, cofactor);
        // order is a power of two: primitive iff cand^(order/2) == -1
        if modulus.pow(cand, order / 2) == q - 1 {
            return Ok(cand);
        }
    }
    Err(Error::Param(format!("no primitive {order}-th root of unity modulo {q}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eval_at(coeffs: &[u64], x: u64, q: &Modulus) -> u64 {
        coeffs.iter().rev().fold(0, |acc, &c| q.add(q.mul(acc, x), c))
    }

    #[test]
    fn rejects_unfriendly_modulus() {
        let q = Modulus::new(101).unwrap();
        assert!(NttTable::new(q, 16).is_err());
    }

    #[test]
    fn forward_evaluates_at_odd_root_powers() {
        let q = Modulus::new(97).unwrap();
        let table = NttTable::new(q, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let coeffs: Vec<u64> = (0..16).map(|_| rng.gen_range(0..97)).collect();
        let mut a = coeffs.clone();
        table.forward(&mut a);
        for (i, &v) in a.iter().enumerate() {
            let point = q.pow(table.psi(), table.slot_exponent(i) as u64);
            assert_eq!(v, eval_at(&coeffs, point, &q));
        }
    }

    #[test]
    fn roundtrip_small_and_large() {
        let q = Modulus::new(97).unwrap();
        let table = NttTable::new(q, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let orig: Vec<u64> = (0..16).map(|_| rng.gen_range(0..97)).collect();
        let mut a = orig.clone();
        table.forward(&mut a);
        table.inverse(&mut a);
        assert_eq!(a, orig);

        let q = super::super::modulus::generate_ntt_primes(4096, &[60]).unwrap()[0];
        let table = NttTable::new(q, 4096).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let orig: Vec<u64> = (0..4096).map(|_| rng.gen_range(0..q.value())).collect();
        let mut a = orig.clone();
        table.forward(&mut a);
        table.inverse(&mut a);
        assert_eq!(a, orig);
    }

    #[test]
    fn zero_and_constant_transforms() {
        let q = Modulus::new(97).unwrap();
        let table = NttTable::new(q, 16).unwrap();
        let mut z = vec![0u64; 16];
        table.forward(&mut z);
        assert!(z.iter().all(|&x| x == 0));
        let mut c = vec![0u64; 16];
        c[0] = 42;
        table.forward(&mut c);
        assert!(c.iter().all(|&x| x == 42));
    }
}
