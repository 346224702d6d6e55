//! Word-sized prime moduli with Barrett and Shoup reduction.

use crate::error::{Error, Result};

/// Largest supported modulus bit width; products of two residues fit in `u128`
/// and Barrett quotients fit in a single word.
pub const MAX_MODULUS_BITS: u32 = 62;

/// An odd prime modulus below `2^62`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Modulus {
    value: u64,
    bits: u32,
    // floor(2^(2*bits) / value)
    barrett: u64,
    // 2^64 mod value
    pow64: u64,
}

impl Modulus {
    pub fn new(value: u64) -> Result<Self> {
        if value < 3 || value % 2 == 0 {
            return Err(Error::Param(format!("modulus {value} must be an odd integer >= 3")));
        }
        let bits = 64 - value.leading_zeros();
        if bits > MAX_MODULUS_BITS {
            return Err(Error::Param(format!(
                "modulus {value} has {bits} bits, at most {MAX_MODULUS_BITS} supported"
            )));
        }
        let barrett = ((1u128 << (2 * bits)) / value as u128) as u64;
        let pow64 = ((1u128 << 64) % value as u128) as u64;
        Ok(Self { value, bits, barrett, pow64 })
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    #[inline]
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Reduces `x < value^2`.
    #[inline]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        let k = self.bits;
        let quot = (((x >> (k - 1)) as u64 as u128 * self.barrett as u128) >> (k + 1)) as u64;
        let mut r = (x - quot as u128 * self.value as u128) as u64;
        while r >= self.value {
            r -= self.value;
        }
        r
    }

    /// Reduces any `x < 2^127`, e.g. a short sum of products.
    #[inline]
    pub fn reduce_u128_wide(&self, x: u128) -> u64 {
        let hi = self.reduce((x >> 64) as u64);
        let lo = self.reduce(x as u64);
        self.add(self.mul(hi, self.pow64), lo)
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        if self.bits >= 32 {
            // x < 2^64 <= value^2, inside the Barrett range
            self.reduce_u128(x as u128)
        } else {
            x % self.value
        }
    }

    /// Reduces a signed integer into `[0, value)`.
    #[inline]
    pub fn reduce_i64(&self, x: i64) -> u64 {
        let r = x.rem_euclid(self.value as i64);
        r as u64
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.value {
            s - self.value
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.value - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.value - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 * b as u128)
    }

    /// Precomputed constant for repeated multiplication by `w`.
    #[inline]
    pub fn shoup(&self, w: u64) -> u64 {
        (((w as u128) << 64) / self.value as u128) as u64
    }

    /// `a * w mod value` given `w_shoup = self.shoup(w)`.
    #[inline]
    pub fn mul_shoup(&self, a: u64, w: u64, w_shoup: u64) -> u64 {
        let quot = ((a as u128 * w_shoup as u128) >> 64) as u64;
        let r = a.wrapping_mul(w).wrapping_sub(quot.wrapping_mul(self.value));
        if r >= self.value {
            r - self.value
        } else {
            r
        }
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1u64;
        base %= self.value;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Inverse via Fermat; the modulus is prime.
    pub fn inv(&self, a: u64) -> Result<u64> {
        let a = a % self.value;
        if a == 0 {
            return Err(Error::Param(format!("0 has no inverse modulo {}", self.value)));
        }
        Ok(self.pow(a, self.value - 2))
    }

    /// Centered representative in `(-value/2, value/2]`.
    #[inline]
    pub fn center(&self, a: u64) -> i64 {
        if a > self.value / 2 {
            a as i64 - self.value as i64
        } else {
            a as i64
        }
    }
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in SMALL {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        acc
    };
    'witness: for a in SMALL {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Generates NTT-friendly primes (`q ≡ 1 mod 2N`) for each requested bit size.
///
/// For every entry the search walks downward from `2^bits`, skipping primes
/// already taken, so the result is deterministic in `(degree, bit_sizes)`.
pub fn generate_ntt_primes(degree: usize, bit_sizes: &[u32]) -> Result<Vec<Modulus>> {
    if !degree.is_power_of_two() || degree < 2 {
        return Err(Error::Param(format!("ring degree {degree} is not a power of two")));
    }
    let step = 2 * degree as u64;
    let mut taken: Vec<u64> = Vec::with_capacity(bit_sizes.len());
    let mut out = Vec::with_capacity(bit_sizes.len());
    for &bits in bit_sizes {
        if !(2..=MAX_MODULUS_BITS).contains(&bits) {
            return Err(Error::Param(format!("prime size {bits} bits outside [2, {MAX_MODULUS_BITS}]")));
        }
        let upper = 1u64 << bits;
        let lower = 1u64 << (bits - 1);
        // largest candidate below 2^bits congruent to 1 mod 2N
        let mut candidate = (upper - 1) / step * step + 1;
        if candidate >= upper {
            candidate = candidate.saturating_sub(step);
        }
        let found = loop {
            if candidate <= lower {
                break None;
            }
            if !taken.contains(&candidate) && is_prime(candidate) {
                break Some(candidate);
            }
            candidate -= step;
        };
        let q = found.ok_or_else(|| {
            Error::Param(format!("no {bits}-bit prime congruent to 1 mod {step} available"))
        })?;
        taken.push(q);
        out.push(Modulus::new(q)?);
    }
    Ok(out)
}
