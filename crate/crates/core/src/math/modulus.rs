//! Word-sized moduli with Barrett and Shoup reduction.

use crate::error::{Error, Result};
use crate::math::prime::is_prime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Modulus {
    value: u64,
    bit_len: u32,
    barrett_hi: u64,
    barrett_lo: u64,
}

impl Modulus {
    /// Any modulus in `[2, 2^62)`.
    pub fn new(value: u64) -> Result<Self> {
        if !(2..1u64 << 62).contains(&value) {
            return Err(Error::Parameter(format!("modulus {value} outside [2, 2^62)")));
        }
        // floor(2^128 / q) = floor((2^128 - 1) / q) unless q is a power of two.
        let mut ratio = u128::MAX / value as u128;
        if value.is_power_of_two() {
            ratio += 1;
        }
        Ok(Self {
            value,
            bit_len: 64 - value.leading_zeros(),
            barrett_hi: (ratio >> 64) as u64,
            barrett_lo: ratio as u64,
        })
    }

    /// A prime usable in an RNS chain: 2^32 < q < 2^62.
    pub fn prime(value: u64) -> Result<Self> {
        if value <= 1u64 << 32 {
            return Err(Error::Parameter(format!("chain modulus {value} must exceed 2^32")));
        }
        if !is_prime(value) {
            return Err(Error::Parameter(format!("{value} is not prime")));
        }
        Self::new(value)
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn bit_len(&self) -> u32 {
        self.bit_len
    }

    pub fn barrett(&self) -> (u64, u64) {
        (self.barrett_hi, self.barrett_lo)
    }

    pub fn is_ntt_friendly_for(&self, n: usize) -> bool {
        (self.value - 1).is_multiple_of(2 * n as u64)
    }

    /// Reduces any `x < 2^124`.
    #[inline]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        let q = self.value;
        let x_lo = x as u64;
        let x_hi = (x >> 64) as u64;
        let t0 = (x_lo as u128 * self.barrett_lo as u128) >> 64;
        let t1 = x_lo as u128 * self.barrett_hi as u128 + x_hi as u128 * self.barrett_lo as u128 + t0;
        let est = (x_hi as u128 * self.barrett_hi as u128).wrapping_add(t1 >> 64);
        let mut r = (x as u64).wrapping_sub((est as u64).wrapping_mul(q));
        while r >= q {
            r -= q;
        }
        r
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        if x < self.value {
            x
        } else {
            self.reduce_u128(x as u128)
        }
    }

    /// Reduces a signed integer into `[0, q)`.
    #[inline]
    pub fn reduce_i64(&self, x: i64) -> u64 {
        if x >= 0 {
            self.reduce(x as u64)
        } else {
            let r = self.reduce(x.unsigned_abs());
            if r == 0 {
                0
            } else {
                self.value - r
            }
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.value && b < self.value);
        self.reduce_u128(a as u128 * b as u128)
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.value && b < self.value);
        let s = a + b;
        if s >= self.value {
            s - self.value
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.value && b < self.value);
        if a >= b {
            a - b
        } else {
            a + self.value - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        debug_assert!(a < self.value);
        if a == 0 {
            0
        } else {
            self.value - a
        }
    }

    pub fn pow(&self, base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.value;
        let mut b = self.reduce(base);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            exp >>= 1;
        }
        acc
    }

    /// Fermat inverse; the modulus must be prime.
    pub fn inv(&self, a: u64) -> Result<u64> {
        let a = self.reduce(a);
        if a == 0 {
            return Err(Error::NonInvertible(format!("0 mod {}", self.value)));
        }
        Ok(self.pow(a, self.value - 2))
    }

    /// `floor(w * 2^64 / q)` for multiplications by the fixed operand `w`.
    #[inline]
    pub fn shoup(&self, w: u64) -> u64 {
        debug_assert!(w < self.value);
        (((w as u128) << 64) / self.value as u128) as u64
    }

    #[inline]
    pub fn mul_shoup(&self, a: u64, w: u64, w_shoup: u64) -> u64 {
        let hi = ((a as u128 * w_shoup as u128) >> 64) as u64;
        let r = a.wrapping_mul(w).wrapping_sub(hi.wrapping_mul(self.value));
        if r >= self.value {
            r - self.value
        } else {
            r
        }
    }

    /// Centered lift into `(-q/2, q/2]`.
    #[inline]
    pub fn center(&self, a: u64) -> i64 {
        if a > self.value / 2 {
            a as i64 - self.value as i64
        } else {
            a as i64
        }
    }
}

pub fn mul_mod(a: u64, b: u64, m: &Modulus) -> u64 {
    m.mul(a, b)
}

pub fn add_mod(a: u64, b: u64, m: &Modulus) -> u64 {
    m.add(a, b)
}

pub fn sub_mod(a: u64, b: u64, m: &Modulus) -> u64 {
    m.sub(a, b)
}

pub fn neg_mod(a: u64, m: &Modulus) -> u64 {
    m.neg(a)
}

pub fn pow_mod(a: u64, e: u64, m: &Modulus) -> u64 {
    m.pow(a, e)
}

pub fn inv_mod(a: u64, m: &Modulus) -> Result<u64> {
    m.inv(a)
}

/// Extended-Euclid inverse for composite moduli.
pub fn inv_mod_general(a: u64, m: u64) -> Result<u64> {
    let (mut r0, mut r1) = (m as i128, (a % m) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 != 1 {
        return Err(Error::NonInvertible(format!("{a} mod {m}")));
    }
    Ok(t0.rem_euclid(m as i128) as u64)
}
