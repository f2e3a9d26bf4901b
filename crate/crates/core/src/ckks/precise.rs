//! Double-double special FFT for slot vectors whose magnitudes span more
//! than the ~2^40 that binary64 transforms resolve.

use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{FromPrimitive, ToPrimitive};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn from_bigint(x: &BigInt) -> Self {
        let hi = x.to_f64().unwrap_or(f64::NAN);
        if !hi.is_finite() {
            return Dd::new(hi);
        }
        let rest = x - BigInt::from_f64(hi).unwrap_or_default();
        Dd::new(hi) + Dd::new(rest.to_f64().unwrap_or(0.0))
    }

    pub fn mul_f64(self, b: f64) -> Self {
        let p = self.hi * b;
        let e = self.hi.mul_add(b, -p);
        let (s, t) = quick_two_sum(p, e + self.lo * b);
        Dd { hi: s, lo: t }
    }

    pub fn div_f64(self, b: f64) -> Self {
        let q1 = self.hi / b;
        let r = self - Dd::new(b).mul_f64(q1);
        let q2 = r.hi / b;
        let r = r - Dd::new(b).mul_f64(q2);
        let q3 = r.hi / b;
        let (s, t) = quick_two_sum(q1, q2);
        Dd { hi: s, lo: t } + Dd::new(q3)
    }

    /// Nearest integer; exact while `|self| < 2^126`.
    pub fn round_i128(self) -> i128 {
        let h = self.hi.round();
        let rest = (self.hi - h) + self.lo;
        h as i128 + rest.round() as i128
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (s, e) = quick_two_sum(s, e + f);
        Dd { hi: s, lo: e }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let p = self.hi * b.hi;
        let e = self.hi.mul_add(b.hi, -p);
        let (s, t) = quick_two_sum(p, e + (self.hi * b.lo + self.lo * b.hi));
        Dd { hi: s, lo: t }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Cdd {
    pub re: Dd,
    pub im: Dd,
}

impl Cdd {
    pub fn new(re: Dd, im: Dd) -> Self {
        Cdd { re, im }
    }

    pub fn from_c64(z: Complex64) -> Self {
        Cdd::new(Dd::new(z.re), Dd::new(z.im))
    }

    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    fn scale(self, s: f64) -> Self {
        Cdd::new(self.re.mul_f64(s), self.im.mul_f64(s))
    }

    fn div(self, s: f64) -> Self {
        Cdd::new(self.re.div_f64(s), self.im.div_f64(s))
    }
}

impl Add for Cdd {
    type Output = Cdd;
    fn add(self, b: Cdd) -> Cdd {
        Cdd::new(self.re + b.re, self.im + b.im)
    }
}

impl Sub for Cdd {
    type Output = Cdd;
    fn sub(self, b: Cdd) -> Cdd {
        Cdd::new(self.re - b.re, self.im - b.im)
    }
}

impl Mul for Cdd {
    type Output = Cdd;
    fn mul(self, b: Cdd) -> Cdd {
        Cdd::new(self.re * b.re - self.im * b.im, self.re * b.im + self.im * b.re)
    }
}

/// `exp(2 pi i k / m)` for `k in 0..=m`, each refined by one Newton step on
/// `z^m = 1` from its binary64 approximation.
fn roots(m: usize) -> Vec<Cdd> {
    debug_assert!(m.is_power_of_two());
    (0..=m)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
            let z = Cdd::from_c64(Complex64::new(a.cos(), a.sin()));
            let mut w = z;
            let mut e = 1;
            while e < m {
                w = w * w;
                e <<= 1;
            }
            // z <- z (1 - (z^m - 1) / m)
            let one = Cdd::new(Dd::new(1.0), Dd::ZERO);
            let corr = (w - one).div(m as f64);
            z - z * corr
        })
        .collect()
}

fn bit_reverse_in_place(v: &mut [Cdd]) {
    let n = v.len();
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j ^= bit;
        if i < j {
            v.swap(i, j);
        }
    }
}

#[derive(Clone, Debug)]
pub struct PreciseFft {
    slots: usize,
    m: usize,
    rot_group: Vec<usize>,
    ksi_pows: Vec<Cdd>,
}

impl PreciseFft {
    pub fn new(n: usize) -> Self {
        let slots = n / 2;
        let m = 2 * n;
        let mut rot_group = Vec::with_capacity(slots);
        let mut g = 1usize;
        for _ in 0..slots {
            rot_group.push(g);
            g = g * 5 % m;
        }
        Self { slots, m, rot_group, ksi_pows: roots(m) }
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn forward(&self, vals: &mut [Cdd]) {
        let size = vals.len();
        debug_assert!(size <= self.slots && size.is_power_of_two());
        bit_reverse_in_place(vals);
        let mut len = 2;
        while len <= size {
            let lenh = len >> 1;
            let lenq = len << 2;
            let gap = self.m / lenq;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (self.rot_group[j] % lenq) * gap;
                    let u = vals[i + j];
                    let v = vals[i + j + lenh] * self.ksi_pows[idx];
                    vals[i + j] = u + v;
                    vals[i + j + lenh] = u - v;
                }
            }
            len <<= 1;
        }
    }

    pub fn inverse(&self, vals: &mut [Cdd]) {
        let size = vals.len();
        debug_assert!(size <= self.slots && size.is_power_of_two());
        let mut len = size;
        while len >= 2 {
            let lenh = len >> 1;
            let lenq = len << 2;
            let gap = self.m / lenq;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (lenq - self.rot_group[j] % lenq) * gap;
                    let u = vals[i + j] + vals[i + j + lenh];
                    let v = (vals[i + j] - vals[i + j + lenh]) * self.ksi_pows[idx];
                    vals[i + j] = u;
                    vals[i + j + lenh] = v;
                }
            }
            len >>= 1;
        }
        bit_reverse_in_place(vals);
        let inv = 1.0 / size as f64;
        vals.iter_mut().for_each(|v| *v = v.scale(inv));
    }

    /// Slot values to integer coefficients at `scale`.
    pub fn encode(&self, values: &[Complex64], scale: f64) -> Vec<i128> {
        let mut w = vec![Cdd::default(); self.slots];
        for (x, v) in w.iter_mut().zip(values) {
            *x = Cdd::from_c64(*v);
        }
        self.inverse(&mut w);
        let mut out = vec![0i128; 2 * self.slots];
        for (i, z) in w.iter().enumerate() {
            out[i] = z.re.mul_f64(scale).round_i128();
            out[i + self.slots] = z.im.mul_f64(scale).round_i128();
        }
        out
    }

    /// Integer coefficients at `scale` to slot values.
    pub fn decode(&self, coeffs: &[BigInt], scale: f64) -> Vec<Complex64> {
        let s = self.slots;
        let mut w: Vec<Cdd> = (0..s)
            .map(|i| Cdd::new(Dd::from_bigint(&coeffs[i]), Dd::from_bigint(&coeffs[i + s])).div(scale))
            .collect();
        self.forward(&mut w);
        w.into_iter().map(Cdd::to_c64).collect()
    }
}
