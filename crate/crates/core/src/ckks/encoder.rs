//! Canonical embedding for `n/2` slots.
//!
//! A real polynomial `m` is stored as `w_i = m_i + i * m_{i + n/2}`; slot `c`
//! is `m(zeta^{5^c})` with `zeta = exp(i pi / n)`. Since `zeta^{5^c n/2} = i`,
//! slot `c` equals `sum_{i < n/2} w_i zeta^{5^c i}`.

use num_complex::Complex64;

#[derive(Clone, Debug)]
pub struct SpecialFft {
    slots: usize,
    m: usize,
    rot_group: Vec<usize>,
    ksi_pows: Vec<Complex64>,
}

fn bit_reverse_in_place(v: &mut [Complex64]) {
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

impl SpecialFft {
    pub fn new(n: usize) -> Self {
        let slots = n / 2;
        let m = 2 * n;
        let mut rot_group = Vec::with_capacity(slots);
        let mut g = 1usize;
        for _ in 0..slots {
            rot_group.push(g);
            g = g * 5 % m;
        }
        let ksi_pows = (0..=m)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                Complex64::new(a.cos(), a.sin())
            })
            .collect();
        Self { slots, m, rot_group, ksi_pows }
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    /// Coefficient view `w` to slot values, in place.
    pub fn forward(&self, vals: &mut [Complex64]) {
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

    /// Slot values to coefficient view `w`, in place.
    pub fn inverse(&self, vals: &mut [Complex64]) {
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
        vals.iter_mut().for_each(|v| *v *= inv);
    }
}
