//! Full-RNS BFV tensoring with an auxiliary base `Bsk = B ∪ {m_sk}` and a
//! redundant modulus `m~ = 2^16`.
//!
//! Inputs in base `q` are lifted to `Bsk` by fast base conversion, the
//! `q`-overflow of that conversion is removed by a small Montgomery step
//! modulo `m~`, the tensor is formed exactly in `q ∪ Bsk`, `t/q` scaling is a
//! fast floor into `Bsk`, and the result returns to `q` with the `m_sk`
//! correction.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};

use crate::error::{Error, Result};
use crate::math::modulus::Modulus;
use crate::math::ntt::NttTables;
use crate::math::prime::gen_ntt_primes;

pub const M_TILDE_BITS: u32 = 16;
const M_TILDE: u64 = 1 << M_TILDE_BITS;
const M_TILDE_MASK: u64 = M_TILDE - 1;

#[derive(Debug)]
pub struct BehzConstants {
    q: Vec<Modulus>,
    /// `B` followed by `m_sk`.
    bsk: Vec<Modulus>,
    bsk_tables: Vec<NttTables>,
    t: u64,
    m_tilde_mod_q: Vec<u64>,
    inv_punct_q: Vec<u64>,
    /// `[(q / q_i) mod m]` for `m` in `Bsk`, indexed `[m][i]`.
    punct_q_mod_bsk: Vec<Vec<u64>>,
    punct_q_mod_mtilde: Vec<u64>,
    neg_inv_q_mod_mtilde: u64,
    q_mod_bsk: Vec<u64>,
    inv_mtilde_mod_bsk: Vec<u64>,
    inv_q_mod_bsk: Vec<u64>,
    t_mod_q: Vec<u64>,
    t_mod_bsk: Vec<u64>,
    inv_punct_b: Vec<u64>,
    /// `[(B / b_k) mod q_i]`, indexed `[i][k]`.
    punct_b_mod_q: Vec<Vec<u64>>,
    punct_b_mod_msk: Vec<u64>,
    inv_b_mod_msk: u64,
    b_mod_q: Vec<u64>,
}

fn big_mod(x: &BigUint, m: u64) -> u64 {
    (x % m).to_u64().unwrap_or(0)
}

impl BehzConstants {
    pub fn new(n: usize, q: &[Modulus], t: u64, exclude: &[u64]) -> Result<Self> {
        let l = q.len();
        let primes = gen_ntt_primes(61, n, l + 2, exclude)?;
        let bsk: Vec<Modulus> = primes;
        let b = &bsk[..l + 1];
        let msk = bsk[l + 1];

        let big_q: BigUint = q.iter().fold(BigUint::one(), |a, m| a * m.value());
        let big_b: BigUint = b.iter().fold(BigUint::one(), |a, m| a * m.value());
        let need = big_q.bits() as f64 + (n as f64).log2() + (t as f64).log2() + 4.0;
        if (big_b.bits() as f64) < need {
            return Err(Error::Parameter(format!(
                "auxiliary base of {} bits is below the {need:.0}-bit bound",
                big_b.bits()
            )));
        }

        let punct_q: Vec<BigUint> = q.iter().map(|m| &big_q / m.value()).collect();
        let inv_punct_q = q
            .iter()
            .zip(&punct_q)
            .map(|(m, p)| m.inv(big_mod(p, m.value())))
            .collect::<Result<Vec<_>>>()?;
        let punct_q_mod_bsk = bsk.iter().map(|m| punct_q.iter().map(|p| big_mod(p, m.value())).collect()).collect();
        let punct_q_mod_mtilde = punct_q.iter().map(|p| big_mod(p, M_TILDE)).collect();
        let q_mod_mtilde = big_mod(&big_q, M_TILDE);
        let inv_q_mtilde = crate::math::modulus::inv_mod_general(q_mod_mtilde, M_TILDE)?;
        let neg_inv_q_mod_mtilde = (M_TILDE - inv_q_mtilde) & M_TILDE_MASK;
        let q_mod_bsk: Vec<u64> = bsk.iter().map(|m| big_mod(&big_q, m.value())).collect();
        let inv_mtilde_mod_bsk = bsk.iter().map(|m| m.inv(m.reduce(M_TILDE))).collect::<Result<Vec<_>>>()?;
        let inv_q_mod_bsk = bsk.iter().zip(&q_mod_bsk).map(|(m, &r)| m.inv(r)).collect::<Result<Vec<_>>>()?;

        let punct_b: Vec<BigUint> = b.iter().map(|m| &big_b / m.value()).collect();
        let inv_punct_b = b
            .iter()
            .zip(&punct_b)
            .map(|(m, p)| m.inv(big_mod(p, m.value())))
            .collect::<Result<Vec<_>>>()?;
        let punct_b_mod_q = q.iter().map(|m| punct_b.iter().map(|p| big_mod(p, m.value())).collect()).collect();
        let punct_b_mod_msk = punct_b.iter().map(|p| big_mod(p, msk.value())).collect();
        let inv_b_mod_msk = msk.inv(big_mod(&big_b, msk.value()))?;
        let b_mod_q = q.iter().map(|m| big_mod(&big_b, m.value())).collect();

        let bsk_tables = bsk.iter().map(|&m| NttTables::new(n, m)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            q: q.to_vec(),
            m_tilde_mod_q: q.iter().map(|m| m.reduce(M_TILDE)).collect(),
            t_mod_q: q.iter().map(|m| m.reduce(t)).collect(),
            t_mod_bsk: bsk.iter().map(|m| m.reduce(t)).collect(),
            bsk,
            bsk_tables,
            t,
            inv_punct_q,
            punct_q_mod_bsk,
            punct_q_mod_mtilde,
            neg_inv_q_mod_mtilde,
            q_mod_bsk,
            inv_mtilde_mod_bsk,
            inv_q_mod_bsk,
            inv_punct_b,
            punct_b_mod_q,
            punct_b_mod_msk,
            inv_b_mod_msk,
            b_mod_q,
        })
    }

    pub fn bsk(&self) -> &[Modulus] {
        &self.bsk
    }

    pub fn bsk_tables(&self) -> &[NttTables] {
        &self.bsk_tables
    }

    pub fn m_sk(&self) -> &Modulus {
        self.bsk.last().expect("non-empty base")
    }

    pub fn m_tilde(&self) -> u64 {
        M_TILDE
    }

    pub fn plain_modulus(&self) -> u64 {
        self.t
    }

    /// Lifts coefficient rows `x` (base `q`) to `Bsk` rows, returned flat
    /// (`bsk.len()` rows of `n`). The result is `x + e q` with `e ∈ {-1, 0, 1}`.
    pub fn lift_to_bsk(&self, x: &[&[u64]], n: usize) -> Vec<u64> {
        let nb = self.bsk.len();
        let mut out = vec![0u64; nb * n];
        let mut digits_row = vec![0u64; self.q.len()];
        for k in 0..n {
            // multiply by m~ and convert to Bsk ∪ {m~}
            for (i, m) in self.q.iter().enumerate() {
                let xi = m.mul(x[i][k], self.m_tilde_mod_q[i]);
                digits_row[i] = m.mul(xi, self.inv_punct_q[i]);
            }
            let mut c_mt = 0u64;
            for (i, &d) in digits_row.iter().enumerate() {
                c_mt = c_mt.wrapping_add((d & M_TILDE_MASK).wrapping_mul(self.punct_q_mod_mtilde[i]));
            }
            c_mt &= M_TILDE_MASK;
            // r = -c / q mod m~, centered
            let r = (c_mt.wrapping_mul(self.neg_inv_q_mod_mtilde)) & M_TILDE_MASK;
            let r_signed = if r >= M_TILDE / 2 { r as i64 - M_TILDE as i64 } else { r as i64 };
            for (b, m) in self.bsk.iter().enumerate() {
                let mut acc = 0u64;
                for (i, &d) in digits_row.iter().enumerate() {
                    acc = m.add(acc, m.mul(m.reduce(d), self.punct_q_mod_bsk[b][i]));
                }
                let corr = m.mul(self.q_mod_bsk[b], m.reduce_i64(r_signed));
                out[b * n + k] = m.mul(m.add(acc, corr), self.inv_mtilde_mod_bsk[b]);
            }
        }
        out
    }

    /// `floor(t x / q)` (up to a small nonnegative offset) in `Bsk`, from `x`
    /// given in both `q` and `Bsk`.
    pub fn fast_floor(&self, xq: &[&[u64]], xb: &[&[u64]], n: usize) -> Vec<u64> {
        let nb = self.bsk.len();
        let mut out = vec![0u64; nb * n];
        let mut digits = vec![0u64; self.q.len()];
        for k in 0..n {
            for (i, m) in self.q.iter().enumerate() {
                digits[i] = m.mul(m.mul(xq[i][k], self.t_mod_q[i]), self.inv_punct_q[i]);
            }
            for (b, m) in self.bsk.iter().enumerate() {
                let mut conv = 0u64;
                for (i, &d) in digits.iter().enumerate() {
                    conv = m.add(conv, m.mul(m.reduce(d), self.punct_q_mod_bsk[b][i]));
                }
                let v = m.sub(m.mul(xb[b][k], self.t_mod_bsk[b]), conv);
                out[b * n + k] = m.mul(v, self.inv_q_mod_bsk[b]);
            }
        }
        out
    }

    /// Converts `Bsk` rows back to `q` exactly, using `m_sk` to cancel the
    /// overflow of the conversion from `B`.
    pub fn bsk_to_q(&self, y: &[&[u64]], n: usize) -> Vec<u64> {
        let l = self.q.len();
        let nb = self.bsk.len() - 1;
        let msk = *self.m_sk();
        let mut out = vec![0u64; l * n];
        let mut digits = vec![0u64; nb];
        for k in 0..n {
            for (j, m) in self.bsk[..nb].iter().enumerate() {
                digits[j] = m.mul(y[j][k], self.inv_punct_b[j]);
            }
            let mut z_sk = 0u64;
            for (j, &d) in digits.iter().enumerate() {
                z_sk = msk.add(z_sk, msk.mul(msk.reduce(d), self.punct_b_mod_msk[j]));
            }
            let alpha = msk.mul(msk.sub(z_sk, y[nb][k]), self.inv_b_mod_msk);
            let alpha = msk.center(alpha);
            for (i, m) in self.q.iter().enumerate() {
                let mut z = 0u64;
                for (j, &d) in digits.iter().enumerate() {
                    z = m.add(z, m.mul(m.reduce(d), self.punct_b_mod_q[i][j]));
                }
                out[i * n + k] = m.sub(z, m.mul(m.reduce_i64(alpha), self.b_mod_q[i]));
            }
        }
        out
    }
}
