//! Negacyclic NTT over `Z_q[X]/(X^n + 1)`.
//!
//! Both variants emit bit-reversed order: `out[j] = a(psi^(2*br(j)+1))`.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::math::modulus::Modulus;
use crate::math::prime::find_primitive_root;

/// Degrees below this use the matrix variant under `NttPolicy::Auto`.
pub const MM_THRESHOLD: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NttPolicy {
    #[default]
    Auto,
    ForceBm,
    ForceMm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NttVariant {
    Butterfly,
    Matrix,
}

impl NttPolicy {
    pub fn resolve(self, n: usize) -> NttVariant {
        match self {
            NttPolicy::Auto if n < MM_THRESHOLD => NttVariant::Matrix,
            NttPolicy::Auto | NttPolicy::ForceBm => NttVariant::Butterfly,
            NttPolicy::ForceMm => NttVariant::Matrix,
        }
    }
}

struct DftMatrix {
    forward: Vec<u64>,
    inverse: Vec<u64>,
}

pub struct NttTables {
    n: usize,
    log_n: u32,
    modulus: Modulus,
    psi: u64,
    psi_powers: Vec<u64>,
    psi_shoup: Vec<u64>,
    inv_psi_powers: Vec<u64>,
    inv_psi_shoup: Vec<u64>,
    n_inv: u64,
    n_inv_shoup: u64,
    matrix_enabled: bool,
    matrix: OnceLock<DftMatrix>,
}

impl std::fmt::Debug for NttTables {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NttTables")
            .field("n", &self.n)
            .field("modulus", &self.modulus.value())
            .field("psi", &self.psi)
            .finish()
    }
}

#[inline]
pub fn bit_reverse(x: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - bits)
    }
}

impl NttTables {
    /// Matrix variant enabled only for `n < 1024`.
    pub fn new(n: usize, modulus: Modulus) -> Result<Self> {
        Self::with_matrix(n, modulus, n < MM_THRESHOLD)
    }

    pub fn with_matrix(n: usize, modulus: Modulus, matrix_enabled: bool) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Parameter(format!("degree {n} is not a power of two >= 2")));
        }
        if !modulus.is_ntt_friendly_for(n) {
            return Err(Error::Parameter(format!(
                "modulus {} is not 1 mod {}",
                modulus.value(),
                2 * n
            )));
        }
        let psi = find_primitive_root(&modulus, 2 * n as u64)?;
        let psi_inv = modulus.inv(psi)?;
        let log_n = n.trailing_zeros();
        let mut psi_powers = vec![0u64; n];
        let mut inv_psi_powers = vec![0u64; n];
        let (mut p, mut ip) = (1u64, 1u64);
        for i in 0..n {
            let r = bit_reverse(i, log_n);
            psi_powers[r] = p;
            inv_psi_powers[r] = ip;
            p = modulus.mul(p, psi);
            ip = modulus.mul(ip, psi_inv);
        }
        let psi_shoup = psi_powers.iter().map(|&w| modulus.shoup(w)).collect();
        let inv_psi_shoup = inv_psi_powers.iter().map(|&w| modulus.shoup(w)).collect();
        let n_inv = modulus.inv(n as u64)?;
        Ok(Self {
            n,
            log_n,
            modulus,
            psi,
            psi_powers,
            psi_shoup,
            inv_psi_powers,
            inv_psi_shoup,
            n_inv,
            n_inv_shoup: modulus.shoup(n_inv),
            matrix_enabled,
            matrix: OnceLock::new(),
        })
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn psi(&self) -> u64 {
        self.psi
    }

    pub fn psi_powers(&self) -> &[u64] {
        &self.psi_powers
    }

    pub fn inv_psi_powers(&self) -> &[u64] {
        &self.inv_psi_powers
    }

    pub fn n_inv(&self) -> u64 {
        self.n_inv
    }

    pub fn matrix_enabled(&self) -> bool {
        self.matrix_enabled
    }

    pub fn matrix_materialized(&self) -> bool {
        self.matrix.get().is_some()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::Shape(format!("vector length {len}, expected {}", self.n)));
        }
        Ok(())
    }

    pub fn forward_bm(&self, a: &mut [u64]) -> Result<()> {
        self.check_len(a.len())?;
        self.forward_bm_unchecked(a);
        Ok(())
    }

    pub fn inverse_bm(&self, a: &mut [u64]) -> Result<()> {
        self.check_len(a.len())?;
        self.inverse_bm_unchecked(a);
        Ok(())
    }

    /// Cooley-Tukey, natural order in, bit-reversed out.
    pub(crate) fn forward_bm_unchecked(&self, a: &mut [u64]) {
        let q = &self.modulus;
        let qv = q.value();
        let n = self.n;
        let mut t = n;
        let mut m = 1;
        while m < n {
            t >>= 1;
            for i in 0..m {
                let w = self.psi_powers[m + i];
                let ws = self.psi_shoup[m + i];
                let (lo, hi) = a[2 * i * t..2 * i * t + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = q.mul_shoup(*y, w, ws);
                    let s = u + v;
                    *x = if s >= qv { s - qv } else { s };
                    *y = if u >= v { u - v } else { u + qv - v };
                }
            }
            m <<= 1;
        }
    }

    /// Gentleman-Sande, bit-reversed in, natural order out, scaled by 1/n.
    pub(crate) fn inverse_bm_unchecked(&self, a: &mut [u64]) {
        let q = &self.modulus;
        let qv = q.value();
        let n = self.n;
        let mut t = 1;
        let mut m = n;
        while m > 1 {
            let h = m >> 1;
            for i in 0..h {
                let w = self.inv_psi_powers[h + i];
                let ws = self.inv_psi_shoup[h + i];
                let j1 = 2 * i * t;
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = *y;
                    let s = u + v;
                    *x = if s >= qv { s - qv } else { s };
                    let d = if u >= v { u - v } else { u + qv - v };
                    *y = q.mul_shoup(d, w, ws);
                }
            }
            t <<= 1;
            m = h;
        }
        for x in a.iter_mut() {
            *x = q.mul_shoup(*x, self.n_inv, self.n_inv_shoup);
        }
    }

    fn dft_matrix(&self) -> Result<&DftMatrix> {
        if !self.matrix_enabled {
            return Err(Error::Config(format!(
                "matrix NTT not enabled for n = {}",
                self.n
            )));
        }
        Ok(self.matrix.get_or_init(|| self.build_matrix()))
    }

    fn build_matrix(&self) -> DftMatrix {
        let q = &self.modulus;
        let n = self.n;
        let two_n = 2 * n as u64;
        // psi^e for every e < 2n
        let mut pows = Vec::with_capacity(2 * n);
        let mut p = 1u64;
        for _ in 0..2 * n {
            pows.push(p);
            p = q.mul(p, self.psi);
        }
        let mut forward = vec![0u64; n * n];
        let mut inverse = vec![0u64; n * n];
        for j in 0..n {
            let e = 2 * bit_reverse(j, self.log_n) as u64 + 1;
            for i in 0..n {
                let k = (e * i as u64) % two_n;
                forward[j * n + i] = pows[k as usize];
                // inverse[i][j] = n^-1 * psi^-(e*i)
                let kinv = (two_n - k) % two_n;
                inverse[i * n + j] = q.mul(self.n_inv, pows[kinv as usize]);
            }
        }
        DftMatrix { forward, inverse }
    }

    fn matvec(&self, mat: &[u64], a: &mut [u64]) {
        let q = &self.modulus;
        let n = self.n;
        let input = a.to_vec();
        // products of two residues are below 2^(2*bits); sums must stay below 2^124
        let lazy = 1usize << (124 - 2 * q.bit_len()).min(6);
        for (j, out) in a.iter_mut().enumerate() {
            let row = &mat[j * n..(j + 1) * n];
            let mut acc = 0u64;
            for (rc, xc) in row.chunks(lazy).zip(input.chunks(lazy)) {
                let s: u128 = rc.iter().zip(xc).map(|(&r, &x)| r as u128 * x as u128).sum();
                acc = q.add(acc, q.reduce_u128(s));
            }
            *out = acc;
        }
    }

    pub fn forward_mm(&self, a: &mut [u64]) -> Result<()> {
        self.check_len(a.len())?;
        let m = self.dft_matrix()?;
        self.matvec(&m.forward, a);
        Ok(())
    }

    pub fn inverse_mm(&self, a: &mut [u64]) -> Result<()> {
        self.check_len(a.len())?;
        let m = self.dft_matrix()?;
        self.matvec(&m.inverse, a);
        Ok(())
    }

    pub fn forward(&self, a: &mut [u64], policy: NttPolicy) -> Result<NttVariant> {
        let v = policy.resolve(self.n);
        match v {
            NttVariant::Butterfly => self.forward_bm(a)?,
            NttVariant::Matrix => self.forward_mm(a)?,
        }
        Ok(v)
    }

    pub fn inverse(&self, a: &mut [u64], policy: NttPolicy) -> Result<NttVariant> {
        let v = policy.resolve(self.n);
        match v {
            NttVariant::Butterfly => self.inverse_bm(a)?,
            NttVariant::Matrix => self.inverse_mm(a)?,
        }
        Ok(v)
    }
}

pub fn ntt_bm(a: &mut [u64], tables: &NttTables) -> Result<()> {
    tables.forward_bm(a)
}

pub fn intt_bm(a: &mut [u64], tables: &NttTables) -> Result<()> {
    tables.inverse_bm(a)
}

pub fn ntt_mm(a: &mut [u64], tables: &NttTables) -> Result<()> {
    tables.forward_mm(a)
}

pub fn intt_mm(a: &mut [u64], tables: &NttTables) -> Result<()> {
    tables.inverse_mm(a)
}

/// Returns the variant that ran.
pub fn ntt_dispatch(a: &mut [u64], tables: &NttTables, policy: NttPolicy) -> Result<NttVariant> {
    tables.forward(a, policy)
}

pub fn intt_dispatch(a: &mut [u64], tables: &NttTables, policy: NttPolicy) -> Result<NttVariant> {
    tables.inverse(a, policy)
}
