use serde::{Deserialize, Serialize};

use crate::error::{PdqError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdqConfig {
    /// Digit base.
    pub p: u64,
    /// Digits per value.
    pub k: usize,
    pub rows: usize,
    /// Values lie in `[0, 2^value_bits)`.
    pub value_bits: u32,
    /// Magnitude range of the multiplicative mask; the sign is random.
    pub mask_min: f64,
    pub mask_max: f64,
    /// Client replies below this magnitude get a zero reciprocal.
    pub reciprocal_threshold: f64,
    /// Scale of the client's fresh reciprocal ciphertext.
    pub reply_scale_bits: u32,
}

impl Default for PdqConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl PdqConfig {
    pub fn desk() -> Self {
        Self {
            p: 4,
            k: 8,
            rows: 1024,
            value_bits: 16,
            mask_min: 2f64.powi(-8),
            mask_max: 2f64.powi(8),
            reciprocal_threshold: 2f64.powi(-20),
            reply_scale_bits: 80,
        }
    }

    pub fn full() -> Self {
        Self { k: 16, value_bits: 32, ..Self::desk() }
    }

    pub fn with_rows(mut self, rows: usize) -> Self {
        self.rows = rows;
        self
    }

    pub fn limit(&self) -> u64 {
        1u64 << self.value_bits
    }

    pub fn validate(&self, slots: usize) -> Result<()> {
        if self.p < 2 {
            return Err(PdqError::Config(format!("digit base {} below 2", self.p)));
        }
        let cover = (self.p as f64).powi(self.k as i32);
        if cover < self.limit() as f64 {
            return Err(PdqError::Config(format!("{}^{} does not cover 2^{}", self.p, self.k, self.value_bits)));
        }
        if self.rows == 0 || self.rows > slots {
            return Err(PdqError::Config(format!("{} rows for {slots} slots", self.rows)));
        }
        if !(0.0 < self.mask_min && self.mask_min <= self.mask_max) {
            return Err(PdqError::Config("mask range".into()));
        }
        Ok(())
    }
}

/// Little-endian base-`p` digits of `v`.
pub fn digit_decompose(v: u64, p: u64, k: usize) -> Result<Vec<u64>> {
    let limit = (p as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if v as u128 >= limit {
        return Err(PdqError::Range { value: v, limit: limit.min(u64::MAX as u128) as u64 });
    }
    let mut x = v;
    Ok((0..k)
        .map(|_| {
            let d = x % p;
            x /= p;
            d
        })
        .collect())
}

pub fn digit_recompose(digits: &[u64], p: u64) -> u64 {
    digits.iter().rev().fold(0, |acc, &d| acc * p + d)
}
