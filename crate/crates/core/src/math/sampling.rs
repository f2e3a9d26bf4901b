use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::math::modulus::Modulus;

/// Centered binomial parameter: variance eta/2, sigma ~ 3.24.
pub const CBD_ETA: u32 = 21;

/// Deterministic ChaCha20 stream.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: [u8; 32],
    inner: ChaCha20Rng,
}

impl Rng {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        Self { seed, inner: ChaCha20Rng::from_seed(seed) }
    }

    pub fn seed_from_u64(seed: u64) -> Self {
        let mut s = [0u8; 32];
        s[..8].copy_from_slice(&seed.to_le_bytes());
        Self::from_seed(s)
    }

    pub fn from_entropy() -> Self {
        Self::from_seed(rand::random())
    }

    pub fn seed(&self) -> [u8; 32] {
        self.seed
    }

    /// A fresh independent stream keyed from this one.
    pub fn fork(&mut self) -> Rng {
        let mut s = [0u8; 32];
        self.inner.fill_bytes(&mut s);
        Rng::from_seed(s)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn fill_bytes(&mut self, out: &mut [u8]) {
        self.inner.fill_bytes(out)
    }

    pub fn uniform_f64(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn below(&mut self, bound: u64) -> u64 {
        self.inner.gen_range(0..bound)
    }

    pub fn inner(&mut self) -> &mut ChaCha20Rng {
        &mut self.inner
    }
}

/// Rejection sampling below `m`.
pub fn sample_uniform(m: &Modulus, rng: &mut Rng) -> u64 {
    let q = m.value();
    let bits = m.bit_len();
    let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
    loop {
        let x = rng.next_u64() & mask;
        if x < q {
            return x;
        }
    }
}

pub fn sample_ternary(rng: &mut Rng) -> i8 {
    loop {
        // 2 bits give 4 outcomes, reject one
        let x = rng.next_u64();
        for k in 0..32 {
            let v = (x >> (2 * k)) & 3;
            if v < 3 {
                return v as i8 - 1;
            }
        }
    }
}

pub fn sample_error(rng: &mut Rng) -> i64 {
    let x = rng.next_u64();
    let a = (x & ((1 << CBD_ETA) - 1)).count_ones() as i64;
    let b = ((x >> CBD_ETA) & ((1 << CBD_ETA) - 1)).count_ones() as i64;
    a - b
}

pub fn sample_ternary_vec(n: usize, rng: &mut Rng) -> Vec<i8> {
    (0..n).map(|_| sample_ternary(rng)).collect()
}

pub fn sample_error_vec(n: usize, rng: &mut Rng) -> Vec<i64> {
    (0..n).map(|_| sample_error(rng)).collect()
}
