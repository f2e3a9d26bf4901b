use crate::error::{Error, Result};
use crate::math::modulus::Modulus;

fn mul_u128(a: u64, b: u64, m: u64) -> u64 {
    (a as u128 * b as u128 % m as u128) as u64
}

fn pow_u128(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_u128(acc, b, m);
        }
        b = mul_u128(b, b, m);
        e >>= 1;
    }
    acc
}

/// One Miller-Rabin round with witness `a`.
pub fn miller_rabin_round(n: u64, a: u64) -> bool {
    let a = a % n;
    if a == 0 {
        return true;
    }
    let mut d = n - 1;
    let s = d.trailing_zeros();
    d >>= s;
    let mut x = pow_u128(a, d, n);
    if x == 1 || x == n - 1 {
        return true;
    }
    for _ in 1..s {
        x = mul_u128(x, x, n);
        if x == n - 1 {
            return true;
        }
    }
    false
}

/// Deterministic for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for p in WITNESSES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    WITNESSES.iter().all(|&a| miller_rabin_round(n, a))
}

const MAX_PRIME_ATTEMPTS: usize = 1 << 20;

/// Largest prime `q ≡ 1 (mod 2n)` with exactly `bits` bits, not in `exclude`.
pub fn gen_ntt_prime(bits: u32, n: usize, exclude: &[u64]) -> Result<Modulus> {
    if !(33..=61).contains(&bits) {
        return Err(Error::Parameter(format!("prime size {bits} outside [33, 61]")));
    }
    if !n.is_power_of_two() {
        return Err(Error::Parameter(format!("degree {n} is not a power of two")));
    }
    let step = 2 * n as u64;
    let lower = 1u64 << (bits - 1);
    let mut cand = ((1u64 << bits) - 1) / step * step + 1;
    if cand >= 1u64 << bits {
        cand -= step;
    }
    for _ in 0..MAX_PRIME_ATTEMPTS {
        if cand < lower {
            break;
        }
        if !exclude.contains(&cand) && is_prime(cand) {
            return Modulus::prime(cand);
        }
        cand -= step;
    }
    Err(Error::Parameter(format!("no {bits}-bit prime = 1 mod {step} found")))
}

/// `count` distinct NTT primes of one size, skipping `exclude`.
pub fn gen_ntt_primes(bits: u32, n: usize, count: usize, exclude: &[u64]) -> Result<Vec<Modulus>> {
    let mut taken = exclude.to_vec();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let q = gen_ntt_prime(bits, n, &taken)?;
        taken.push(q.value());
        out.push(q);
    }
    Ok(out)
}

/// A primitive `order`-th root of unity mod prime `q`; `order` a power of two.
pub fn find_primitive_root(q: &Modulus, order: u64) -> Result<u64> {
    let qv = q.value();
    if order < 2 || !order.is_power_of_two() || !(qv - 1).is_multiple_of(order) {
        return Err(Error::Parameter(format!("no {order}-th roots of unity mod {qv}")));
    }
    let cofactor = (qv - 1) / order;
    for x in 2..qv.min(1 << 16) {
        let r = q.pow(x, cofactor);
        if q.pow(r, order / 2) == qv - 1 {
            return Ok(r);
        }
    }
    Err(Error::Parameter(format!("root search exhausted mod {qv}")))
}
