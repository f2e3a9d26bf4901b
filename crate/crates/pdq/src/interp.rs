//! Interpolants over `p`-th roots of unity. A digit `d` is carried as
//! `omega^d`; any `f(a, b)` on digit pairs is `sum_{t,s} c_{t,s} z^t w^s`
//! with `c_{t,s} = p^-2 sum_{a,b} f(a, b) omega^{-at-bs}`.

use num_complex::Complex64;

use crate::error::{PdqError, Result};

/// `omega^e`, exact on the axes.
pub fn root(p: u64, e: i64) -> Complex64 {
    let e = e.rem_euclid(p as i64) as u64;
    if (4 * e).is_multiple_of(p) {
        return match 4 * e / p {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
    }
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * e as f64 / p as f64)
}

/// Coefficients of `EQ(z) = p^-1 sum_t z^t`, indexed by `t`.
pub fn eq_coeffs(p: u64) -> Vec<Complex64> {
    vec![Complex64::new(1.0 / p as f64, 0.0); p as usize]
}

/// `c[t][s]` for `f(a, b)`.
pub fn bivariate_coeffs(p: u64, f: impl Fn(u64, u64) -> bool) -> Vec<Vec<Complex64>> {
    let inv = 1.0 / (p * p) as f64;
    (0..p)
        .map(|t| {
            (0..p)
                .map(|s| {
                    let mut c = Complex64::new(0.0, 0.0);
                    for a in 0..p {
                        for b in 0..p {
                            if f(a, b) {
                                c += root(p, -((a * t + b * s) as i64));
                            }
                        }
                    }
                    c * inv
                })
                .collect()
        })
        .collect()
}

pub fn lt_coeffs(p: u64) -> Vec<Vec<Complex64>> {
    bivariate_coeffs(p, |a, b| a < b)
}

pub fn eval_univariate(c: &[Complex64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &ci| acc * z + ci)
}

pub fn eval_bivariate(c: &[Vec<Complex64>], z: Complex64, w: Complex64) -> Complex64 {
    let rows: Vec<Complex64> = c.iter().map(|row| eval_univariate(row, w)).collect();
    eval_univariate(&rows, z)
}

/// Checks both interpolants on every digit pair.
pub fn verify(p: u64) -> Result<()> {
    let eq = eq_coeffs(p);
    let lt = lt_coeffs(p);
    for a in 0..p {
        for b in 0..p {
            let z = root(p, a as i64 - b as i64);
            let e = eval_univariate(&eq, z);
            let l = eval_bivariate(&lt, root(p, a as i64), root(p, b as i64));
            let (want_e, want_l) = ((a == b) as u8 as f64, (a < b) as u8 as f64);
            if (e - want_e).norm() > 1e-9 || (l - want_l).norm() > 1e-9 {
                return Err(PdqError::Config(format!("interpolant mismatch at digits ({a}, {b})")));
            }
        }
    }
    Ok(())
}
