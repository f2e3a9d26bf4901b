//! Ring automorphisms `X -> X^g` for odd `g`.

use crate::error::{Error, Result};
use crate::math::modulus::Modulus;
use crate::math::ntt::bit_reverse;
use crate::poly::cdata::{CData, Domain};

/// Slot-rotation generator.
pub const ROTATION_GENERATOR: u64 = 5;

/// `5^k mod 2n`; negative steps rotate right.
pub fn galois_element_for_step(step: i64, n: usize) -> u64 {
    let two_n = 2 * n as u64;
    let half = (n / 2) as i64;
    let k = step.rem_euclid(half) as u64;
    let m = Modulus::new(two_n).expect("2n >= 4");
    m.pow(ROTATION_GENERATOR, k)
}

pub fn conjugation_element(n: usize) -> u64 {
    2 * n as u64 - 1
}

/// `perm[j]` is the source index of evaluation slot `j`.
pub fn eval_permutation(n: usize, g: u64) -> Result<Vec<usize>> {
    let two_n = 2 * n as u64;
    if g.is_multiple_of(2) || g >= two_n {
        return Err(Error::Parameter(format!("galois element {g} not odd below {two_n}")));
    }
    let log_n = n.trailing_zeros();
    Ok((0..n)
        .map(|j| {
            let e = 2 * bit_reverse(j, log_n) as u64 + 1;
            let f = (g * e) % two_n;
            bit_reverse(((f - 1) / 2) as usize, log_n)
        })
        .collect())
}

/// Automorphism of a coefficient-domain residue row.
pub fn apply_coeff_row(src: &[u64], dst: &mut [u64], g: u64, q: &Modulus) {
    let n = src.len();
    let two_n = 2 * n as u64;
    for (i, &c) in src.iter().enumerate() {
        let k = (i as u64 * g) % two_n;
        if k < n as u64 {
            dst[k as usize] = c;
        } else {
            dst[(k - n as u64) as usize] = q.neg(c);
        }
    }
}

pub fn apply_eval_row(src: &[u64], dst: &mut [u64], perm: &[usize]) {
    for (d, &p) in dst.iter_mut().zip(perm) {
        *d = src[p];
    }
}

/// Applies the automorphism to every evaluation-domain polynomial.
pub fn apply_eval(a: &CData, out: &mut CData, perm: &[usize]) -> Result<()> {
    a.check_domain(Domain::Evaluation)?;
    if out.shape() != a.shape() {
        out.resize(a.size_poly(), a.size_modulus())?;
    }
    out.set_all_domains(Domain::Evaluation);
    for (o, x) in out.rows_mut().zip(a.rows()) {
        apply_eval_row(x, o, perm);
    }
    Ok(())
}
