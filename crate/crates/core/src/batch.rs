//! Integer plaintexts for BFV and BGV: batched slots (a 2 x n/2 matrix
//! under the plaintext NTT) or raw coefficients mod `t`.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::ToPrimitive;

use crate::ciphertext::Plaintext;
use crate::context::{Context, Scheme};
use crate::error::{Error, Result};
use crate::poly::cdata::{CData, Domain};

fn check_int(ctx: &Context) -> Result<Scheme> {
    match ctx.scheme() {
        Scheme::Ckks => Err(Error::Config("integer encoding on a CKKS context".into())),
        s => Ok(s),
    }
}

fn plaintext_from(ctx: &Context, coeffs: Vec<u64>, batched: bool) -> Result<Plaintext> {
    let scheme = check_int(ctx)?;
    let n = ctx.n();
    let mut data = CData::new(ctx.pool(), 1, 1, n)?;
    data.row_mut(0, 0).copy_from_slice(&coeffs);
    data.set_all_domains(Domain::Coefficient);
    Ok(Plaintext::new(data, 1.0, scheme, batched))
}

/// Packs up to `n` values (each reduced mod `t`) into slots. Value `k` goes
/// to row `k / (n/2)`, column `k % (n/2)`.
pub fn batch_encode(ctx: &Context, values: &[u64]) -> Result<Plaintext> {
    check_int(ctx)?;
    let plain = ctx.plain()?;
    let tables = plain
        .tables()
        .ok_or_else(|| Error::Config(format!("t = {} does not support batching", plain.modulus().value())))?;
    let n = ctx.n();
    if values.len() > n {
        return Err(Error::Parameter(format!("{} values for {n} slots", values.len())));
    }
    let t = plain.modulus();
    let mut v = vec![0u64; n];
    for (k, &x) in values.iter().enumerate() {
        v[plain.slot_index()[k]] = t.reduce(x);
    }
    tables.inverse_bm(&mut v)?;
    plaintext_from(ctx, v, true)
}

/// Signed convenience form of [`batch_encode`].
pub fn batch_encode_signed(ctx: &Context, values: &[i64]) -> Result<Plaintext> {
    let t = *ctx.plain()?.modulus();
    let v: Vec<u64> = values.iter().map(|&x| t.reduce_i64(x)).collect();
    batch_encode(ctx, &v)
}

pub fn batch_decode(ctx: &Context, pt: &Plaintext) -> Result<Vec<u64>> {
    check_int(ctx)?;
    let plain = ctx.plain()?;
    let tables = plain.tables().ok_or_else(|| Error::Config("batching disabled".into()))?;
    let mut v = pt.coeffs().to_vec();
    tables.forward_bm(&mut v)?;
    Ok(plain.slot_index().iter().map(|&i| v[i]).collect())
}

/// Slot values centered into `(-t/2, t/2]`.
pub fn batch_decode_signed(ctx: &Context, pt: &Plaintext) -> Result<Vec<i64>> {
    let t = *ctx.plain()?.modulus();
    Ok(batch_decode(ctx, pt)?.into_iter().map(|x| t.center(x)).collect())
}

/// Coefficient `i` of the plaintext polynomial is `values[i] mod t`.
pub fn encode_coeffs(ctx: &Context, values: &[u64]) -> Result<Plaintext> {
    check_int(ctx)?;
    let n = ctx.n();
    if values.len() > n {
        return Err(Error::Parameter(format!("{} coefficients for degree {n}", values.len())));
    }
    let t = *ctx.plain()?.modulus();
    let mut v = vec![0u64; n];
    for (d, &x) in v.iter_mut().zip(values) {
        *d = t.reduce(x);
    }
    plaintext_from(ctx, v, false)
}

pub fn decode_coeffs(ctx: &Context, pt: &Plaintext) -> Result<Vec<u64>> {
    check_int(ctx)?;
    Ok(pt.coeffs().to_vec())
}

pub(crate) fn plaintext_from_coeffs(ctx: &Context, coeffs: Vec<u64>, batched: bool) -> Result<Plaintext> {
    plaintext_from(ctx, coeffs, batched)
}

/// Evaluation form over the first `level` moduli of the plaintext
/// coefficients, centered mod `t` and multiplied by `factor` mod `t` first.
pub(crate) fn lift_centered(ctx: &Context, coeffs: &[u64], factor: u64, level: usize) -> Result<CData> {
    let t = *ctx.plain()?.modulus();
    let f = t.reduce(factor);
    let signed: Vec<i64> = coeffs.iter().map(|&x| t.center(t.mul(x, f))).collect();
    let n = ctx.n();
    let mut out = CData::new_uninit(ctx.pool(), 1, level, n)?;
    let tasks: Vec<_> = out.rows_mut().collect();
    ctx.lanes().par_for_each_modulus(tasks, |j, row| {
        let table = &ctx.q_tables()[j];
        let q = table.modulus();
        for (r, &x) in row.iter_mut().zip(&signed) {
            *r = q.reduce_i64(x);
        }
        ctx.ntt(row, table);
    });
    out.set_all_domains(Domain::Evaluation);
    Ok(out)
}

/// Coefficient-domain CRT reconstruction of a one-polynomial evaluation
/// form, centered, split into lane-sized chunks.
pub(crate) fn reconstruct_centered(ctx: &Context, eval: &CData) -> Result<Vec<BigInt>> {
    let mut data = eval.try_clone()?;
    let level = data.size_modulus();
    if data.domain(0) == Domain::Evaluation {
        let tasks: Vec<_> = data.rows_mut().collect();
        ctx.lanes().par_for_each_modulus(tasks, |j, row| {
            ctx.intt(row, &ctx.q_tables()[j]);
        });
    }
    let n = ctx.n();
    let base = ctx.level_base(level);
    let lanes = ctx.lanes().lanes();
    let per = n.div_ceil(lanes);
    let out = ctx.lanes().par_map(lanes, |chunk| {
        let (lo, hi) = (chunk * per, ((chunk + 1) * per).min(n));
        let mut residues = vec![0u64; level];
        (lo..hi)
            .map(|i| {
                for (j, r) in residues.iter_mut().enumerate() {
                    *r = data.row(0, j)[i];
                }
                base.reconstruct_centered(&residues)
            })
            .collect::<Vec<_>>()
    });
    Ok(out.concat())
}

pub(crate) fn big_mod_t(x: &BigInt, t: u64) -> u64 {
    let r = (x % BigInt::from(t)).to_i64().unwrap_or(0);
    if r < 0 {
        (r + t as i64) as u64
    } else {
        r as u64
    }
}

/// `log2 |x|`, or negative infinity for zero.
pub(crate) fn log2_abs(x: &BigInt) -> f64 {
    if x.sign() == Sign::NoSign {
        return f64::NEG_INFINITY;
    }
    let m = x.magnitude();
    let bits = m.bits();
    if bits <= 64 {
        return (m.to_u64().unwrap_or(1) as f64).log2();
    }
    let shift = bits - 64;
    let top: BigUint = m >> shift;
    (top.to_u64().unwrap_or(1) as f64).log2() + shift as f64
}
