//! Approximate arithmetic over `n/2` complex slots.

pub mod encoder;
pub mod precise;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::ToPrimitive;

use crate::ciphertext::{self as rlwe, Ciphertext, Plaintext};
use crate::context::{Context, Scheme};
use crate::error::{Error, Result};
use crate::keys::{decrypt_raw, encrypt_zero_pk, encrypt_zero_sk, rescale_cdata, GaloisKeys, PublicKey, RelinKey, Rounding, SecretKey};
use crate::math::sampling::Rng;
use crate::poly::cdata::{CData, Domain};

pub type CkksCiphertext = Ciphertext;
pub type CkksPlaintext = Plaintext;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MulMode {
    #[default]
    Fused,
    Unfused,
}

/// Scales agree when their exponents differ by at most a few ulps.
pub fn scales_match(a: f64, b: f64) -> bool {
    let (la, lb) = (a.log2(), b.log2());
    (la - lb).abs() <= 4.0 * f64::EPSILON * la.abs().max(lb.abs()).max(1.0)
}

fn check_scale(a: f64, b: f64) -> Result<()> {
    if scales_match(a, b) {
        Ok(())
    } else {
        Err(Error::Scale(format!("2^{:.6} vs 2^{:.6}", a.log2(), b.log2())))
    }
}

fn check_ckks(ctx: &Context) -> Result<()> {
    if ctx.scheme() != Scheme::Ckks {
        return Err(Error::Config(format!("CKKS operation on a {:?} context", ctx.scheme())));
    }
    Ok(())
}

fn check_level_arg(ctx: &Context, level: usize) -> Result<()> {
    if level == 0 || level > ctx.max_level() {
        return Err(Error::Level(format!("level {level} outside 1..={}", ctx.max_level())));
    }
    Ok(())
}

/// Writes rounded integer coefficients into evaluation rows at `level`.
fn coeffs_to_plaintext(ctx: &Context, coeffs: &[f64], scale: f64, level: usize) -> Result<Plaintext> {
    let log_q: f64 = ctx.moduli()[..level].iter().map(|q| (q.value() as f64).log2()).sum();
    let limit = (log_q - 1.0).min(126.0);
    let mut ints = Vec::with_capacity(coeffs.len());
    for &c in coeffs {
        let r = c.round();
        if !r.is_finite() || (r != 0.0 && r.abs().log2() >= limit) {
            return Err(Error::EncodeRange(format!(
                "coefficient {c:.3e} exceeds 2^{limit:.1} at level {level}"
            )));
        }
        ints.push(r as i128);
    }
    ints_to_plaintext(ctx, &ints, scale, level)
}

fn ints_to_plaintext(ctx: &Context, ints: &[i128], scale: f64, level: usize) -> Result<Plaintext> {
    let n = ctx.n();
    let mut data = CData::new_uninit(ctx.pool(), 1, level, n)?;
    let tasks: Vec<_> = data.rows_mut().collect();
    ctx.lanes().par_for_each_modulus(tasks, |j, row| {
        let t = &ctx.q_tables()[j];
        let q = t.modulus();
        let qv = q.value() as u128;
        for (r, &x) in row.iter_mut().zip(ints) {
            let m = (x.unsigned_abs() % qv) as u64;
            *r = if x < 0 { q.neg(m) } else { m };
        }
        ctx.ntt(row, t);
    });
    data.set_all_domains(Domain::Evaluation);
    Ok(Plaintext::new(data, scale, Scheme::Ckks, true))
}

pub fn encode(ctx: &Context, values: &[Complex64], scale: f64, level: usize) -> Result<Plaintext> {
    check_ckks(ctx)?;
    check_level_arg(ctx, level)?;
    let fft = ctx.fft()?;
    let slots = fft.slots();
    if values.len() > slots {
        return Err(Error::Parameter(format!("{} values for {slots} slots", values.len())));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Scale(format!("scale {scale}")));
    }
    let mut w = vec![Complex64::new(0.0, 0.0); slots];
    w[..values.len()].copy_from_slice(values);
    fft.inverse(&mut w);
    let n = ctx.n();
    let mut coeffs = vec![0f64; n];
    for (i, z) in w.iter().enumerate() {
        coeffs[i] = z.re * scale;
        coeffs[i + slots] = z.im * scale;
    }
    coeffs_to_plaintext(ctx, &coeffs, scale, level)
}

pub fn encode_real(ctx: &Context, values: &[f64], scale: f64, level: usize) -> Result<Plaintext> {
    let v: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    encode(ctx, &v, scale, level)
}

/// The same value in every slot: `scale * (re + im X^{n/2})`.
pub fn encode_constant(ctx: &Context, value: Complex64, scale: f64, level: usize) -> Result<Plaintext> {
    check_ckks(ctx)?;
    check_level_arg(ctx, level)?;
    let n = ctx.n();
    let mut coeffs = vec![0f64; n];
    coeffs[0] = value.re * scale;
    coeffs[n / 2] = value.im * scale;
    coeffs_to_plaintext(ctx, &coeffs, scale, level)
}

/// Signed integer coefficients of a plaintext at its level.
fn plaintext_big_coeffs(ctx: &Context, pt: &Plaintext) -> Result<Vec<BigInt>> {
    let mut data = pt.data.try_clone()?;
    let level = data.size_modulus();
    if data.domain(0) == Domain::Evaluation {
        let tasks: Vec<_> = data.rows_mut().collect();
        ctx.lanes().par_for_each_modulus(tasks, |j, row| {
            ctx.intt(row, &ctx.q_tables()[j]);
        });
    }
    let n = ctx.n();
    if level == 1 {
        let q = ctx.moduli()[0];
        return Ok(data.row(0, 0).iter().map(|&x| BigInt::from(q.center(x))).collect());
    }
    let base = ctx.level_base(level);
    let out = ctx.lanes().par_map(ctx.lanes().lanes(), |chunk| {
        let lanes = ctx.lanes().lanes();
        let per = n.div_ceil(lanes);
        let (lo, hi) = (chunk * per, ((chunk + 1) * per).min(n));
        let mut res = Vec::with_capacity(hi.saturating_sub(lo));
        let mut residues = vec![0u64; level];
        for i in lo..hi {
            for (j, r) in residues.iter_mut().enumerate() {
                *r = data.row(0, j)[i];
            }
            res.push(base.reconstruct_centered(&residues));
        }
        res
    });
    Ok(out.concat())
}

fn plaintext_coeffs(ctx: &Context, pt: &Plaintext) -> Result<Vec<f64>> {
    Ok(plaintext_big_coeffs(ctx, pt)?.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect())
}

/// Like [`encode`], but with a double-double transform, so slots far below
/// the largest one keep their relative precision.
pub fn encode_precise(ctx: &Context, values: &[Complex64], scale: f64, level: usize) -> Result<Plaintext> {
    check_ckks(ctx)?;
    check_level_arg(ctx, level)?;
    let fft = ctx.precise_fft()?;
    if values.len() > fft.slots() {
        return Err(Error::Parameter(format!("{} values for {} slots", values.len(), fft.slots())));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Scale(format!("scale {scale}")));
    }
    let peak = values.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max);
    let log_q: f64 = ctx.moduli()[..level].iter().map(|q| (q.value() as f64).log2()).sum();
    let limit = (log_q - 1.0).min(125.0);
    if !peak.is_finite() || (peak > 0.0 && (peak * scale).log2() >= limit) {
        return Err(Error::EncodeRange(format!("slot magnitude {peak:.3e} at scale 2^{:.1}", scale.log2())));
    }
    let ints = fft.encode(values, scale);
    ints_to_plaintext(ctx, &ints, scale, level)
}

pub fn encode_real_precise(ctx: &Context, values: &[f64], scale: f64, level: usize) -> Result<Plaintext> {
    let v: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    encode_precise(ctx, &v, scale, level)
}

pub fn decode_precise(ctx: &Context, pt: &Plaintext) -> Result<Vec<Complex64>> {
    check_ckks(ctx)?;
    let fft = ctx.precise_fft()?;
    Ok(fft.decode(&plaintext_big_coeffs(ctx, pt)?, pt.scale))
}

pub fn decode_real_precise(ctx: &Context, pt: &Plaintext) -> Result<Vec<f64>> {
    Ok(decode_precise(ctx, pt)?.into_iter().map(|z| z.re).collect())
}

pub fn decode(ctx: &Context, pt: &Plaintext) -> Result<Vec<Complex64>> {
    check_ckks(ctx)?;
    let fft = ctx.fft()?;
    let slots = fft.slots();
    let coeffs = plaintext_coeffs(ctx, pt)?;
    let inv = 1.0 / pt.scale;
    let mut w: Vec<Complex64> = (0..slots)
        .map(|i| Complex64::new(coeffs[i] * inv, coeffs[i + slots] * inv))
        .collect();
    fft.forward(&mut w);
    Ok(w)
}

pub fn decode_real(ctx: &Context, pt: &Plaintext) -> Result<Vec<f64>> {
    Ok(decode(ctx, pt)?.into_iter().map(|z| z.re).collect())
}

fn add_plain_data(ctx: &Context, c0: &mut CData, pt: &CData, subtract: bool) {
    let n = ctx.n();
    let tasks: Vec<_> = c0.poly_mut(0).chunks_mut(n).collect();
    ctx.lanes().par_for_each_modulus(tasks, |j, row| {
        let q = ctx.moduli()[j];
        for (x, &y) in row.iter_mut().zip(pt.row(0, j)) {
            *x = if subtract { q.sub(*x, y) } else { q.add(*x, y) };
        }
    });
}

pub fn encrypt(ctx: &Context, pt: &Plaintext, pk: &PublicKey, rng: &mut Rng) -> Result<Ciphertext> {
    check_ckks(ctx)?;
    let mut data = encrypt_zero_pk(ctx, pk, pt.level(), rng)?;
    add_plain_data(ctx, &mut data, &pt.data, false);
    Ok(Ciphertext::new(data, pt.scale, 1, Scheme::Ckks))
}

pub fn encrypt_sk(ctx: &Context, pt: &Plaintext, sk: &SecretKey, rng: &mut Rng) -> Result<Ciphertext> {
    check_ckks(ctx)?;
    let mut data = encrypt_zero_sk(ctx, sk, pt.level(), rng)?;
    add_plain_data(ctx, &mut data, &pt.data, false);
    Ok(Ciphertext::new(data, pt.scale, 1, Scheme::Ckks))
}

pub fn decrypt(ctx: &Context, ct: &Ciphertext, sk: &SecretKey) -> Result<Plaintext> {
    check_ckks(ctx)?;
    let data = decrypt_raw(ctx, &ct.data, sk)?;
    Ok(Plaintext::new(data, ct.scale, Scheme::Ckks, true))
}

pub fn add(ctx: &Context, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    check_scale(a.scale, b.scale)?;
    rlwe::add_sub(ctx, a, b, false)
}

pub fn sub(ctx: &Context, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    check_scale(a.scale, b.scale)?;
    rlwe::add_sub(ctx, a, b, true)
}

pub fn negate(ctx: &Context, a: &Ciphertext) -> Result<Ciphertext> {
    rlwe::negate(ctx, a)
}

fn check_plain(ct: &Ciphertext, pt: &Plaintext) -> Result<()> {
    if pt.level() != ct.level() {
        return Err(Error::Level(format!("plaintext level {} vs ciphertext level {}", pt.level(), ct.level())));
    }
    Ok(())
}

pub fn add_plain(ctx: &Context, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
    check_plain(a, pt)?;
    check_scale(a.scale, pt.scale)?;
    let mut out = a.try_clone()?;
    add_plain_data(ctx, &mut out.data, &pt.data, false);
    Ok(out)
}

pub fn sub_plain(ctx: &Context, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
    check_plain(a, pt)?;
    check_scale(a.scale, pt.scale)?;
    let mut out = a.try_clone()?;
    add_plain_data(ctx, &mut out.data, &pt.data, true);
    Ok(out)
}

pub fn multiply_plain(ctx: &Context, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
    check_plain(a, pt)?;
    let mut out = rlwe::mul_plain_eval(ctx, a, &pt.data)?;
    out.scale = a.scale * pt.scale;
    Ok(out)
}

/// Three-component product; scale is the product of scales.
pub fn multiply(ctx: &Context, a: &Ciphertext, b: &Ciphertext, mode: MulMode) -> Result<Ciphertext> {
    check_ckks(ctx)?;
    rlwe::check_level(a, b)?;
    let data = rlwe::tensor(ctx, &a.data, &b.data, mode == MulMode::Fused)?;
    Ok(Ciphertext::new(data, a.scale * b.scale, 1, Scheme::Ckks))
}

pub fn square(ctx: &Context, a: &Ciphertext) -> Result<Ciphertext> {
    check_ckks(ctx)?;
    let data = rlwe::square(ctx, &a.data)?;
    Ok(Ciphertext::new(data, a.scale * a.scale, 1, Scheme::Ckks))
}

pub fn relinearize(ctx: &Context, ct: &Ciphertext, rlk: &RelinKey) -> Result<Ciphertext> {
    rlwe::relinearize(ctx, ct, rlk)
}

/// Divides by the last modulus and drops it.
pub fn rescale(ctx: &Context, ct: &Ciphertext) -> Result<Ciphertext> {
    let level = ct.level();
    if level < 2 {
        return Err(Error::Level("cannot rescale at the last level".into()));
    }
    let mut out = ct.try_clone()?;
    rescale_cdata(ctx, &mut out.data, Rounding::Nearest)?;
    out.scale = ct.scale / ctx.moduli()[level - 1].value() as f64;
    Ok(out)
}

/// Drops moduli down to `level` without changing the scale.
pub fn mod_drop_to(ct: &Ciphertext, level: usize) -> Result<Ciphertext> {
    if level == 0 || level > ct.level() {
        return Err(Error::Level(format!("cannot drop from {} to {level}", ct.level())));
    }
    let mut out = ct.try_clone()?;
    out.data.truncate_moduli(level)?;
    Ok(out)
}

/// Multiply, relinearize and rescale.
pub fn multiply_relin_rescale(ctx: &Context, a: &Ciphertext, b: &Ciphertext, rlk: &RelinKey) -> Result<Ciphertext> {
    let m = multiply(ctx, a, b, MulMode::Fused)?;
    rescale(ctx, &relinearize(ctx, &m, rlk)?)
}

/// Rotates slots left by `step`.
pub fn rotate(ctx: &Context, ct: &Ciphertext, step: i64, gk: &GaloisKeys) -> Result<Ciphertext> {
    let slots = ctx.slots() as i64;
    if step.rem_euclid(slots) == 0 {
        return ct.try_clone();
    }
    rlwe::rotate_with(ctx, ct, ctx.galois_element(step), gk)
}

pub fn conjugate(ctx: &Context, ct: &Ciphertext, gk: &GaloisKeys) -> Result<Ciphertext> {
    rlwe::rotate_with(ctx, ct, ctx.conjugation_element(), gk)
}

/// Multiplies by a constant encoded at `scale`; the ciphertext scale grows by `scale`.
pub fn multiply_const(ctx: &Context, ct: &Ciphertext, value: Complex64, scale: f64) -> Result<Ciphertext> {
    let pt = encode_constant(ctx, value, scale, ct.level())?;
    multiply_plain(ctx, ct, &pt)
}

pub fn add_const(ctx: &Context, ct: &Ciphertext, value: Complex64) -> Result<Ciphertext> {
    let pt = encode_constant(ctx, value, ct.scale, ct.level())?;
    add_plain(ctx, ct, &pt)
}

/// Largest slot error of `ct` against `expected`, decrypting with `sk`.
pub fn max_error(ctx: &Context, ct: &Ciphertext, sk: &SecretKey, expected: &[Complex64]) -> Result<f64> {
    let got = decode(ctx, &decrypt(ctx, ct, sk)?)?;
    Ok(expected.iter().zip(&got).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
}
