//! Integer arithmetic mod `t` with the message in the low bits: the phase is
//! `m * c + t * e` for a correction factor `c` that starts at 1 and picks up
//! `q_last^{-1} mod t` at every modulus switch.

use num_bigint::BigInt;

use crate::batch::{big_mod_t, lift_centered, log2_abs, plaintext_from_coeffs, reconstruct_centered};
use crate::ciphertext::{self as rlwe, Ciphertext, Plaintext};
use crate::context::{Context, Scheme};
use crate::error::{Error, Result};
use crate::keys::{decrypt_raw, encrypt_zero_pk, encrypt_zero_sk, rescale_cdata, GaloisKeys, PublicKey, RelinKey, Rounding, SecretKey};
use crate::math::modulus::Modulus;
use crate::math::sampling::Rng;
use crate::poly::cdata::CData;

pub type BgvCiphertext = Ciphertext;

fn check_bgv(ctx: &Context) -> Result<()> {
    if ctx.scheme() != Scheme::Bgv {
        return Err(Error::Config(format!("BGV operation on a {:?} context", ctx.scheme())));
    }
    Ok(())
}

fn check_plain(ctx: &Context, pt: &Plaintext) -> Result<()> {
    if pt.scheme() != Scheme::Bgv || pt.data().n() != ctx.n() {
        return Err(Error::Config("plaintext does not belong to this BGV context".into()));
    }
    Ok(())
}

fn t_modulus(ctx: &Context) -> Result<Modulus> {
    Ok(*ctx.plain()?.modulus())
}

fn add_into_c0(ctx: &Context, data: &mut CData, m: &CData, subtract: bool) {
    let n = ctx.n();
    let tasks: Vec<_> = data.poly_mut(0).chunks_mut(n).collect();
    ctx.lanes().par_for_each_modulus(tasks, |j, row| {
        let q = ctx.moduli()[j];
        for (x, &y) in row.iter_mut().zip(m.row(0, j)) {
            *x = if subtract { q.sub(*x, y) } else { q.add(*x, y) };
        }
    });
}

/// Encrypts at `level` (1..=L).
pub fn encrypt_at(ctx: &Context, pt: &Plaintext, pk: &PublicKey, level: usize, rng: &mut Rng) -> Result<Ciphertext> {
    check_bgv(ctx)?;
    check_plain(ctx, pt)?;
    check_level_arg(ctx, level)?;
    let mut data = encrypt_zero_pk(ctx, pk, level, rng)?;
    add_into_c0(ctx, &mut data, &lift_centered(ctx, pt.coeffs(), 1, level)?, false);
    Ok(Ciphertext::new(data, 1.0, 1, Scheme::Bgv))
}

fn check_level_arg(ctx: &Context, level: usize) -> Result<()> {
    if level == 0 || level > ctx.max_level() {
        return Err(Error::Level(format!("level {level} outside 1..={}", ctx.max_level())));
    }
    Ok(())
}

pub fn encrypt(ctx: &Context, pt: &Plaintext, pk: &PublicKey, rng: &mut Rng) -> Result<Ciphertext> {
    encrypt_at(ctx, pt, pk, ctx.max_level(), rng)
}

pub fn encrypt_sk(ctx: &Context, pt: &Plaintext, sk: &SecretKey, rng: &mut Rng) -> Result<Ciphertext> {
    check_bgv(ctx)?;
    check_plain(ctx, pt)?;
    let level = ctx.max_level();
    let mut data = encrypt_zero_sk(ctx, sk, level, rng)?;
    add_into_c0(ctx, &mut data, &lift_centered(ctx, pt.coeffs(), 1, level)?, false);
    Ok(Ciphertext::new(data, 1.0, 1, Scheme::Bgv))
}

pub fn decrypt(ctx: &Context, ct: &Ciphertext, sk: &SecretKey) -> Result<Plaintext> {
    check_bgv(ctx)?;
    let t = t_modulus(ctx)?;
    let phase = reconstruct_centered(ctx, &decrypt_raw(ctx, &ct.data, sk)?)?;
    let corr_inv = t.inv(ct.correction)?;
    let coeffs = phase.iter().map(|x| t.mul(big_mod_t(x, t.value()), corr_inv)).collect();
    plaintext_from_coeffs(ctx, coeffs, true)
}

/// Bits of headroom left: `log2(Q_l / 2) - log2 |phase|`, floored at zero.
pub fn noise_budget(ctx: &Context, ct: &Ciphertext, sk: &SecretKey) -> Result<f64> {
    check_bgv(ctx)?;
    let phase = reconstruct_centered(ctx, &decrypt_raw(ctx, &ct.data, sk)?)?;
    let q = BigInt::from(ctx.level_base(ct.level()).big_q().clone());
    let worst = phase.iter().map(log2_abs).fold(f64::NEG_INFINITY, f64::max);
    Ok((log2_abs(&q) - 1.0 - worst.max(0.0)).max(0.0))
}

/// Brings `b` to `a`'s correction factor.
fn align(ctx: &Context, a: &Ciphertext, b: &Ciphertext) -> Result<Option<Ciphertext>> {
    if a.correction == b.correction {
        return Ok(None);
    }
    let t = t_modulus(ctx)?;
    let k = t.mul(a.correction, t.inv(b.correction)?);
    let scalars: Vec<u64> = ctx.moduli()[..b.level()].iter().map(|q| q.reduce(k)).collect();
    let mut out = rlwe::mul_scalars(ctx, b, &scalars)?;
    out.correction = a.correction;
    Ok(Some(out))
}

fn add_sub(ctx: &Context, a: &Ciphertext, b: &Ciphertext, subtract: bool) -> Result<Ciphertext> {
    check_bgv(ctx)?;
    rlwe::check_level(a, b)?;
    match align(ctx, a, b)? {
        Some(b2) => rlwe::add_sub(ctx, a, &b2, subtract),
        None => rlwe::add_sub(ctx, a, b, subtract),
    }
}

pub fn add(ctx: &Context, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    add_sub(ctx, a, b, false)
}

pub fn sub(ctx: &Context, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    add_sub(ctx, a, b, true)
}

pub fn negate(ctx: &Context, a: &Ciphertext) -> Result<Ciphertext> {
    check_bgv(ctx)?;
    rlwe::negate(ctx, a)
}

pub fn add_plain(ctx: &Context, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
    check_bgv(ctx)?;
    check_plain(ctx, pt)?;
    let mut out = a.try_clone()?;
    add_into_c0(ctx, &mut out.data, &lift_centered(ctx, pt.coeffs(), a.correction, a.level())?, false);
    Ok(out)
}

pub fn sub_plain(ctx: &Context, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
    check_bgv(ctx)?;
    check_plain(ctx, pt)?;
    let mut out = a.try_clone()?;
    add_into_c0(ctx, &mut out.data, &lift_centered(ctx, pt.coeffs(), a.correction, a.level())?, true);
    Ok(out)
}

pub fn multiply_plain(ctx: &Context, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
    check_bgv(ctx)?;
    check_plain(ctx, pt)?;
    let m = lift_centered(ctx, pt.coeffs(), 1, a.level())?;
    rlwe::mul_plain_eval(ctx, a, &m)
}

pub fn multiply(ctx: &Context, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    check_bgv(ctx)?;
    rlwe::check_level(a, b)?;
    let t = t_modulus(ctx)?;
    let data = rlwe::tensor(ctx, &a.data, &b.data, true)?;
    Ok(Ciphertext::new(data, 1.0, t.mul(a.correction, b.correction), Scheme::Bgv))
}

pub fn square(ctx: &Context, a: &Ciphertext) -> Result<Ciphertext> {
    check_bgv(ctx)?;
    let t = t_modulus(ctx)?;
    let data = rlwe::square(ctx, &a.data)?;
    Ok(Ciphertext::new(data, 1.0, t.mul(a.correction, a.correction), Scheme::Bgv))
}

pub fn relinearize(ctx: &Context, ct: &Ciphertext, rlk: &RelinKey) -> Result<Ciphertext> {
    check_bgv(ctx)?;
    rlwe::relinearize(ctx, ct, rlk)
}

/// Divides by the last modulus, keeping the phase `≡ m * c (mod t)` for the
/// updated correction `c`.
pub fn mod_switch(ctx: &Context, ct: &Ciphertext) -> Result<Ciphertext> {
    check_bgv(ctx)?;
    let level = ct.level();
    if level < 2 {
        return Err(Error::Level("cannot switch below the last modulus".into()));
    }
    let t = t_modulus(ctx)?;
    let mut out = ct.try_clone()?;
    rescale_cdata(ctx, &mut out.data, Rounding::Congruent(t.value()))?;
    let last = ctx.moduli()[level - 1].value();
    out.correction = t.mul(ct.correction, t.inv(t.reduce(last))?);
    Ok(out)
}

pub fn mod_switch_to(ctx: &Context, ct: &Ciphertext, level: usize) -> Result<Ciphertext> {
    if level == 0 || level > ct.level() {
        return Err(Error::Level(format!("cannot switch from {} to {level}", ct.level())));
    }
    let mut out = ct.try_clone()?;
    while out.level() > level {
        out = mod_switch(ctx, &out)?;
    }
    Ok(out)
}

/// Multiply, relinearize and switch down one modulus.
pub fn multiply_relin_switch(ctx: &Context, a: &Ciphertext, b: &Ciphertext, rlk: &RelinKey) -> Result<Ciphertext> {
    mod_switch(ctx, &relinearize(ctx, &multiply(ctx, a, b)?, rlk)?)
}

pub fn rotate_rows(ctx: &Context, ct: &Ciphertext, step: i64, gk: &GaloisKeys) -> Result<Ciphertext> {
    check_bgv(ctx)?;
    if step.rem_euclid(ctx.slots() as i64) == 0 {
        return ct.try_clone();
    }
    rlwe::rotate_with(ctx, ct, ctx.galois_element(step), gk)
}

pub fn rotate_columns(ctx: &Context, ct: &Ciphertext, gk: &GaloisKeys) -> Result<Ciphertext> {
    check_bgv(ctx)?;
    rlwe::rotate_with(ctx, ct, ctx.conjugation_element(), gk)
}
