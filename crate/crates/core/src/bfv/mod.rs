//! Scale-invariant integer arithmetic mod `t`. Messages sit in the high bits
//! as `floor(Q/t) * m`; products are rescaled by `t/Q` in full RNS.

pub mod behz;

use num_bigint::BigInt;
use num_integer::Integer;

use crate::batch::{big_mod_t, lift_centered, log2_abs, plaintext_from_coeffs, reconstruct_centered};
use crate::ciphertext::{self as rlwe, Ciphertext, Plaintext};
use crate::context::{Context, Scheme};
use crate::error::{Error, Result};
use crate::keys::{decrypt_raw, encrypt_zero_pk, encrypt_zero_sk, GaloisKeys, PublicKey, RelinKey, SecretKey};
use crate::math::modulus::Modulus;
use crate::math::sampling::Rng;
use crate::poly::cdata::{CData, Domain};

pub type BfvCiphertext = Ciphertext;

fn check_bfv(ctx: &Context) -> Result<()> {
    if ctx.scheme() != Scheme::Bfv {
        return Err(Error::Config(format!("BFV operation on a {:?} context", ctx.scheme())));
    }
    Ok(())
}

fn check_plain(ctx: &Context, pt: &Plaintext) -> Result<()> {
    if pt.scheme() != Scheme::Bfv || pt.data().n() != ctx.n() {
        return Err(Error::Config("plaintext does not belong to this BFV context".into()));
    }
    Ok(())
}

/// `floor(Q/t) * m` in evaluation form over the full chain.
fn scaled_message(ctx: &Context, pt: &Plaintext) -> Result<CData> {
    let plain = ctx.plain()?;
    let l = ctx.max_level();
    let n = ctx.n();
    let m = pt.coeffs();
    let mut out = CData::new_uninit(ctx.pool(), 1, l, n)?;
    let tasks: Vec<_> = out.rows_mut().collect();
    ctx.lanes().par_for_each_modulus(tasks, |j, row| {
        let table = &ctx.q_tables()[j];
        let q = table.modulus();
        let d = plain.delta()[j];
        let ds = q.shoup(d);
        for (r, &x) in row.iter_mut().zip(m) {
            *r = q.mul_shoup(q.reduce(x), d, ds);
        }
        ctx.ntt(row, table);
    });
    out.set_all_domains(Domain::Evaluation);
    Ok(out)
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

pub fn encrypt(ctx: &Context, pt: &Plaintext, pk: &PublicKey, rng: &mut Rng) -> Result<Ciphertext> {
    check_bfv(ctx)?;
    check_plain(ctx, pt)?;
    let mut data = encrypt_zero_pk(ctx, pk, ctx.max_level(), rng)?;
    add_into_c0(ctx, &mut data, &scaled_message(ctx, pt)?, false);
    Ok(Ciphertext::new(data, 1.0, 1, Scheme::Bfv))
}

pub fn encrypt_sk(ctx: &Context, pt: &Plaintext, sk: &SecretKey, rng: &mut Rng) -> Result<Ciphertext> {
    check_bfv(ctx)?;
    check_plain(ctx, pt)?;
    let mut data = encrypt_zero_sk(ctx, sk, ctx.max_level(), rng)?;
    add_into_c0(ctx, &mut data, &scaled_message(ctx, pt)?, false);
    Ok(Ciphertext::new(data, 1.0, 1, Scheme::Bfv))
}

/// `round(t x / Q) mod t` of the centered phase `x`.
pub fn decrypt(ctx: &Context, ct: &Ciphertext, sk: &SecretKey) -> Result<Plaintext> {
    check_bfv(ctx)?;
    let t = ctx.plain()?.modulus().value();
    let phase = reconstruct_centered(ctx, &decrypt_raw(ctx, &ct.data, sk)?)?;
    let q = BigInt::from(ctx.level_base(ct.level()).big_q().clone());
    let half = &q >> 1;
    let bt = BigInt::from(t);
    let coeffs = phase.iter().map(|x| {
        let y: BigInt = x * &bt + &half;
        big_mod_t(&y.div_floor(&q), t)
    }).collect();
    plaintext_from_coeffs(ctx, coeffs, true)
}

/// Bits of headroom left before decryption fails: `log2(Q/2) - log2 |[t x]_Q|`.
pub fn noise_budget(ctx: &Context, ct: &Ciphertext, sk: &SecretKey) -> Result<f64> {
    check_bfv(ctx)?;
    let t = ctx.plain()?.modulus().value();
    let phase = reconstruct_centered(ctx, &decrypt_raw(ctx, &ct.data, sk)?)?;
    let q = BigInt::from(ctx.level_base(ct.level()).big_q().clone());
    let half = &q >> 1;
    let bt = BigInt::from(t);
    let worst = phase
        .iter()
        .map(|x| {
            let mut v: BigInt = (x * &bt).mod_floor(&q);
            if v > half {
                v -= &q;
            }
            log2_abs(&v)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((log2_abs(&q) - 1.0 - worst.max(0.0)).max(0.0))
}

pub fn add(ctx: &Context, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    check_bfv(ctx)?;
    rlwe::add_sub(ctx, a, b, false)
}

pub fn sub(ctx: &Context, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    check_bfv(ctx)?;
    rlwe::add_sub(ctx, a, b, true)
}

pub fn negate(ctx: &Context, a: &Ciphertext) -> Result<Ciphertext> {
    check_bfv(ctx)?;
    rlwe::negate(ctx, a)
}

pub fn add_plain(ctx: &Context, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
    check_bfv(ctx)?;
    check_plain(ctx, pt)?;
    let mut out = a.try_clone()?;
    add_into_c0(ctx, &mut out.data, &scaled_message(ctx, pt)?, false);
    Ok(out)
}

pub fn sub_plain(ctx: &Context, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
    check_bfv(ctx)?;
    check_plain(ctx, pt)?;
    let mut out = a.try_clone()?;
    add_into_c0(ctx, &mut out.data, &scaled_message(ctx, pt)?, true);
    Ok(out)
}

pub fn multiply_plain(ctx: &Context, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
    check_bfv(ctx)?;
    check_plain(ctx, pt)?;
    let m = lift_centered(ctx, pt.coeffs(), 1, a.level())?;
    rlwe::mul_plain_eval(ctx, a, &m)
}

/// Coefficient rows of one polynomial lifted to `Bsk`, in evaluation form.
fn lift_poly(ctx: &Context, cd: &CData, p: usize) -> Result<Vec<u64>> {
    let behz = ctx.behz()?;
    let n = ctx.n();
    let l = cd.size_modulus();
    let mut coef: Vec<Vec<u64>> = (0..l).map(|j| cd.row(p, j).to_vec()).collect();
    for (j, row) in coef.iter_mut().enumerate() {
        ctx.intt(row, &ctx.q_tables()[j]);
    }
    let refs: Vec<&[u64]> = coef.iter().map(|r| r.as_slice()).collect();
    let mut lifted = behz.lift_to_bsk(&refs, n);
    for (b, row) in lifted.chunks_mut(n).enumerate() {
        ctx.ntt(row, &behz.bsk_tables()[b]);
    }
    Ok(lifted)
}

/// Tensor of two-component ciphertexts with `t/Q` rescaling, giving three
/// components over the chain.
fn behz_tensor(ctx: &Context, a: &CData, b: &CData) -> Result<CData> {
    let behz = ctx.behz()?;
    let n = ctx.n();
    let l = a.size_modulus();
    let nb = behz.bsk().len();
    let polys: Vec<(&CData, usize)> = vec![(a, 0), (a, 1), (b, 0), (b, 1)];
    let lifted: Vec<Vec<u64>> = ctx
        .lanes()
        .par_map(4, |k| lift_poly(ctx, polys[k].0, polys[k].1))
        .into_iter()
        .collect::<Result<_>>()?;
    let (a0b, a1b, b0b, b1b) = (&lifted[0], &lifted[1], &lifted[2], &lifted[3]);

    let prods = |p: usize, [x0, x1, y0, y1]: [u64; 4], m: &Modulus| -> u64 {
        match p {
            0 => m.mul(x0, y0),
            1 => m.add(m.mul(x0, y1), m.mul(x1, y0)),
            _ => m.mul(x1, y1),
        }
    };
    let parts: Vec<Result<Vec<u64>>> = ctx.lanes().par_map(3, |p| {
        let mut dq: Vec<Vec<u64>> = (0..l)
            .map(|j| {
                let m = ctx.moduli()[j];
                let mut row: Vec<u64> = (0..n)
                    .map(|k| prods(p, [a.row(0, j)[k], a.row(1, j)[k], b.row(0, j)[k], b.row(1, j)[k]], &m))
                    .collect();
                ctx.intt(&mut row, &ctx.q_tables()[j]);
                row
            })
            .collect();
        let db: Vec<Vec<u64>> = (0..nb)
            .map(|r| {
                let m = behz.bsk()[r];
                let s = r * n;
                let mut row: Vec<u64> = (0..n)
                    .map(|k| prods(p, [a0b[s + k], a1b[s + k], b0b[s + k], b1b[s + k]], &m))
                    .collect();
                ctx.intt(&mut row, &behz.bsk_tables()[r]);
                row
            })
            .collect();
        let qr: Vec<&[u64]> = dq.iter().map(|r| r.as_slice()).collect();
        let br: Vec<&[u64]> = db.iter().map(|r| r.as_slice()).collect();
        let y = behz.fast_floor(&qr, &br, n);
        let yr: Vec<&[u64]> = y.chunks(n).collect();
        let back = behz.bsk_to_q(&yr, n);
        for (j, row) in dq.iter_mut().enumerate() {
            row.copy_from_slice(&back[j * n..(j + 1) * n]);
            ctx.ntt(row, &ctx.q_tables()[j]);
        }
        Ok(dq.concat())
    });
    let mut out = CData::new_uninit(ctx.pool(), 3, l, n)?;
    for (p, part) in parts.into_iter().enumerate() {
        out.poly_mut(p).copy_from_slice(&part?);
    }
    out.set_all_domains(Domain::Evaluation);
    Ok(out)
}

/// Three-component product.
pub fn multiply(ctx: &Context, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    check_bfv(ctx)?;
    rlwe::check_level(a, b)?;
    if a.size() != 2 || b.size() != 2 {
        return Err(Error::Shape("multiply takes two-component ciphertexts".into()));
    }
    let data = behz_tensor(ctx, &a.data, &b.data)?;
    Ok(Ciphertext::new(data, 1.0, 1, Scheme::Bfv))
}

pub fn square(ctx: &Context, a: &Ciphertext) -> Result<Ciphertext> {
    multiply(ctx, a, a)
}

pub fn relinearize(ctx: &Context, ct: &Ciphertext, rlk: &RelinKey) -> Result<Ciphertext> {
    check_bfv(ctx)?;
    rlwe::relinearize(ctx, ct, rlk)
}

pub fn multiply_relin(ctx: &Context, a: &Ciphertext, b: &Ciphertext, rlk: &RelinKey) -> Result<Ciphertext> {
    relinearize(ctx, &multiply(ctx, a, b)?, rlk)
}

/// Rotates each of the two slot rows left by `step`.
pub fn rotate_rows(ctx: &Context, ct: &Ciphertext, step: i64, gk: &GaloisKeys) -> Result<Ciphertext> {
    check_bfv(ctx)?;
    if step.rem_euclid(ctx.slots() as i64) == 0 {
        return ct.try_clone();
    }
    rlwe::rotate_with(ctx, ct, ctx.galois_element(step), gk)
}

/// Swaps the two slot rows.
pub fn rotate_columns(ctx: &Context, ct: &Ciphertext, gk: &GaloisKeys) -> Result<Ciphertext> {
    check_bfv(ctx)?;
    rlwe::rotate_with(ctx, ct, ctx.conjugation_element(), gk)
}
