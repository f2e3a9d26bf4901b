//! Secret, public, relinearization and Galois keys, and key switching.
//!
//! Switching keys carry one digit per chain modulus. Each digit is an RLWE
//! pair over the chain plus the special modulus `P`; row `j < L` of digit
//! `i` hides `[i == j] * P * s'`, the `P` row hides nothing. A switch lifts
//! each residue of the input, accumulates against the digits over
//! `Q_l * P`, and divides by `P`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::context::{Context, Scheme};
use crate::error::{Error, Result};
use crate::math::modulus::Modulus;
use crate::math::ntt::NttTables;
use crate::math::sampling::{sample_error_vec, sample_ternary_vec, sample_uniform, Rng};
use crate::poly::cdata::{CData, Domain};
use crate::poly::galois::{apply_eval_row, eval_permutation};

pub type Seed = [u8; 32];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Rounding {
    /// Round to the nearest integer.
    Nearest,
    /// Subtract the representative of the remainder that is `0 mod t`.
    Congruent(u64),
}

pub(crate) fn rounding_for(ctx: &Context) -> Rounding {
    match ctx.scheme() {
        Scheme::Bgv => Rounding::Congruent(ctx.plain_modulus().unwrap_or(1)),
        _ => Rounding::Nearest,
    }
}

/// Factor applied to fresh errors: `t` for BGV, else 1.
pub(crate) fn noise_factor(ctx: &Context) -> u64 {
    match ctx.scheme() {
        Scheme::Bgv => ctx.plain_modulus().unwrap_or(1),
        _ => 1,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SecretKey {
    pub(crate) coeffs: Vec<i8>,
    /// Evaluation form over the chain and the special modulus.
    pub(crate) eval: CData,
}

impl SecretKey {
    pub fn coeffs(&self) -> &[i8] {
        &self.coeffs
    }

    pub fn eval(&self) -> &CData {
        &self.eval
    }

    pub fn row(&self, j: usize) -> &[u64] {
        self.eval.row(0, j)
    }
}

/// `(b, a)` with `b = -a s + e` over the chain, evaluation domain.
#[derive(Clone, Debug, PartialEq)]
pub struct PublicKey {
    pub(crate) data: CData,
    pub(crate) seed: Seed,
}

impl PublicKey {
    pub fn data(&self) -> &CData {
        &self.data
    }

    pub fn seed(&self) -> &Seed {
        &self.seed
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KeySwitchKey {
    /// Digit `i`: polys `(b_i, a_i)` over `L + 1` rows.
    pub(crate) digits: Vec<CData>,
    pub(crate) seed: Seed,
}

impl KeySwitchKey {
    pub fn digits(&self) -> &[CData] {
        &self.digits
    }

    pub fn digit_count(&self) -> usize {
        self.digits.len()
    }

    pub fn seed(&self) -> &Seed {
        &self.seed
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelinKey(pub KeySwitchKey);

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GaloisKeys {
    pub(crate) keys: BTreeMap<u64, KeySwitchKey>,
}

impl GaloisKeys {
    pub fn get(&self, g: u64) -> Result<&KeySwitchKey> {
        self.keys.get(&g).ok_or_else(|| Error::MissingKey(format!("no Galois key for element {g}")))
    }

    pub fn contains(&self, g: u64) -> bool {
        self.keys.contains_key(&g)
    }

    pub fn elements(&self) -> Vec<u64> {
        self.keys.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn insert(&mut self, g: u64, key: KeySwitchKey) {
        self.keys.insert(g, key);
    }

    pub fn merge(&mut self, other: GaloisKeys) {
        self.keys.extend(other.keys);
    }
}

/// Uniform residues for `moduli`, derived from `seed` on stream `stream`.
pub(crate) fn expand_uniform(seed: &Seed, stream: u64, moduli: &[Modulus], n: usize, out: &mut [u64]) {
    let mut rng = Rng::from_seed(*seed);
    rng.inner().set_stream(stream);
    for (j, q) in moduli.iter().enumerate() {
        for x in &mut out[j * n..(j + 1) * n] {
            *x = sample_uniform(q, &mut rng);
        }
    }
}

/// Writes `coeffs * factor` into `rows` (one per table) in evaluation form.
pub(crate) fn signed_to_eval(ctx: &Context, coeffs: &[i64], factor: u64, tables: &[NttTables], rows: &mut [u64]) {
    let n = coeffs.len();
    let tasks: Vec<_> = rows.chunks_mut(n).collect();
    ctx.lanes().par_for_each_modulus(tasks, |j, row| {
        let t = &tables[j];
        let q = t.modulus();
        let f = q.reduce(factor);
        for (r, &c) in row.iter_mut().zip(coeffs) {
            *r = q.mul(q.reduce_i64(c), f);
        }
        ctx.ntt(row, t);
    });
}

fn key_moduli(ctx: &Context) -> Vec<Modulus> {
    ctx.key_tables().iter().map(|t| *t.modulus()).collect()
}

fn draw_seed(rng: &mut Rng) -> Seed {
    let mut s = [0u8; 32];
    rng.fill_bytes(&mut s);
    s
}

pub fn keygen(ctx: &Arc<Context>, rng: &mut Rng) -> Result<SecretKey> {
    let n = ctx.n();
    let coeffs = sample_ternary_vec(n, rng);
    let wide: Vec<i64> = coeffs.iter().map(|&c| c as i64).collect();
    let mut eval = CData::new_uninit(ctx.pool(), 1, ctx.max_level() + 1, n)?;
    signed_to_eval(ctx, &wide, 1, ctx.key_tables(), eval.data_mut());
    eval.set_all_domains(Domain::Evaluation);
    Ok(SecretKey { coeffs, eval })
}

pub fn pk_gen(ctx: &Arc<Context>, sk: &SecretKey, rng: &mut Rng) -> Result<PublicKey> {
    let n = ctx.n();
    let l = ctx.max_level();
    let seed = draw_seed(rng);
    let mut data = CData::new_uninit(ctx.pool(), 2, l, n)?;
    expand_uniform(&seed, 0, ctx.moduli(), n, data.poly_mut(1));
    let e = sample_error_vec(n, rng);
    signed_to_eval(ctx, &e, noise_factor(ctx), ctx.q_tables(), data.poly_mut(0));
    let (b, a) = data.data_mut().split_at_mut(l * n);
    for j in 0..l {
        let q = ctx.moduli()[j];
        let s = sk.row(j);
        let rows = b[j * n..(j + 1) * n].iter_mut().zip(&a[j * n..(j + 1) * n]).zip(s);
        for ((b, &a), &s) in rows {
            *b = q.sub(*b, q.mul(a, s));
        }
    }
    data.set_all_domains(Domain::Evaluation);
    Ok(PublicKey { data, seed })
}

/// Switching key from `target` (evaluation form over `L + 1` rows) to `sk`.
pub fn ksk_gen(ctx: &Arc<Context>, sk: &SecretKey, target: &CData, rng: &mut Rng) -> Result<KeySwitchKey> {
    let n = ctx.n();
    let l = ctx.max_level();
    let rows = l + 1;
    if target.shape() != (1, rows, n) {
        return Err(Error::Shape(format!("switching target {:?}", target.shape())));
    }
    let seed = draw_seed(rng);
    let moduli = key_moduli(ctx);
    let factor = noise_factor(ctx);
    let mut digits = Vec::with_capacity(l);
    for i in 0..l {
        let mut d = CData::new_uninit(ctx.pool(), 2, rows, n)?;
        expand_uniform(&seed, i as u64, &moduli, n, d.poly_mut(1));
        let e = sample_error_vec(n, rng);
        signed_to_eval(ctx, &e, factor, ctx.key_tables(), d.poly_mut(0));
        let (b, a) = d.data_mut().split_at_mut(rows * n);
        for (j, q) in moduli.iter().enumerate() {
            let s = sk.row(j);
            let br = &mut b[j * n..(j + 1) * n];
            let ar = &a[j * n..(j + 1) * n];
            for k in 0..n {
                br[k] = q.sub(br[k], q.mul(ar[k], s[k]));
            }
            if j == i {
                let p = ctx.p_mod_q()[i];
                for (bk, &tk) in br.iter_mut().zip(target.row(0, j)) {
                    *bk = q.add(*bk, q.mul(p, tk));
                }
            }
        }
        d.set_all_domains(Domain::Evaluation);
        digits.push(d);
    }
    Ok(KeySwitchKey { digits, seed })
}

pub fn relin_keygen(ctx: &Arc<Context>, sk: &SecretKey, rng: &mut Rng) -> Result<RelinKey> {
    let mut s2 = sk.eval.try_clone()?;
    let moduli = key_moduli(ctx);
    let n = ctx.n();
    for (j, q) in moduli.iter().enumerate() {
        for x in &mut s2.data_mut()[j * n..(j + 1) * n] {
            *x = q.mul(*x, *x);
        }
    }
    Ok(RelinKey(ksk_gen(ctx, sk, &s2, rng)?))
}

/// Key for the automorphism `X -> X^g`.
pub fn galois_key_for_element(ctx: &Arc<Context>, sk: &SecretKey, g: u64, rng: &mut Rng) -> Result<KeySwitchKey> {
    let n = ctx.n();
    let perm = eval_permutation(n, g)?;
    let mut target = CData::new_uninit(ctx.pool(), 1, ctx.max_level() + 1, n)?;
    for j in 0..=ctx.max_level() {
        apply_eval_row(sk.row(j), target.row_mut(0, j), &perm);
    }
    target.set_all_domains(Domain::Evaluation);
    ksk_gen(ctx, sk, &target, rng)
}

/// Keys for rotations by each of `steps` (|step| < n/2), and conjugation if asked.
pub fn galois_keygen(
    ctx: &Arc<Context>,
    sk: &SecretKey,
    steps: &[i64],
    conjugate: bool,
    rng: &mut Rng,
) -> Result<GaloisKeys> {
    let half = ctx.slots() as i64;
    let mut keys = GaloisKeys::default();
    for &s in steps {
        if s.abs() >= half {
            return Err(Error::Parameter(format!("rotation step {s} must be below {half} in magnitude")));
        }
        let g = ctx.galois_element(s);
        if !keys.contains(g) {
            keys.insert(g, galois_key_for_element(ctx, sk, g, rng)?);
        }
    }
    if conjugate {
        let g = ctx.conjugation_element();
        keys.insert(g, galois_key_for_element(ctx, sk, g, rng)?);
    }
    Ok(keys)
}

/// Power-of-two steps `1, 2, 4, ..` below `limit` plus their negatives.
pub fn power_of_two_steps(limit: usize) -> Vec<i64> {
    let mut v = Vec::new();
    let mut s = 1i64;
    while (s as usize) < limit {
        v.push(s);
        s <<= 1;
    }
    v
}

/// Replaces `keep[j]` (evaluation rows mod `keep_tables[j]`) by
/// `(keep[j] - delta) * last^{-1}`, where `delta ≡ last_row (mod last)` is the
/// centered remainder, made `0 mod t` under `Congruent(t)`.
pub(crate) fn divide_and_drop(
    ctx: &Context,
    keep: Vec<&mut [u64]>,
    keep_tables: &[NttTables],
    last: &[u64],
    last_table: &NttTables,
    last_inv: &[u64],
    rounding: Rounding,
) -> Result<()> {
    let n = last.len();
    // row 0 holds the lifted last residue, rows 1.. the per-target scratch
    let mut scratch = CData::new_uninit(ctx.pool(), 1, keep.len() + 1, n)?;
    let (lc, zs) = scratch.data_mut().split_at_mut(n);
    lc.copy_from_slice(last);
    ctx.intt(lc, last_table);
    let lq = last_table.modulus();
    match rounding {
        Rounding::Nearest => {}
        Rounding::Congruent(t) => {
            let tinv = lq.inv(lq.reduce(t)).expect("t is coprime to the chain");
            lc.iter_mut().for_each(|x| *x = lq.mul(*x, tinv));
        }
    }
    let lc = &*lc;
    let tasks: Vec<_> = keep.into_iter().zip(zs.chunks_mut(n)).enumerate().collect();
    ctx.lanes().par_for_each_modulus(tasks, |_, (j, (row, z))| {
        let t = &keep_tables[j];
        let q = t.modulus();
        z.iter_mut().zip(lc).for_each(|(v, &x)| *v = q.reduce_i64(lq.center(x)));
        if let Rounding::Congruent(tp) = rounding {
            let f = q.reduce(tp);
            z.iter_mut().for_each(|v| *v = q.mul(*v, f));
        }
        ctx.ntt(z, t);
        let inv = last_inv[j];
        let inv_s = q.shoup(inv);
        for (r, &zz) in row.iter_mut().zip(z.iter()) {
            *r = q.mul_shoup(q.sub(*r, zz), inv, inv_s);
        }
    });
    Ok(())
}

/// Drops the last modulus of every polynomial in `cd` (evaluation domain), dividing by it.
pub(crate) fn rescale_cdata(ctx: &Context, cd: &mut CData, rounding: Rounding) -> Result<()> {
    cd.check_domain(Domain::Evaluation)?;
    let l = cd.size_modulus();
    if l < 2 {
        return Err(Error::Level("no modulus left to drop".into()));
    }
    let n = cd.n();
    for p in 0..cd.size_poly() {
        let (keep, last) = cd.poly_mut(p).split_at_mut((l - 1) * n);
        divide_and_drop(
            ctx,
            keep.chunks_mut(n).collect(),
            ctx.tables_at(l - 1),
            last,
            &ctx.q_tables()[l - 1],
            ctx.q_inv_row(l - 1),
            rounding,
        )?;
    }
    cd.drop_last_modulus()
}

/// Returns `(k0, k1)` with `k0 + k1 s ≈ d s'` over the input's level.
pub fn key_switch(ctx: &Context, d: &CData, ksk: &KeySwitchKey) -> Result<(CData, CData)> {
    d.check_domain(Domain::Evaluation)?;
    if d.size_poly() != 1 {
        return Err(Error::Shape(format!("key switch takes one polynomial, got {}", d.size_poly())));
    }
    let l = d.size_modulus();
    let big_l = ctx.max_level();
    if ksk.digits.len() < l || ksk.digits.first().is_some_and(|k| k.size_modulus() != big_l + 1) {
        return Err(Error::Level(format!("switching key covers {} digits, input has {l}", ksk.digits.len())));
    }
    let n = d.n();
    let mut coef = d.try_clone()?;
    for j in 0..l {
        ctx.intt(coef.row_mut(0, j), &ctx.q_tables()[j]);
    }
    let targets: Vec<usize> = (0..l).chain(std::iter::once(big_l)).collect();
    // acc rows: poly 0 and 1 per target; tmp: one NTT buffer per target
    let mut acc = CData::new(ctx.pool(), 2, l + 1, n)?;
    let mut tmp = CData::new_uninit(ctx.pool(), 1, l + 1, n)?;
    {
        let (acc0, acc1) = acc.data_mut().split_at_mut((l + 1) * n);
        let tasks: Vec<_> = acc0.chunks_mut(n).zip(acc1.chunks_mut(n)).zip(tmp.data_mut().chunks_mut(n)).collect();
        ctx.lanes().par_for_each_modulus(tasks, |t, ((a0, a1), tmp)| {
            let kt = targets[t];
            let table = &ctx.key_tables()[kt];
            let q = table.modulus();
            for i in 0..l {
                let digit: &[u64] = if kt == i {
                    d.row(0, i)
                } else {
                    let src = coef.row(0, i);
                    if ctx.moduli()[i].value() <= q.value() {
                        tmp.copy_from_slice(src);
                    } else {
                        tmp.iter_mut().zip(src).for_each(|(t, &s)| *t = q.reduce(s));
                    }
                    ctx.ntt(tmp, table);
                    tmp
                };
                let kb = ksk.digits[i].row(0, kt);
                let ka = ksk.digits[i].row(1, kt);
                for k in 0..n {
                    a0[k] = q.add(a0[k], q.mul(digit[k], kb[k]));
                    a1[k] = q.add(a1[k], q.mul(digit[k], ka[k]));
                }
            }
        });
    }
    drop(tmp);
    let rounding = rounding_for(ctx);
    let mut outs = Vec::with_capacity(2);
    for part in 0..2 {
        let mut out = CData::new_uninit(ctx.pool(), 1, l, n)?;
        out.data_mut().copy_from_slice(&acc.poly(part)[..l * n]);
        divide_and_drop(
            ctx,
            out.rows_mut().collect(),
            ctx.tables_at(l),
            acc.row(part, l),
            ctx.special_table(),
            &ctx.p_inv()[..l],
            rounding,
        )?;
        out.set_all_domains(Domain::Evaluation);
        outs.push(out);
    }
    let k1 = outs.pop().expect("two parts");
    let k0 = outs.pop().expect("two parts");
    Ok((k0, k1))
}

/// Fresh ternary `u` and errors: `(b u + e0, a u + e1)` at `level`.
pub(crate) fn encrypt_zero_pk(ctx: &Context, pk: &PublicKey, level: usize, rng: &mut Rng) -> Result<CData> {
    let n = ctx.n();
    let tables = ctx.tables_at(level);
    let u: Vec<i64> = sample_ternary_vec(n, rng).into_iter().map(i64::from).collect();
    let factor = noise_factor(ctx);
    let mut ue = vec![0u64; level * n];
    signed_to_eval(ctx, &u, 1, tables, &mut ue);
    let mut out = CData::new_uninit(ctx.pool(), 2, level, n)?;
    for p in 0..2 {
        let e = sample_error_vec(n, rng);
        signed_to_eval(ctx, &e, factor, tables, out.poly_mut(p));
    }
    let (c0, c1) = out.data_mut().split_at_mut(level * n);
    let tasks: Vec<_> = c0.chunks_mut(n).zip(c1.chunks_mut(n)).collect();
    ctx.lanes().par_for_each_modulus(tasks, |j, (c0, c1)| {
        let q = tables[j].modulus();
        let (b, a, u) = (pk.data.row(0, j), pk.data.row(1, j), &ue[j * n..(j + 1) * n]);
        for k in 0..n {
            c0[k] = q.add(c0[k], q.mul(b[k], u[k]));
            c1[k] = q.add(c1[k], q.mul(a[k], u[k]));
        }
    });
    out.set_all_domains(Domain::Evaluation);
    Ok(out)
}

/// `(-a s + e, a)` at `level`.
pub(crate) fn encrypt_zero_sk(ctx: &Context, sk: &SecretKey, level: usize, rng: &mut Rng) -> Result<CData> {
    let n = ctx.n();
    let tables = ctx.tables_at(level);
    let seed = draw_seed(rng);
    let mut out = CData::new_uninit(ctx.pool(), 2, level, n)?;
    let moduli: Vec<Modulus> = tables.iter().map(|t| *t.modulus()).collect();
    expand_uniform(&seed, 0, &moduli, n, out.poly_mut(1));
    let e = sample_error_vec(n, rng);
    signed_to_eval(ctx, &e, noise_factor(ctx), tables, out.poly_mut(0));
    let (c0, c1) = out.data_mut().split_at_mut(level * n);
    for j in 0..level {
        let q = moduli[j];
        let s = sk.row(j);
        for k in 0..n {
            let i = j * n + k;
            c0[i] = q.sub(c0[i], q.mul(c1[i], s[k]));
        }
    }
    out.set_all_domains(Domain::Evaluation);
    Ok(out)
}

/// `sum_k c_k s^k` in evaluation form at the ciphertext's level.
pub(crate) fn decrypt_raw(ctx: &Context, ct: &CData, sk: &SecretKey) -> Result<CData> {
    ct.check_domain(Domain::Evaluation)?;
    let level = ct.size_modulus();
    let n = ct.n();
    let mut out = CData::new_uninit(ctx.pool(), 1, level, n)?;
    let tasks: Vec<_> = out.rows_mut().collect();
    ctx.lanes().par_for_each_modulus(tasks, |j, row| {
        let q = ctx.moduli()[j];
        let s = sk.row(j);
        row.copy_from_slice(ct.row(0, j));
        for k in 0..n {
            let mut sp = s[k];
            for p in 1..ct.size_poly() {
                row[k] = q.add(row[k], q.mul(ct.row(p, j)[k], sp));
                sp = q.mul(sp, s[k]);
            }
        }
    });
    out.set_all_domains(Domain::Evaluation);
    Ok(out)
}
