//! Ciphertext and plaintext containers and the scheme-independent RLWE
//! operations they share. Ciphertexts always live in the evaluation domain.

use crate::context::{Context, Scheme};
use crate::error::{Error, Result};
use crate::keys::{key_switch, GaloisKeys, KeySwitchKey, RelinKey};
use crate::poly::cdata::{CData, Domain};
use crate::poly::galois::{apply_eval_row, eval_permutation};

#[derive(Clone, Debug, PartialEq)]
pub struct Ciphertext {
    pub(crate) data: CData,
    /// CKKS scale; 1 otherwise.
    pub(crate) scale: f64,
    /// BGV: decryption yields `m * correction mod t`. 1 otherwise.
    pub(crate) correction: u64,
    pub(crate) scheme: Scheme,
}

impl Ciphertext {
    pub(crate) fn new(data: CData, scale: f64, correction: u64, scheme: Scheme) -> Self {
        Self { data, scale, correction, scheme }
    }

    pub fn data(&self) -> &CData {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut CData {
        &mut self.data
    }

    /// Number of active chain moduli.
    pub fn level(&self) -> usize {
        self.data.size_modulus()
    }

    /// Number of polynomials (2, or 3 before relinearization).
    pub fn size(&self) -> usize {
        self.data.size_poly()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn set_scale(&mut self, scale: f64) {
        self.scale = scale;
    }

    pub fn correction(&self) -> u64 {
        self.correction
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn try_clone(&self) -> Result<Self> {
        Ok(self.with_data(self.data.try_clone()?))
    }

    pub(crate) fn with_data(&self, data: CData) -> Self {
        Self { data, scale: self.scale, correction: self.correction, scheme: self.scheme }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plaintext {
    /// CKKS: evaluation form over the chain prefix. BFV/BGV: one row of
    /// coefficients mod `t`.
    pub(crate) data: CData,
    pub(crate) scale: f64,
    pub(crate) scheme: Scheme,
    pub(crate) batched: bool,
}

impl Plaintext {
    pub(crate) fn new(data: CData, scale: f64, scheme: Scheme, batched: bool) -> Self {
        Self { data, scale, scheme, batched }
    }

    pub fn data(&self) -> &CData {
        &self.data
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn level(&self) -> usize {
        self.data.size_modulus()
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn is_batched(&self) -> bool {
        self.batched
    }

    /// Coefficients mod `t` (BFV/BGV).
    pub fn coeffs(&self) -> &[u64] {
        self.data.row(0, 0)
    }
}

pub(crate) fn check_level(a: &Ciphertext, b: &Ciphertext) -> Result<()> {
    if a.level() != b.level() {
        return Err(Error::Level(format!("levels {} and {} differ", a.level(), b.level())));
    }
    if a.scheme != b.scheme {
        return Err(Error::Config(format!("{:?} and {:?} ciphertexts mixed", a.scheme, b.scheme)));
    }
    Ok(())
}

/// `a ± b` with components padded to the larger size.
pub(crate) fn add_sub(ctx: &Context, a: &Ciphertext, b: &Ciphertext, subtract: bool) -> Result<Ciphertext> {
    check_level(a, b)?;
    let (big, small, flip) = if a.size() >= b.size() { (a, b, false) } else { (b, a, true) };
    let mut out = big.data.try_clone()?;
    let level = a.level();
    let n = ctx.n();
    let tasks: Vec<_> = out.rows_mut().enumerate().collect();
    ctx.lanes().par_for_each_modulus(tasks, |_, (r, row)| {
        let (p, j) = (r / level, r % level);
        let q = ctx.moduli()[j];
        let other = (p < small.size()).then(|| small.data.row(p, j));
        for k in 0..n {
            let y = other.map_or(0, |o| o[k]);
            row[k] = match (subtract, flip) {
                (false, _) => q.add(row[k], y),
                (true, false) => q.sub(row[k], y),
                (true, true) => q.sub(y, row[k]),
            };
        }
    });
    Ok(a.with_data(out))
}

pub(crate) fn negate(ctx: &Context, a: &Ciphertext) -> Result<Ciphertext> {
    let mut out = a.data.try_clone()?;
    let level = a.level();
    let tasks: Vec<_> = out.rows_mut().collect();
    ctx.lanes().par_for_each_modulus(tasks, |r, row| {
        let q = ctx.moduli()[r % level];
        row.iter_mut().for_each(|x| *x = q.neg(*x));
    });
    Ok(a.with_data(out))
}

/// Three-component product `(a0 b0, a0 b1 + a1 b0, a1 b1)`.
///
/// Fused: one pass per residue. Unfused: four products and one sum, each a
/// separate pass.
pub(crate) fn tensor(ctx: &Context, a: &CData, b: &CData, fused: bool) -> Result<CData> {
    if a.size_poly() != 2 || b.size_poly() != 2 {
        return Err(Error::Shape("multiply takes two-component ciphertexts".into()));
    }
    a.check_shape(b)?;
    a.check_domain(Domain::Evaluation)?;
    b.check_domain(Domain::Evaluation)?;
    let level = a.size_modulus();
    let n = a.n();
    let mut out = CData::new_uninit(ctx.pool(), 3, level, n)?;
    out.set_all_domains(Domain::Evaluation);
    if fused {
        let data = out.data_mut();
        let (d0, rest) = data.split_at_mut(level * n);
        let (d1, d2) = rest.split_at_mut(level * n);
        let tasks: Vec<_> = d0.chunks_mut(n).zip(d1.chunks_mut(n)).zip(d2.chunks_mut(n)).collect();
        ctx.lanes().par_for_each_modulus(tasks, |j, ((d0, d1), d2)| {
            let q = ctx.moduli()[j];
            let (a0, a1, b0, b1) = (a.row(0, j), a.row(1, j), b.row(0, j), b.row(1, j));
            for k in 0..n {
                d0[k] = q.mul(a0[k], b0[k]);
                d1[k] = q.add(q.mul(a0[k], b1[k]), q.mul(a1[k], b0[k]));
                d2[k] = q.mul(a1[k], b1[k]);
            }
        });
        return Ok(out);
    }
    let mut cross = CData::new_uninit(ctx.pool(), 2, level, n)?;
    let pass = |dst: &mut [u64], pa: usize, pb: usize| {
        let tasks: Vec<_> = dst.chunks_mut(n).collect();
        ctx.lanes().par_for_each_modulus(tasks, |j, d| {
            let q = ctx.moduli()[j];
            let (x, y) = (a.row(pa, j), b.row(pb, j));
            for k in 0..n {
                d[k] = q.mul(x[k], y[k]);
            }
        });
    };
    pass(out.poly_mut(0), 0, 0);
    pass(cross.poly_mut(0), 0, 1);
    pass(cross.poly_mut(1), 1, 0);
    pass(out.poly_mut(2), 1, 1);
    let (x, y) = cross.data().split_at(level * n);
    let tasks: Vec<_> = out.poly_mut(1).chunks_mut(n).collect();
    ctx.lanes().par_for_each_modulus(tasks, |j, d| {
        let q = ctx.moduli()[j];
        let (x, y) = (&x[j * n..(j + 1) * n], &y[j * n..(j + 1) * n]);
        for k in 0..n {
            d[k] = q.add(x[k], y[k]);
        }
    });
    Ok(out)
}

/// `(a0^2, 2 a0 a1, a1^2)`.
pub(crate) fn square(ctx: &Context, a: &CData) -> Result<CData> {
    if a.size_poly() != 2 {
        return Err(Error::Shape("square takes a two-component ciphertext".into()));
    }
    a.check_domain(Domain::Evaluation)?;
    let level = a.size_modulus();
    let n = a.n();
    let mut out = CData::new_uninit(ctx.pool(), 3, level, n)?;
    out.set_all_domains(Domain::Evaluation);
    let data = out.data_mut();
    let (d0, rest) = data.split_at_mut(level * n);
    let (d1, d2) = rest.split_at_mut(level * n);
    let tasks: Vec<_> = d0.chunks_mut(n).zip(d1.chunks_mut(n)).zip(d2.chunks_mut(n)).collect();
    ctx.lanes().par_for_each_modulus(tasks, |j, ((d0, d1), d2)| {
        let q = ctx.moduli()[j];
        let (a0, a1) = (a.row(0, j), a.row(1, j));
        for k in 0..n {
            d0[k] = q.mul(a0[k], a0[k]);
            let c = q.mul(a0[k], a1[k]);
            d1[k] = q.add(c, c);
            d2[k] = q.mul(a1[k], a1[k]);
        }
    });
    Ok(out)
}

/// Adds `(k0, k1)` into components 0 and 1 of `base`.
fn add_switched(ctx: &Context, base: &mut CData, k0: &CData, k1: &CData) {
    let level = base.size_modulus();
    let n = base.n();
    let (c0, rest) = base.data_mut().split_at_mut(level * n);
    let c1 = &mut rest[..level * n];
    let tasks: Vec<_> = c0.chunks_mut(n).zip(c1.chunks_mut(n)).collect();
    ctx.lanes().par_for_each_modulus(tasks, |j, (c0, c1)| {
        let q = ctx.moduli()[j];
        let (x, y) = (k0.row(0, j), k1.row(0, j));
        for k in 0..n {
            c0[k] = q.add(c0[k], x[k]);
            c1[k] = q.add(c1[k], y[k]);
        }
    });
}

pub(crate) fn relinearize(ctx: &Context, ct: &Ciphertext, rlk: &RelinKey) -> Result<Ciphertext> {
    if ct.size() != 3 {
        return Err(Error::Shape(format!("relinearize needs 3 components, got {}", ct.size())));
    }
    let c2 = ct.data.extract_poly(2)?;
    let (k0, k1) = key_switch(ctx, &c2, &rlk.0)?;
    let mut out = ct.data.try_clone()?;
    out.resize(2, ct.level())?;
    add_switched(ctx, &mut out, &k0, &k1);
    Ok(ct.with_data(out))
}

/// Applies `X -> X^g` and switches back to the original key.
pub(crate) fn apply_galois(ctx: &Context, ct: &Ciphertext, g: u64, key: &KeySwitchKey) -> Result<Ciphertext> {
    if ct.size() != 2 {
        return Err(Error::Shape("rotate takes a relinearized ciphertext".into()));
    }
    let n = ctx.n();
    let level = ct.level();
    let perm = eval_permutation(n, g)?;
    let mut out = CData::new_uninit(ctx.pool(), 2, level, n)?;
    out.set_all_domains(Domain::Evaluation);
    let tasks: Vec<_> = out.rows_mut().collect();
    ctx.lanes().par_for_each_modulus(tasks, |r, row| {
        apply_eval_row(ct.data.row(r / level, r % level), row, &perm);
    });
    let c1 = out.extract_poly(1)?;
    let (k0, k1) = key_switch(ctx, &c1, key)?;
    for (j, row) in out.poly_mut(1).chunks_mut(n).enumerate() {
        row.copy_from_slice(k1.row(0, j));
    }
    let (c0, _) = out.data_mut().split_at_mut(level * n);
    let tasks: Vec<_> = c0.chunks_mut(n).collect();
    ctx.lanes().par_for_each_modulus(tasks, |j, c0| {
        let q = ctx.moduli()[j];
        for (x, &y) in c0.iter_mut().zip(k0.row(0, j)) {
            *x = q.add(*x, y);
        }
    });
    Ok(ct.with_data(out))
}

pub(crate) fn rotate_with(ctx: &Context, ct: &Ciphertext, g: u64, keys: &GaloisKeys) -> Result<Ciphertext> {
    apply_galois(ctx, ct, g, keys.get(g)?)
}

/// Multiplies each component by the one-polynomial evaluation form `pt` (same level).
pub(crate) fn mul_plain_eval(ctx: &Context, ct: &Ciphertext, pt: &CData) -> Result<Ciphertext> {
    pt.check_domain(Domain::Evaluation)?;
    if pt.size_poly() != 1 || pt.size_modulus() < ct.level() {
        return Err(Error::Level(format!("plaintext level {} below ciphertext level {}", pt.size_modulus(), ct.level())));
    }
    let level = ct.level();
    let n = ctx.n();
    let mut out = ct.data.try_clone()?;
    let tasks: Vec<_> = out.rows_mut().collect();
    ctx.lanes().par_for_each_modulus(tasks, |r, row| {
        let j = r % level;
        let q = ctx.moduli()[j];
        let y = pt.row(0, j);
        for k in 0..n {
            row[k] = q.mul(row[k], y[k]);
        }
    });
    Ok(ct.with_data(out))
}

/// Multiplies every residue row `j` by `scalars[j]`.
pub(crate) fn mul_scalars(ctx: &Context, ct: &Ciphertext, scalars: &[u64]) -> Result<Ciphertext> {
    let level = ct.level();
    let mut out = ct.data.try_clone()?;
    let tasks: Vec<_> = out.rows_mut().collect();
    ctx.lanes().par_for_each_modulus(tasks, |r, row| {
        let j = r % level;
        let q = ctx.moduli()[j];
        let (s, ss) = (scalars[j], q.shoup(scalars[j]));
        row.iter_mut().for_each(|x| *x = q.mul_shoup(*x, s, ss));
    });
    Ok(ct.with_data(out))
}
