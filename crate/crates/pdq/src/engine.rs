//! Server-side evaluation. Every ciphertext on the comparison path carries
//! the canonical scale of its level, so sums never need scale repair.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rnsfhe::ckks;
use rnsfhe::context::Context;
use rnsfhe::{Ciphertext, GaloisKeys, Plaintext, RelinKey, Rng};

use crate::column::EncryptedColumn;
use crate::config::PdqConfig;
use crate::error::{PdqError, Result};
use crate::interp::{eq_coeffs, lt_coeffs, verify};
use crate::query::{Aggregator, Atom, CmpOp, Operand, Predicate, QuerySpec};

/// Where a server-side plaintext came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PlainOrigin {
    Constant,
    Mask,
    Validity,
}

/// Powers `z^1 .. z^{p-1}` of one digit ciphertext.
pub struct Powers {
    /// Unlowered; `top[t - 1] = z^t`.
    top: Vec<Ciphertext>,
    /// All at `level`.
    basis: Vec<Ciphertext>,
}

impl Powers {
    pub fn level(&self) -> usize {
        self.basis[0].level()
    }
}

/// Server's reply to the client for one reciprocal round.
pub type InverseFn<'a> = dyn FnMut(Ciphertext) -> Result<Ciphertext> + 'a;

pub struct Engine {
    ctx: Arc<Context>,
    rlk: RelinKey,
    gk: GaloisKeys,
    cfg: PdqConfig,
    scales: Vec<f64>,
    eq: Vec<Complex64>,
    lt: Vec<Vec<Complex64>>,
    cache: Mutex<HashMap<(String, usize), Arc<Powers>>>,
    built: AtomicUsize,
    trace: Mutex<Vec<PlainOrigin>>,
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

impl Engine {
    pub fn new(ctx: Arc<Context>, rlk: RelinKey, gk: GaloisKeys, cfg: PdqConfig) -> Result<Self> {
        cfg.validate(ctx.slots())?;
        verify(cfg.p)?;
        let top = ctx.max_level();
        let mut scales = vec![0.0; top + 1];
        scales[top] = ctx.default_scale();
        for l in (1..top).rev() {
            scales[l] = scales[l + 1] * scales[l + 1] / ctx.moduli()[l].value() as f64;
        }
        Ok(Self {
            eq: eq_coeffs(cfg.p),
            lt: lt_coeffs(cfg.p),
            ctx,
            rlk,
            gk,
            cfg,
            scales,
            cache: Mutex::new(HashMap::new()),
            built: AtomicUsize::new(0),
            trace: Mutex::new(Vec::new()),
        })
    }

    pub fn context(&self) -> &Arc<Context> {
        &self.ctx
    }

    pub fn config(&self) -> &PdqConfig {
        &self.cfg
    }

    /// Canonical scale at `level`.
    pub fn scale_at(&self, level: usize) -> f64 {
        self.scales[level]
    }

    /// Power bases built so far.
    pub fn powers_built(&self) -> usize {
        self.built.load(Ordering::Relaxed)
    }

    pub fn trace(&self) -> Vec<PlainOrigin> {
        self.trace.lock().unwrap().clone()
    }

    fn record(&self, o: PlainOrigin) {
        self.trace.lock().unwrap().push(o);
    }

    fn snap(&self, mut ct: Ciphertext) -> Ciphertext {
        let s = self.scales[ct.level()];
        if ((ct.scale() - s) / s).abs() < 1e-9 {
            ct.set_scale(s);
        }
        ct
    }

    fn const_mul_raw(&self, ct: &Ciphertext, c: Complex64, scale: f64) -> Result<Ciphertext> {
        self.record(PlainOrigin::Constant);
        Ok(ckks::multiply_const(&self.ctx, ct, c, scale)?)
    }

    /// Brings `ct` down to `level` at the canonical scale.
    pub fn lower(&self, ct: &Ciphertext, level: usize) -> Result<Ciphertext> {
        if level > ct.level() || level == 0 {
            return Err(rnsfhe::Error::Level(format!("cannot lower from {} to {level}", ct.level())).into());
        }
        let mut out = ct.try_clone()?;
        while out.level() > level {
            let l = out.level();
            let q = self.ctx.moduli()[l - 1].value() as f64;
            let c = self.scales[l - 1] * q / out.scale();
            out = ckks::rescale(&self.ctx, &self.const_mul_raw(&out, one(), c)?)?;
            out.set_scale(self.scales[l - 1]);
        }
        Ok(out)
    }

    pub fn mul(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        let l = a.level().min(b.level());
        let (a, b) = (self.lower(a, l)?, self.lower(b, l)?);
        Ok(self.snap(ckks::multiply_relin_rescale(&self.ctx, &a, &b, &self.rlk)?))
    }

    /// Product without level alignment or scale repair, for operands off the
    /// canonical track.
    pub fn mul_free(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        let l = a.level().min(b.level());
        let (a, b) = (ckks::mod_drop_to(a, l)?, ckks::mod_drop_to(b, l)?);
        Ok(ckks::multiply_relin_rescale(&self.ctx, &a, &b, &self.rlk)?)
    }

    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        let l = a.level().min(b.level());
        Ok(ckks::add(&self.ctx, &self.lower(a, l)?, &self.lower(b, l)?)?)
    }

    pub fn sub(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        let l = a.level().min(b.level());
        Ok(ckks::sub(&self.ctx, &self.lower(a, l)?, &self.lower(b, l)?)?)
    }

    pub fn add_const(&self, ct: &Ciphertext, c: Complex64) -> Result<Ciphertext> {
        self.record(PlainOrigin::Constant);
        Ok(ckks::add_const(&self.ctx, ct, c)?)
    }

    /// `1 - x`.
    pub fn complement(&self, x: &Ciphertext) -> Result<Ciphertext> {
        self.add_const(&ckks::negate(&self.ctx, x)?, one())
    }

    /// `c0 + sum_i c[i] * cts[i]`, one level below the common level.
    pub fn lin_comb(&self, cts: &[Ciphertext], c: &[Complex64], c0: Complex64) -> Result<Ciphertext> {
        let l = cts.iter().map(|x| x.level()).min().ok_or_else(|| PdqError::Query("empty combination".into()))?;
        let mut acc: Option<Ciphertext> = None;
        for (ct, &ci) in cts.iter().zip(c) {
            let x = self.lower(ct, l)?;
            let term = self.const_mul_raw(&x, ci, self.scales[l])?;
            acc = Some(match acc {
                None => term,
                Some(a) => ckks::add(&self.ctx, &a, &term)?,
            });
        }
        let out = self.snap(ckks::rescale(&self.ctx, &acc.unwrap())?);
        self.add_const(&out, c0)
    }

    pub fn conj(&self, ct: &Ciphertext) -> Result<Ciphertext> {
        Ok(ckks::conjugate(&self.ctx, ct, &self.gk)?)
    }

    /// `z^1 .. z^{p-1}`, using `z^{p-t} = conj(z^t)` on the unit circle.
    pub fn power_basis(&self, z: &Ciphertext) -> Result<Powers> {
        let p = self.cfg.p as usize;
        let mut pw: Vec<Option<Ciphertext>> = vec![None; p];
        pw[1] = Some(z.try_clone()?);
        for t in 2..=p / 2 {
            let (a, b) = (t / 2, t - t / 2);
            let x = self.mul(pw[a].as_ref().unwrap(), pw[b].as_ref().unwrap())?;
            pw[t] = Some(x);
        }
        for t in (p / 2 + 1).max(2)..p {
            let x = self.conj(pw[p - t].as_ref().unwrap())?;
            pw[t] = Some(x);
        }
        let top: Vec<Ciphertext> = pw.into_iter().skip(1).map(|x| x.unwrap()).collect();
        let level = top.iter().map(|x| x.level()).min().unwrap();
        let basis = top.iter().map(|x| self.lower(x, level)).collect::<Result<_>>()?;
        Ok(Powers { top, basis })
    }

    fn powers_for(&self, col: &EncryptedColumn, j: usize, cacheable: bool) -> Result<Arc<Powers>> {
        let key = (col.name.clone(), j);
        if cacheable {
            if let Some(p) = self.cache.lock().unwrap().get(&key) {
                return Ok(p.clone());
            }
        }
        let p = Arc::new(self.power_basis(&col.digits[j])?);
        self.built.fetch_add(1, Ordering::Relaxed);
        if cacheable {
            self.cache.lock().unwrap().insert(key, p.clone());
        }
        Ok(p)
    }

    /// Drops cached power bases of `name` (after a re-upload).
    pub fn invalidate(&self, name: &str) {
        self.cache.lock().unwrap().retain(|k, _| k.0 != name);
    }

    /// `EQ(u)` for `u = omega^{a-b}`; two levels below `u`'s basis.
    pub fn eq_digit(&self, u: &Ciphertext) -> Result<Ciphertext> {
        let pw = self.power_basis(u)?;
        self.lin_comb(&pw.basis, &self.eq[1..], self.eq[0])
    }

    fn eq_pair(&self, a: &Powers, b: &Powers) -> Result<Ciphertext> {
        let p = self.cfg.p as usize;
        // conj(w) is w^{p-1}
        let u = self.mul(&a.top[0], &b.top[p - 2])?;
        self.eq_digit(&u)
    }

    /// `LT(z, w) = sum_t z^t L_t(w)` with `L_t(w) = sum_s c_{t,s} w^s`.
    pub fn lt_digit(&self, a: &Powers, b: &Powers) -> Result<Ciphertext> {
        let mut acc: Option<Ciphertext> = None;
        for (t, row) in self.lt.iter().enumerate() {
            let l_t = self.lin_comb(&b.basis, &row[1..], row[0])?;
            let term = if t == 0 { l_t } else { self.mul(&a.basis[t - 1], &l_t)? };
            acc = Some(match acc {
                None => term,
                Some(x) => self.add(&x, &term)?,
            });
        }
        Ok(acc.unwrap())
    }

    pub fn lt_from_digits(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.lt_digit(&self.power_basis(a)?, &self.power_basis(b)?)
    }

    pub fn eq_from_digits(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.eq_pair(&self.power_basis(a)?, &self.power_basis(b)?)
    }

    /// Digit-composed comparison mask.
    pub fn compare_columns(
        &self,
        a: &EncryptedColumn,
        b: &EncryptedColumn,
        op: CmpOp,
        cache_a: bool,
        cache_b: bool,
    ) -> Result<Ciphertext> {
        let k = self.cfg.k;
        if a.digits.len() != k || b.digits.len() != k {
            return Err(PdqError::Config(format!(
                "columns carry {} and {} digits, expected {k}",
                a.digits.len(),
                b.digits.len()
            )));
        }
        let need_lt = matches!(op, CmpOp::Lt | CmpOp::Le);
        let mut parts: Vec<(Option<Ciphertext>, Ciphertext)> = Vec::with_capacity(k);
        for j in 0..k {
            let pa = self.powers_for(a, j, cache_a)?;
            let pb = self.powers_for(b, j, cache_b)?;
            let lt = if need_lt { Some(self.lt_digit(&pa, &pb)?) } else { None };
            parts.push((lt, self.eq_pair(&pa, &pb)?));
        }
        // (lo, hi) -> (LT_hi + EQ_hi LT_lo, EQ_hi EQ_lo)
        while parts.len() > 1 {
            let mut next = Vec::with_capacity(parts.len().div_ceil(2));
            let mut it = parts.into_iter();
            while let Some(lo) = it.next() {
                match it.next() {
                    None => next.push(lo),
                    Some(hi) => {
                        let eq = self.mul(&hi.1, &lo.1)?;
                        let lt = match (hi.0, lo.0) {
                            (Some(lh), Some(ll)) => Some(self.add(&lh, &self.mul(&hi.1, &ll)?)?),
                            _ => None,
                        };
                        next.push((lt, eq));
                    }
                }
            }
            parts = next;
        }
        let (lt, eq) = parts.pop().unwrap();
        match op {
            CmpOp::Lt => Ok(lt.unwrap()),
            CmpOp::Le => self.add(&lt.unwrap(), &eq),
            CmpOp::Eq => Ok(eq),
            CmpOp::Ne => self.complement(&eq),
        }
    }

    fn atom_mask(&self, atom: &Atom, cols: &HashMap<String, EncryptedColumn>, conds: &[EncryptedColumn]) -> Result<Ciphertext> {
        let lhs = cols.get(&atom.lhs).ok_or_else(|| PdqError::Query(format!("unknown column {}", atom.lhs)))?;
        match &atom.rhs {
            Operand::Column(c) => {
                let rhs = cols.get(c).ok_or_else(|| PdqError::Query(format!("unknown column {c}")))?;
                self.compare_columns(lhs, rhs, atom.op, true, true)
            }
            Operand::Cond(i) => {
                let rhs = conds.get(*i).ok_or_else(|| PdqError::Query(format!("missing condition {i}")))?;
                self.compare_columns(lhs, rhs, atom.op, true, false)
            }
            Operand::Const(_) => Err(PdqError::Query("plaintext constant reached the server".into())),
        }
    }

    fn product_tree(&self, mut v: Vec<Ciphertext>) -> Result<Ciphertext> {
        while v.len() > 1 {
            let mut next = Vec::with_capacity(v.len().div_ceil(2));
            let mut it = v.into_iter();
            while let Some(x) = it.next() {
                match it.next() {
                    Some(y) => next.push(self.mul(&x, &y)?),
                    None => next.push(x),
                }
            }
            v = next;
        }
        v.pop().ok_or_else(|| PdqError::Query("empty conjunction".into()))
    }

    pub fn predicate_eval(
        &self,
        pred: &Predicate,
        cols: &HashMap<String, EncryptedColumn>,
        conds: &[EncryptedColumn],
    ) -> Result<Ciphertext> {
        match pred {
            Predicate::Atom(a) => self.atom_mask(a, cols, conds),
            Predicate::And(v) => {
                let masks = v.iter().map(|p| self.predicate_eval(p, cols, conds)).collect::<Result<Vec<_>>>()?;
                self.product_tree(masks)
            }
            Predicate::Or(v) => {
                // x or y = 1 - (1 - x)(1 - y)
                let inv = v
                    .iter()
                    .map(|p| self.complement(&self.predicate_eval(p, cols, conds)?))
                    .collect::<Result<Vec<_>>>()?;
                self.complement(&self.product_tree(inv)?)
            }
            Predicate::Not(p) => self.complement(&self.predicate_eval(p, cols, conds)?),
        }
    }

    /// Rotate-and-add over all slots; every slot ends up holding the total.
    pub fn rotate_sum(&self, ct: &Ciphertext) -> Result<Ciphertext> {
        let mut acc = ct.try_clone()?;
        let mut s = 1;
        while s < self.ctx.slots() {
            let r = ckks::rotate(&self.ctx, &acc, s as i64, &self.gk)?;
            acc = ckks::add(&self.ctx, &acc, &r)?;
            s <<= 1;
        }
        Ok(acc)
    }

    fn plain_at(&self, values: &[f64], scale: f64, level: usize, origin: PlainOrigin) -> Result<Plaintext> {
        self.record(origin);
        Ok(ckks::encode_real(&self.ctx, values, scale, level)?)
    }

    /// Zeroes slots past the last row.
    pub fn restrict_rows(&self, mask: &Ciphertext) -> Result<Ciphertext> {
        let l = mask.level();
        let pt = self.plain_at(&vec![1.0; self.cfg.rows], self.scales[l], l, PlainOrigin::Validity)?;
        Ok(self.snap(ckks::rescale(&self.ctx, &ckks::multiply_plain(&self.ctx, mask, &pt)?)?))
    }

    pub fn sample_mask(&self, rng: &mut Rng) -> Vec<f64> {
        let (lo, hi) = (self.cfg.mask_min, self.cfg.mask_max);
        (0..self.ctx.slots())
            .map(|_| {
                let m = lo + rng.uniform_f64() * (hi - lo);
                if rng.below(2) == 0 {
                    m
                } else {
                    -m
                }
            })
            .collect()
    }

    /// Server half of the two-party reciprocal: mask by `r`, let the client
    /// invert, unmask.
    pub fn inverse(&self, x: &Ciphertext, rng: &mut Rng, client: &mut InverseFn<'_>) -> Result<Ciphertext> {
        let r = self.sample_mask(rng);
        let l = x.level();
        let masked = ckks::multiply_plain(&self.ctx, x, &self.plain_at(&r, self.scales[l], l, PlainOrigin::Mask)?)?;
        let c1 = self.snap(ckks::rescale(&self.ctx, &masked)?);
        let y = client(c1)?;
        let ly = y.level();
        let pt = self.plain_at(&r, self.ctx.default_scale(), ly, PlainOrigin::Mask)?;
        Ok(ckks::rescale(&self.ctx, &ckks::multiply_plain(&self.ctx, &y, &pt)?)?)
    }

    fn value_of<'a>(&self, cols: &'a HashMap<String, EncryptedColumn>, name: &str) -> Result<&'a Ciphertext> {
        cols.get(name)
            .and_then(|c| c.value.as_ref())
            .ok_or_else(|| PdqError::Query(format!("column {name} has no value ciphertext")))
    }

    pub fn query_index(&self, spec: &QuerySpec, cols: &HashMap<String, EncryptedColumn>, conds: &[EncryptedColumn]) -> Result<Ciphertext> {
        self.predicate_eval(&spec.predicate, cols, conds)
    }

    pub fn masked_sum(&self, mask: &Ciphertext, value: &Ciphertext) -> Result<Ciphertext> {
        self.rotate_sum(&self.mul(mask, value)?)
    }

    /// Runs `spec`; `inverse` is called for the reciprocal sub-protocol.
    pub fn run(
        &self,
        spec: &QuerySpec,
        cols: &HashMap<String, EncryptedColumn>,
        conds: &[EncryptedColumn],
        rng: &mut Rng,
        inverse: &mut InverseFn<'_>,
    ) -> Result<Ciphertext> {
        let mask = self.predicate_eval(&spec.predicate, cols, conds)?;
        match &spec.aggregator {
            Aggregator::Index => Ok(mask),
            Aggregator::Sum(c) => self.masked_sum(&mask, self.value_of(cols, c)?),
            Aggregator::Avg(c) => {
                let mask = self.restrict_rows(&mask)?;
                let sum = self.masked_sum(&mask, self.value_of(cols, c)?)?;
                let count = self.rotate_sum(&mask)?;
                let inv = self.inverse(&count, rng, inverse)?;
                self.mul_free(&sum, &inv)
            }
            Aggregator::DivSquare { num, den } => {
                let mask = self.restrict_rows(&mask)?;
                let b = self.value_of(cols, den)?;
                let b2 = self.mul(b, b)?;
                // rows outside the filter get denominator 1, never 0
                let d = self.add(&self.mul(&b2, &mask)?, &self.complement(&mask)?)?;
                let inv = self.inverse(&d, rng, inverse)?;
                let n = self.mul(self.value_of(cols, num)?, &mask)?;
                let q = self.mul_free(&n, &inv)?;
                self.mul_free(&q, &mask)
            }
        }
    }
}
