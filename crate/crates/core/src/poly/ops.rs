//! Element-wise RNS polynomial arithmetic.
//!
//! Every operation is split into one task per residue row and dispatched on
//! the worker lanes. Row `r` of a buffer with `L` moduli uses `tables[r % L]`.

use crate::error::{Error, Result};
use crate::math::modulus::Modulus;
use crate::math::ntt::{NttPolicy, NttTables, NttVariant};
use crate::poly::cdata::{CData, Domain};
use crate::pool::WorkerPool;

fn check_tables(cd: &CData, tables: &[NttTables]) -> Result<()> {
    if tables.len() < cd.size_modulus() {
        return Err(Error::Shape(format!(
            "{} residues but only {} moduli",
            cd.size_modulus(),
            tables.len()
        )));
    }
    for t in tables.iter().take(cd.size_modulus()) {
        if t.degree() != cd.n() {
            return Err(Error::Shape(format!("degree {} vs tables for {}", cd.n(), t.degree())));
        }
    }
    Ok(())
}

fn same_domains(a: &CData, b: &CData) -> Result<()> {
    if a.domains() != b.domains() {
        return Err(Error::Domain(format!("{:?} vs {:?}", a.domains(), b.domains())));
    }
    Ok(())
}

fn prepare_out(a: &CData, out: &mut CData) -> Result<()> {
    if out.shape() != a.shape() {
        out.resize(a.size_poly(), a.size_modulus())?;
        if out.shape() != a.shape() {
            return Err(Error::Shape(format!("output {:?} vs {:?}", out.shape(), a.shape())));
        }
    }
    for p in 0..a.size_poly() {
        out.set_domain(p, a.domain(p));
    }
    Ok(())
}

/// `f(q, out_row, a_row)` over every row.
pub fn map_rows<F>(a: &CData, out: &mut CData, tables: &[NttTables], lanes: &WorkerPool, f: F) -> Result<()>
where
    F: Fn(&Modulus, &mut [u64], &[u64]) + Send + Sync,
{
    check_tables(a, tables)?;
    prepare_out(a, out)?;
    let l = a.size_modulus();
    let tasks: Vec<_> = out.rows_mut().zip(a.rows()).collect();
    lanes.par_for_each_modulus(tasks, |r, (o, x)| f(tables[r % l].modulus(), o, x));
    Ok(())
}

/// `f(q, out_row, a_row, b_row)` over every row.
pub fn zip_rows<F>(
    a: &CData,
    b: &CData,
    out: &mut CData,
    tables: &[NttTables],
    lanes: &WorkerPool,
    f: F,
) -> Result<()>
where
    F: Fn(&Modulus, &mut [u64], &[u64], &[u64]) + Send + Sync,
{
    a.check_shape(b)?;
    same_domains(a, b)?;
    check_tables(a, tables)?;
    prepare_out(a, out)?;
    let l = a.size_modulus();
    let tasks: Vec<_> = out.rows_mut().zip(a.rows().zip(b.rows())).collect();
    lanes.par_for_each_modulus(tasks, |r, (o, (x, y))| f(tables[r % l].modulus(), o, x, y));
    Ok(())
}

/// In-place `f(q, a_row, b_row)`.
pub fn zip_rows_inplace<F>(a: &mut CData, b: &CData, tables: &[NttTables], lanes: &WorkerPool, f: F) -> Result<()>
where
    F: Fn(&Modulus, &mut [u64], &[u64]) + Send + Sync,
{
    a.check_shape(b)?;
    same_domains(a, b)?;
    check_tables(a, tables)?;
    let l = a.size_modulus();
    let tasks: Vec<_> = a.rows_mut().zip(b.rows()).collect();
    lanes.par_for_each_modulus(tasks, |r, (x, y)| f(tables[r % l].modulus(), x, y));
    Ok(())
}

pub fn poly_add(a: &CData, b: &CData, out: &mut CData, tables: &[NttTables], lanes: &WorkerPool) -> Result<()> {
    zip_rows(a, b, out, tables, lanes, |q, o, x, y| {
        for ((o, &x), &y) in o.iter_mut().zip(x).zip(y) {
            *o = q.add(x, y);
        }
    })
}

pub fn poly_sub(a: &CData, b: &CData, out: &mut CData, tables: &[NttTables], lanes: &WorkerPool) -> Result<()> {
    zip_rows(a, b, out, tables, lanes, |q, o, x, y| {
        for ((o, &x), &y) in o.iter_mut().zip(x).zip(y) {
            *o = q.sub(x, y);
        }
    })
}

pub fn poly_negate(a: &CData, out: &mut CData, tables: &[NttTables], lanes: &WorkerPool) -> Result<()> {
    map_rows(a, out, tables, lanes, |q, o, x| {
        for (o, &x) in o.iter_mut().zip(x) {
            *o = q.neg(x);
        }
    })
}

pub fn add_inplace(a: &mut CData, b: &CData, tables: &[NttTables], lanes: &WorkerPool) -> Result<()> {
    zip_rows_inplace(a, b, tables, lanes, |q, x, y| {
        for (x, &y) in x.iter_mut().zip(y) {
            *x = q.add(*x, y);
        }
    })
}

pub fn sub_inplace(a: &mut CData, b: &CData, tables: &[NttTables], lanes: &WorkerPool) -> Result<()> {
    zip_rows_inplace(a, b, tables, lanes, |q, x, y| {
        for (x, &y) in x.iter_mut().zip(y) {
            *x = q.sub(*x, y);
        }
    })
}

pub fn negate_inplace(a: &mut CData, tables: &[NttTables], lanes: &WorkerPool) -> Result<()> {
    check_tables(a, tables)?;
    let l = a.size_modulus();
    let tasks: Vec<_> = a.rows_mut().collect();
    lanes.par_for_each_modulus(tasks, |r, x| {
        let q = tables[r % l].modulus();
        x.iter_mut().for_each(|v| *v = q.neg(*v));
    });
    Ok(())
}

pub fn poly_mul_pointwise(
    a: &CData,
    b: &CData,
    out: &mut CData,
    tables: &[NttTables],
    lanes: &WorkerPool,
) -> Result<()> {
    a.check_domain(Domain::Evaluation)?;
    zip_rows(a, b, out, tables, lanes, |q, o, x, y| {
        for ((o, &x), &y) in o.iter_mut().zip(x).zip(y) {
            *o = q.mul(x, y);
        }
    })
}

/// `out = -(a * b)` in one pass.
pub fn fused_neg_multiply(
    a: &CData,
    b: &CData,
    out: &mut CData,
    tables: &[NttTables],
    lanes: &WorkerPool,
) -> Result<()> {
    a.check_domain(Domain::Evaluation)?;
    zip_rows(a, b, out, tables, lanes, |q, o, x, y| {
        for ((o, &x), &y) in o.iter_mut().zip(x).zip(y) {
            *o = q.neg(q.mul(x, y));
        }
    })
}

/// `out = a * b + c` in one pass.
pub fn fused_mul_add(
    a: &CData,
    b: &CData,
    c: &CData,
    out: &mut CData,
    tables: &[NttTables],
    lanes: &WorkerPool,
) -> Result<()> {
    a.check_domain(Domain::Evaluation)?;
    a.check_shape(c)?;
    same_domains(a, c)?;
    a.check_shape(b)?;
    same_domains(a, b)?;
    check_tables(a, tables)?;
    prepare_out(a, out)?;
    let l = a.size_modulus();
    let tasks: Vec<_> = out.rows_mut().zip(a.rows().zip(b.rows()).zip(c.rows())).collect();
    lanes.par_for_each_modulus(tasks, |r, (o, ((x, y), z))| {
        let q = tables[r % l].modulus();
        for (((o, &x), &y), &z) in o.iter_mut().zip(x).zip(y).zip(z) {
            *o = q.add(q.mul(x, y), z);
        }
    });
    Ok(())
}

/// Multiplies every polynomial of `a` by the single polynomial `b`.
pub fn mul_broadcast(
    a: &CData,
    b: &CData,
    out: &mut CData,
    tables: &[NttTables],
    lanes: &WorkerPool,
) -> Result<()> {
    a.check_domain(Domain::Evaluation)?;
    b.check_domain(Domain::Evaluation)?;
    if b.size_poly() != 1 || b.size_modulus() != a.size_modulus() || b.n() != a.n() {
        return Err(Error::Shape(format!("broadcast {:?} over {:?}", b.shape(), a.shape())));
    }
    check_tables(a, tables)?;
    prepare_out(a, out)?;
    let l = a.size_modulus();
    let b_rows: Vec<&[u64]> = b.rows().collect();
    let tasks: Vec<_> = out.rows_mut().zip(a.rows()).collect();
    lanes.par_for_each_modulus(tasks, |r, (o, x)| {
        let q = tables[r % l].modulus();
        for ((o, &x), &y) in o.iter_mut().zip(x).zip(b_rows[r % l]) {
            *o = q.mul(x, y);
        }
    });
    Ok(())
}

/// Multiplies residue row `j` of every polynomial by `scalars[j]`.
pub fn mul_scalar_inplace(a: &mut CData, scalars: &[u64], tables: &[NttTables], lanes: &WorkerPool) -> Result<()> {
    check_tables(a, tables)?;
    let l = a.size_modulus();
    if scalars.len() < l {
        return Err(Error::Shape(format!("{} scalars for {l} moduli", scalars.len())));
    }
    let tasks: Vec<_> = a.rows_mut().collect();
    lanes.par_for_each_modulus(tasks, |r, x| {
        let q = tables[r % l].modulus();
        let s = scalars[r % l];
        let ss = q.shoup(s);
        x.iter_mut().for_each(|v| *v = q.mul_shoup(*v, s, ss));
    });
    Ok(())
}

/// Adds `scalars[j]` to every coefficient of residue row `j` of polynomial `p`.
pub fn add_scalar_inplace(
    a: &mut CData,
    p: usize,
    scalars: &[u64],
    tables: &[NttTables],
    lanes: &WorkerPool,
) -> Result<()> {
    check_tables(a, tables)?;
    let n = a.n();
    let tasks: Vec<_> = a.poly_mut(p).chunks_mut(n).collect();
    lanes.par_for_each_modulus(tasks, |j, x| {
        let q = tables[j].modulus();
        x.iter_mut().for_each(|v| *v = q.add(*v, scalars[j]));
    });
    Ok(())
}

/// Forward NTT of every coefficient-domain polynomial.
pub fn to_eval(a: &mut CData, tables: &[NttTables], policy: NttPolicy, lanes: &WorkerPool) -> Result<()> {
    transform(a, tables, policy, lanes, Domain::Coefficient, Domain::Evaluation)
}

/// Inverse NTT of every evaluation-domain polynomial.
pub fn to_coeff(a: &mut CData, tables: &[NttTables], policy: NttPolicy, lanes: &WorkerPool) -> Result<()> {
    transform(a, tables, policy, lanes, Domain::Evaluation, Domain::Coefficient)
}

fn transform(
    a: &mut CData,
    tables: &[NttTables],
    policy: NttPolicy,
    lanes: &WorkerPool,
    from: Domain,
    to: Domain,
) -> Result<()> {
    check_tables(a, tables)?;
    let n = a.n();
    let l = a.size_modulus();
    let variant = policy.resolve(n);
    if variant == NttVariant::Matrix && !tables[0].matrix_enabled() {
        return Err(Error::Config(format!("matrix NTT not enabled for n = {n}")));
    }
    let flags: Vec<bool> = a.domains().iter().map(|&d| d == from).collect();
    let mut tasks = Vec::new();
    for (r, row) in a.rows_mut().enumerate() {
        if flags[r / l] {
            tasks.push((r % l, row));
        }
    }
    let forward = to == Domain::Evaluation;
    lanes.par_for_each_modulus(tasks, |_, (j, row)| {
        let t = &tables[j];
        let res = match (forward, variant) {
            (true, NttVariant::Butterfly) => {
                t.forward_bm_unchecked(row);
                Ok(())
            }
            (false, NttVariant::Butterfly) => {
                t.inverse_bm_unchecked(row);
                Ok(())
            }
            (true, NttVariant::Matrix) => t.forward_mm(row),
            (false, NttVariant::Matrix) => t.inverse_mm(row),
        };
        res.expect("matrix availability checked above");
    });
    a.set_all_domains(to);
    Ok(())
}

/// `out = a * b mod (X^n + 1)` per residue, coefficient domain in and out.
pub fn poly_negacyclic_mul(
    a: &CData,
    b: &CData,
    out: &mut CData,
    tables: &[NttTables],
    policy: NttPolicy,
    lanes: &WorkerPool,
) -> Result<()> {
    a.check_domain(Domain::Coefficient)?;
    b.check_domain(Domain::Coefficient)?;
    let mut x = a.try_clone()?;
    let mut y = b.try_clone()?;
    to_eval(&mut x, tables, policy, lanes)?;
    to_eval(&mut y, tables, policy, lanes)?;
    poly_mul_pointwise(&x, &y, out, tables, lanes)?;
    to_coeff(out, tables, policy, lanes)
}

pub fn drop_last_modulus(cd: &mut CData) -> Result<()> {
    cd.drop_last_modulus()
}

/// True if every coefficient is below its residue modulus.
pub fn is_reduced(a: &CData, tables: &[NttTables]) -> bool {
    let l = a.size_modulus();
    a.rows()
        .enumerate()
        .all(|(r, row)| row.iter().all(|&x| x < tables[r % l].modulus().value()))
}
