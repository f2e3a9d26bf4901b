//! Per-operator timings. Each operator's output is checked once before
//! it is timed.

use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, ensure, Result};
use num_complex::Complex64;
use rnsfhe::batch::{batch_decode, batch_encode, decode_coeffs, encode_coeffs};
use rnsfhe::ckks::{self, MulMode};
use rnsfhe::context::{Context, EncryptionParams, Profile, Scheme};
use rnsfhe::keys::{galois_keygen, keygen, pk_gen, relin_keygen};
use rnsfhe::{bfv, bgv, Ciphertext, GaloisKeys, PoolConfig, PublicKey, RelinKey, Rng, SecretKey};

use crate::report::{BenchReport, OpTiming};

pub const CKKS_OPS: [&str; 13] = [
    "encode",
    "decode",
    "encrypt",
    "decrypt",
    "add",
    "multiply",
    "multiply_plain",
    "square",
    "relinearize",
    "rescale",
    "rotate_vector_one_step",
    "rotate_vector_random",
    "complex_conjugate",
];

pub const BFV_OPS: [&str; 11] = [
    "encode_batch",
    "encrypt",
    "decrypt",
    "add",
    "multiply",
    "multiply_plain",
    "square",
    "relinearize",
    "rotate_vector_one_step",
    "rotate_vector_random",
    "rotate_columns",
];

pub const BGV_OPS: [&str; 12] = [
    "encode_batch",
    "encode_unbatch",
    "encrypt",
    "decrypt",
    "add",
    "multiply",
    "multiply_plain",
    "square",
    "relinearize",
    "rotate_rows_one_step",
    "rotate_rows_random",
    "rotate_columns",
];

pub fn operator_names(scheme: Scheme) -> &'static [&'static str] {
    match scheme {
        Scheme::Ckks => &CKKS_OPS,
        Scheme::Bfv => &BFV_OPS,
        Scheme::Bgv => &BGV_OPS,
    }
}

struct Bench {
    reps: usize,
    only: Option<Vec<String>>,
    ops: Vec<OpTiming>,
}

impl Bench {
    fn wants(&self, name: &str) -> bool {
        self.only.as_ref().is_none_or(|v| v.iter().any(|x| x == name))
    }

    /// Runs `op` once, checks the output, then times `reps` runs.
    fn run<T>(&mut self, name: &str, mut op: impl FnMut() -> Result<T>, check: impl FnOnce(&T) -> Result<()>) -> Result<()> {
        if !self.wants(name) {
            return Ok(());
        }
        let first = op()?;
        check(&first).map_err(|e| anyhow::anyhow!("{name}: {e}"))?;
        drop(first);
        let mut samples = Vec::with_capacity(self.reps);
        for _ in 0..self.reps {
            let t = Instant::now();
            let out = op()?;
            samples.push(t.elapsed().as_secs_f64() * 1e6);
            drop(out);
        }
        self.ops.push(OpTiming::from_samples(name, &samples));
        Ok(())
    }
}

struct Keys {
    ctx: Arc<Context>,
    sk: SecretKey,
    pk: PublicKey,
    rlk: RelinKey,
    gk: GaloisKeys,
    random_step: i64,
    rng: Rng,
}

fn keys(profile: Profile, scheme: Scheme, seed: u64) -> Result<Keys> {
    let ctx = Context::new(EncryptionParams::for_profile(profile, scheme)?, PoolConfig::desk())?;
    let mut rng = Rng::seed_from_u64(seed);
    let sk = keygen(&ctx, &mut rng)?;
    let pk = pk_gen(&ctx, &sk, &mut rng)?;
    let rlk = relin_keygen(&ctx, &sk, &mut rng)?;
    // the random step is drawn up front so its key exists before timing
    let half = match scheme {
        Scheme::Ckks => ctx.slots(),
        _ => ctx.n() / 2,
    };
    let random_step = 2 + rng.below(half as u64 - 3) as i64;
    let gk = galois_keygen(&ctx, &sk, &[1, random_step], true, &mut rng)?;
    Ok(Keys { ctx, sk, pk, rlk, gk, random_step, rng })
}

fn close(got: &[Complex64], want: &[Complex64], tol: f64) -> Result<()> {
    let err = got.iter().zip(want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    ensure!(err <= tol, "max error {err:e} above {tol:e}");
    Ok(())
}

fn equal(got: Vec<u64>, want: &[u64]) -> Result<()> {
    if got != want {
        let bad = got.iter().zip(want).filter(|(a, b)| a != b).count();
        bail!("{bad} slots differ");
    }
    Ok(())
}

/// Times every operator row for `scheme`; `only` restricts to named rows.
pub fn bench_operators(scheme: Scheme, profile: Profile, reps: usize, seed: u64, only: Option<Vec<String>>) -> Result<BenchReport> {
    ensure!(reps >= 1, "reps must be at least 1");
    if let Some(v) = &only {
        for name in v {
            ensure!(operator_names(scheme).contains(&name.as_str()), "unknown operator {name}");
        }
    }
    let mut k = keys(profile, scheme, seed)?;
    let mut b = Bench { reps, only, ops: Vec::new() };
    match scheme {
        Scheme::Ckks => bench_ckks(&mut b, &mut k)?,
        Scheme::Bfv => bench_bfv(&mut b, &mut k)?,
        Scheme::Bgv => bench_bgv(&mut b, &mut k)?,
    }
    let ctx = &k.ctx;
    Ok(BenchReport {
        scheme: format!("{scheme:?}").to_lowercase(),
        profile: format!("{profile:?}").to_lowercase(),
        n: ctx.n(),
        levels: ctx.max_level(),
        q_bits: ctx.moduli().iter().map(|q| 64 - q.value().leading_zeros()).sum(),
        seed,
        ops: b.ops,
    })
}

fn bench_ckks(b: &mut Bench, k: &mut Keys) -> Result<()> {
    let ctx = k.ctx.clone();
    let (top, delta, slots) = (ctx.max_level(), ctx.default_scale(), ctx.slots());
    let mut vr = Rng::seed_from_u64(k.random_step as u64);
    let mut vec = || -> Vec<Complex64> {
        (0..slots).map(|_| Complex64::new(2.0 * vr.uniform_f64() - 1.0, 2.0 * vr.uniform_f64() - 1.0)).collect()
    };
    let (x, y) = (vec(), vec());
    let tol = 1e-3;
    let dec = |c: &Ciphertext, sk: &SecretKey| ckks::decode(&ctx, &ckks::decrypt(&ctx, c, sk).unwrap()).unwrap();

    b.run("encode", || Ok(ckks::encode(&ctx, &x, delta, top)?), |p| close(&ckks::decode(&ctx, p)?, &x, 1e-6))?;
    let px = ckks::encode(&ctx, &x, delta, top)?;
    let py = ckks::encode(&ctx, &y, delta, top)?;
    b.run("decode", || Ok(ckks::decode(&ctx, &px)?), |v| close(v, &x, 1e-6))?;
    let rng = &mut k.rng;
    b.run("encrypt", || Ok(ckks::encrypt(&ctx, &px, &k.pk, rng)?), |c| close(&dec(c, &k.sk), &x, tol))?;
    let cx = ckks::encrypt(&ctx, &px, &k.pk, &mut k.rng)?;
    let cy = ckks::encrypt(&ctx, &py, &k.pk, &mut k.rng)?;
    b.run("decrypt", || Ok(ckks::decrypt(&ctx, &cx, &k.sk)?), |p| close(&ckks::decode(&ctx, p)?, &x, tol))?;
    let sum: Vec<Complex64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
    let prod: Vec<Complex64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
    let sq: Vec<Complex64> = x.iter().map(|a| a * a).collect();
    b.run("add", || Ok(ckks::add(&ctx, &cx, &cy)?), |c| close(&dec(c, &k.sk), &sum, tol))?;
    b.run("multiply", || Ok(ckks::multiply(&ctx, &cx, &cy, MulMode::Fused)?), |c| close(&dec(c, &k.sk), &prod, tol))?;
    b.run("multiply_plain", || Ok(ckks::multiply_plain(&ctx, &cx, &py)?), |c| close(&dec(c, &k.sk), &prod, tol))?;
    b.run("square", || Ok(ckks::square(&ctx, &cx)?), |c| close(&dec(c, &k.sk), &sq, tol))?;
    let m = ckks::multiply(&ctx, &cx, &cy, MulMode::Fused)?;
    b.run("relinearize", || Ok(ckks::relinearize(&ctx, &m, &k.rlk)?), |c| close(&dec(c, &k.sk), &prod, tol))?;
    let r = ckks::relinearize(&ctx, &m, &k.rlk)?;
    b.run("rescale", || Ok(ckks::rescale(&ctx, &r)?), |c| close(&dec(c, &k.sk), &prod, tol))?;
    let rot = |s: usize| (0..slots).map(|i| x[(i + s) % slots]).collect::<Vec<_>>();
    b.run("rotate_vector_one_step", || Ok(ckks::rotate(&ctx, &cx, 1, &k.gk)?), |c| close(&dec(c, &k.sk), &rot(1), tol))?;
    let step = k.random_step;
    b.run("rotate_vector_random", || Ok(ckks::rotate(&ctx, &cx, step, &k.gk)?), |c| close(&dec(c, &k.sk), &rot(step as usize), tol))?;
    let conj: Vec<Complex64> = x.iter().map(|a| a.conj()).collect();
    b.run("complex_conjugate", || Ok(ckks::conjugate(&ctx, &cx, &k.gk)?), |c| close(&dec(c, &k.sk), &conj, tol))?;
    Ok(())
}

/// Shared BFV/BGV rows; the two schemes differ only in dispatch.
struct IntOps {
    encrypt: fn(&Context, &rnsfhe::Plaintext, &PublicKey, &mut Rng) -> rnsfhe::Result<Ciphertext>,
    decrypt: fn(&Context, &Ciphertext, &SecretKey) -> rnsfhe::Result<rnsfhe::Plaintext>,
    add: fn(&Context, &Ciphertext, &Ciphertext) -> rnsfhe::Result<Ciphertext>,
    multiply: fn(&Context, &Ciphertext, &Ciphertext) -> rnsfhe::Result<Ciphertext>,
    multiply_plain: fn(&Context, &Ciphertext, &rnsfhe::Plaintext) -> rnsfhe::Result<Ciphertext>,
    square: fn(&Context, &Ciphertext) -> rnsfhe::Result<Ciphertext>,
    relinearize: fn(&Context, &Ciphertext, &RelinKey) -> rnsfhe::Result<Ciphertext>,
    rotate_rows: fn(&Context, &Ciphertext, i64, &GaloisKeys) -> rnsfhe::Result<Ciphertext>,
    rotate_columns: fn(&Context, &Ciphertext, &GaloisKeys) -> rnsfhe::Result<Ciphertext>,
}

fn bench_integer(b: &mut Bench, k: &mut Keys, ops: IntOps, names: [&str; 2]) -> Result<()> {
    let ctx = k.ctx.clone();
    let n = ctx.n();
    let t = ctx.plain_modulus().expect("integer scheme");
    let mut vr = Rng::seed_from_u64(k.random_step as u64);
    let x: Vec<u64> = (0..n).map(|_| vr.below(t)).collect();
    let y: Vec<u64> = (0..n).map(|_| vr.below(t)).collect();
    let dec = |c: &Ciphertext, sk: &SecretKey| batch_decode(&ctx, &(ops.decrypt)(&ctx, c, sk).unwrap()).unwrap();

    b.run("encode_batch", || Ok(batch_encode(&ctx, &x)?), |p| equal(batch_decode(&ctx, p)?, &x))?;
    if ctx.scheme() == Scheme::Bgv {
        b.run("encode_unbatch", || Ok(encode_coeffs(&ctx, &x)?), |p| equal(decode_coeffs(&ctx, p)?, &x))?;
    }
    let px = batch_encode(&ctx, &x)?;
    let py = batch_encode(&ctx, &y)?;
    let rng = &mut k.rng;
    b.run("encrypt", || Ok((ops.encrypt)(&ctx, &px, &k.pk, rng)?), |c| equal(dec(c, &k.sk), &x))?;
    let cx = (ops.encrypt)(&ctx, &px, &k.pk, &mut k.rng)?;
    let cy = (ops.encrypt)(&ctx, &py, &k.pk, &mut k.rng)?;
    b.run("decrypt", || Ok((ops.decrypt)(&ctx, &cx, &k.sk)?), |p| equal(batch_decode(&ctx, p)?, &x))?;
    let zip = |g: &dyn Fn(u64, u64) -> u64| x.iter().zip(&y).map(|(&a, &b)| g(a, b)).collect::<Vec<_>>();
    let prod = zip(&|a, b| a * b % t);
    b.run("add", || Ok((ops.add)(&ctx, &cx, &cy)?), |c| equal(dec(c, &k.sk), &zip(&|a, b| (a + b) % t)))?;
    b.run("multiply", || Ok((ops.multiply)(&ctx, &cx, &cy)?), |c| equal(dec(c, &k.sk), &prod))?;
    b.run("multiply_plain", || Ok((ops.multiply_plain)(&ctx, &cx, &py)?), |c| equal(dec(c, &k.sk), &prod))?;
    b.run("square", || Ok((ops.square)(&ctx, &cx)?), |c| equal(dec(c, &k.sk), &zip(&|a, _| a * a % t)))?;
    let m = (ops.multiply)(&ctx, &cx, &cy)?;
    b.run("relinearize", || Ok((ops.relinearize)(&ctx, &m, &k.rlk)?), |c| equal(dec(c, &k.sk), &prod))?;
    let half = n / 2;
    let rot = |s: usize| (0..n).map(|i| x[(i / half) * half + (i % half + s) % half]).collect::<Vec<_>>();
    b.run(names[0], || Ok((ops.rotate_rows)(&ctx, &cx, 1, &k.gk)?), |c| equal(dec(c, &k.sk), &rot(1)))?;
    let step = k.random_step;
    b.run(names[1], || Ok((ops.rotate_rows)(&ctx, &cx, step, &k.gk)?), |c| equal(dec(c, &k.sk), &rot(step as usize)))?;
    let swapped: Vec<u64> = (0..n).map(|i| x[(i + half) % n]).collect();
    b.run("rotate_columns", || Ok((ops.rotate_columns)(&ctx, &cx, &k.gk)?), |c| equal(dec(c, &k.sk), &swapped))?;
    Ok(())
}

fn bench_bfv(b: &mut Bench, k: &mut Keys) -> Result<()> {
    let ops = IntOps {
        encrypt: bfv::encrypt,
        decrypt: bfv::decrypt,
        add: bfv::add,
        multiply: bfv::multiply,
        multiply_plain: bfv::multiply_plain,
        square: bfv::square,
        relinearize: bfv::relinearize,
        rotate_rows: bfv::rotate_rows,
        rotate_columns: bfv::rotate_columns,
    };
    bench_integer(b, k, ops, ["rotate_vector_one_step", "rotate_vector_random"])
}

fn bench_bgv(b: &mut Bench, k: &mut Keys) -> Result<()> {
    let ops = IntOps {
        encrypt: bgv::encrypt,
        decrypt: bgv::decrypt,
        add: bgv::add,
        multiply: bgv::multiply,
        multiply_plain: bgv::multiply_plain,
        square: bgv::square,
        relinearize: bgv::relinearize,
        rotate_rows: bgv::rotate_rows,
        rotate_columns: bgv::rotate_columns,
    };
    bench_integer(b, k, ops, ["rotate_rows_one_step", "rotate_rows_random"])
}
