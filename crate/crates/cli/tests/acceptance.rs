//! One line per acceptance criterion. Exits 0 unless
//! `RNSFHE_ACCEPT_STRICT=1` is set and a criterion failed.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::ToPrimitive;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pdq::transport::{pipe_pair, Framed};
use pdq::wire::{Frame, MsgType, PayloadWriter};
use pdq::{Client, Engine, PdqConfig, QuerySpec, Server, ServerConfig, Session, Transport, TransportKind};
use rnsfhe::batch::{batch_decode, batch_encode, decode_coeffs, encode_coeffs};
use rnsfhe::ckks::{self, MulMode};
use rnsfhe::keys::{galois_keygen, keygen, pk_gen, relin_keygen};
use rnsfhe::math::lookup::{build_lookup_table, lookup_mod};
use rnsfhe::math::ntt::{NttPolicy, NttTables};
use rnsfhe::math::prime::gen_ntt_primes;
use rnsfhe::pool::memory::{arena_capacity_mb, MemoryPool};
use rnsfhe::{bfv, bgv, Ciphertext, Context, EncryptionParams, GaloisKeys, PoolConfig, PoolMode, Profile, Scheme};
use rnsfhe_cli::ablate;
use rnsfhe_cli::pdqrun::{run_pdq, PdqOptions, PdqReport};

const T: u64 = 65537;

type Outcome = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration, detail: String) -> Outcome {
    let t = start.elapsed();
    if t < limit {
        Ok(detail)
    } else {
        Err(format!("{detail}; took {:.1} s, limit {} s", t.as_secs_f64(), limit.as_secs()))
    }
}

fn keyed(params: EncryptionParams, seed: u64) -> (Arc<Context>, rnsfhe::SecretKey, rnsfhe::PublicKey, rnsfhe::RelinKey, rnsfhe::Rng) {
    let ctx = Context::new(params, PoolConfig::desk()).unwrap();
    let mut r = rnsfhe::Rng::seed_from_u64(seed);
    let sk = keygen(&ctx, &mut r).unwrap();
    let pk = pk_gen(&ctx, &sk, &mut r).unwrap();
    let rlk = relin_keygen(&ctx, &sk, &mut r).unwrap();
    (ctx, sk, pk, rlk, r)
}

// ---- 1: modular arithmetic and NTT

fn schoolbook(a: &[u64], b: &[u64], q: u64) -> Vec<u64> {
    let n = a.len();
    let q = q as u128;
    let mut out = vec![0u128; n];
    for i in 0..n {
        for j in 0..n {
            let p = a[i] as u128 * b[j] as u128 % q;
            let k = (i + j) % n;
            out[k] = if i + j < n { (out[k] + p) % q } else { (out[k] + q - p) % q };
        }
    }
    out.into_iter().map(|x| x as u64).collect()
}

fn c1_math() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let mut cases = 0u64;
    while cases < 1_000_000 {
        let y = r.gen_range(2u64..=u64::MAX >> 1);
        let w = r.gen_range(1..=16);
        let t = build_lookup_table(y, w).map_err(|e| e.to_string())?;
        let bounds = [0, 1, y - 1, y, y + 1, y.saturating_mul(2), u64::MAX, u64::MAX - 1];
        for x in bounds.into_iter().chain((0..1000).map(|_| r.gen::<u64>())) {
            check(lookup_mod(x, &t) == x % y, || format!("lookup {x} mod {y} (window {w})"))?;
            cases += 1;
        }
    }
    let mut n = 16;
    while n <= 32768 {
        let q = gen_ntt_primes(50, n, 1, &[]).map_err(|e| e.to_string())?[0];
        let t = NttTables::with_matrix(n, q, n <= 2048).map_err(|e| e.to_string())?;
        let a: Vec<u64> = (0..n).map(|_| r.gen_range(0..q.value())).collect();
        let mut x = a.clone();
        t.forward_bm(&mut x).unwrap();
        let fwd = x.clone();
        t.inverse_bm(&mut x).unwrap();
        check(x == a, || format!("butterfly round trip at n = {n}"))?;
        if n <= 2048 {
            let mut y = a.clone();
            t.forward_mm(&mut y).unwrap();
            check(y == fwd, || format!("matrix NTT differs at n = {n}"))?;
            t.inverse_mm(&mut y).unwrap();
            check(y == a, || format!("matrix round trip at n = {n}"))?;
        }
        if n <= 64 {
            let b: Vec<u64> = (0..n).map(|_| r.gen_range(0..q.value())).collect();
            let want = schoolbook(&a, &b, q.value());
            for policy in [NttPolicy::ForceBm, NttPolicy::ForceMm] {
                let (mut x, mut y) = (a.clone(), b.clone());
                t.forward(&mut x, policy).unwrap();
                t.forward(&mut y, policy).unwrap();
                let mut z: Vec<u64> = x.iter().zip(&y).map(|(&u, &v)| q.mul(u, v)).collect();
                t.inverse(&mut z, policy).unwrap();
                check(z == want, || format!("NTT product differs from schoolbook at n = {n}"))?;
            }
        }
        n *= 2;
    }
    // smaller rings for the product check
    for n in [2usize, 4, 8] {
        let q = gen_ntt_primes(40, n, 1, &[]).unwrap()[0];
        let t = NttTables::new(n, q).unwrap();
        let a: Vec<u64> = (0..n).map(|_| r.gen_range(0..q.value())).collect();
        let b: Vec<u64> = (0..n).map(|_| r.gen_range(0..q.value())).collect();
        let (mut x, mut y) = (a.clone(), b.clone());
        t.forward_bm(&mut x).unwrap();
        t.forward_bm(&mut y).unwrap();
        let mut z: Vec<u64> = x.iter().zip(&y).map(|(&u, &v)| q.mul(u, v)).collect();
        t.inverse_bm(&mut z).unwrap();
        check(z == schoolbook(&a, &b, q.value()), || format!("NTT product differs from schoolbook at n = {n}"))?;
    }
    within(start, Duration::from_secs(120), format!("{cases} remainders exact; NTT n = 2..32768 exact"))
}

// ---- 2: BFV

fn negacyclic(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let n = a.len();
    let mut out = vec![BigInt::from(0); n];
    for i in 0..n {
        for j in 0..n {
            let p = &a[i] * &b[j];
            if i + j < n {
                out[i + j] += p;
            } else {
                out[i + j - n] -= p;
            }
        }
    }
    out
}

fn lift(ctx: &Context, ct: &Ciphertext, p: usize) -> Vec<BigInt> {
    let level = ct.level();
    let rows: Vec<Vec<u64>> = (0..level)
        .map(|j| {
            let mut r = ct.data().row(p, j).to_vec();
            ctx.q_tables()[j].inverse(&mut r, ctx.policy()).unwrap();
            r
        })
        .collect();
    let base = ctx.level_base(level);
    (0..ctx.n()).map(|i| base.reconstruct_centered(&rows.iter().map(|r| r[i]).collect::<Vec<_>>())).collect()
}

fn centered(x: &BigInt, q: &BigInt) -> BigInt {
    let r = x.mod_floor(q);
    if &r * 2 > *q {
        r - q
    } else {
        r
    }
}

fn round_div(x: &BigInt, q: &BigInt) -> BigInt {
    let num: BigInt = x * 2 + q;
    num.div_floor(&(q * 2))
}

/// Multiplies by exact integer tensoring and `round(t/Q * d)`, then decrypts
/// with the textbook formula.
fn textbook_product(ctx: &Context, a: &Ciphertext, b: &Ciphertext, s: &[i8]) -> Vec<u64> {
    let q = BigInt::from(ctx.base().big_q().clone());
    let t = BigInt::from(T);
    let (a0, a1, b0, b1) = (lift(ctx, a, 0), lift(ctx, a, 1), lift(ctx, b, 0), lift(ctx, b, 1));
    let mut d1 = negacyclic(&a0, &b1);
    d1.iter_mut().zip(negacyclic(&a1, &b0)).for_each(|(x, y)| *x += y);
    let comps: Vec<Vec<BigInt>> = [negacyclic(&a0, &b0), d1, negacyclic(&a1, &b1)]
        .iter()
        .map(|d| d.iter().map(|x| centered(&round_div(&(x * &t), &q), &q)).collect())
        .collect();
    let s: Vec<BigInt> = s.iter().map(|&c| BigInt::from(c)).collect();
    let s2 = negacyclic(&s, &s);
    let mut phase = comps[0].clone();
    for (c, sp) in comps[1..].iter().zip([&s, &s2]) {
        phase.iter_mut().zip(negacyclic(c, sp)).for_each(|(x, y)| *x += y);
    }
    phase.iter().map(|x| round_div(&(centered(x, &q) * &t), &q).mod_floor(&t).to_u64().unwrap()).collect()
}

fn c2_bfv() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2);
    let (ctx, sk, pk, _, mut fr) = keyed(EncryptionParams::with_prime_sizes(Scheme::Bfv, 64, &[36, 36], 61).unwrap(), 20);
    for _ in 0..20 {
        let ma: Vec<u64> = (0..64).map(|_| r.gen_range(0..T)).collect();
        let mb: Vec<u64> = (0..64).map(|_| r.gen_range(0..T)).collect();
        let a = bfv::encrypt(&ctx, &encode_coeffs(&ctx, &ma).unwrap(), &pk, &mut fr).unwrap();
        let b = bfv::encrypt(&ctx, &encode_coeffs(&ctx, &mb).unwrap(), &pk, &mut fr).unwrap();
        let want = textbook_product(&ctx, &a, &b, sk.coeffs());
        let got = decode_coeffs(&ctx, &bfv::decrypt(&ctx, &bfv::multiply(&ctx, &a, &b).unwrap(), &sk).unwrap()).unwrap();
        check(got == want, || "base-extension product differs from the multiprecision oracle".into())?;
    }
    let (ctx, sk, pk, rlk, mut fr) = keyed(EncryptionParams::for_profile(Profile::Desk4k, Scheme::Bfv).unwrap(), 21);
    let n = ctx.n();
    let pairs = 1000;
    for i in 0..pairs {
        let x: Vec<u64> = (0..n).map(|_| r.gen_range(0..T)).collect();
        let y: Vec<u64> = (0..n).map(|_| r.gen_range(0..T)).collect();
        let cx = bfv::encrypt(&ctx, &batch_encode(&ctx, &x).unwrap(), &pk, &mut fr).unwrap();
        let cy = bfv::encrypt(&ctx, &batch_encode(&ctx, &y).unwrap(), &pk, &mut fr).unwrap();
        let c = bfv::multiply_relin(&ctx, &cx, &cy, &rlk).unwrap();
        let got = batch_decode(&ctx, &bfv::decrypt(&ctx, &c, &sk).unwrap()).unwrap();
        check(got.iter().zip(x.iter().zip(&y)).all(|(&g, (&a, &b))| g == a * b % T), || format!("slot product wrong in pair {i}"))?;
    }
    within(start, Duration::from_secs(120), format!("20 small products equal the oracle; {pairs} desk pairs exact"))
}

// ---- 3: CKKS

fn rand_complex(r: &mut ChaCha8Rng, k: usize) -> Vec<Complex64> {
    (0..k).map(|_| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect()
}

fn c3_ckks() -> Outcome {
    let start = Instant::now();
    let mut r = rng(3);
    let (ctx, sk, pk, rlk, mut fr) = keyed(EncryptionParams::for_profile(Profile::Desk8k, Scheme::Ckks).unwrap(), 30);
    check(ctx.n() == 8192, || "round trip ring is not 8192".into())?;
    let v = rand_complex(&mut r, ctx.slots());
    let back = ckks::decode(&ctx, &ckks::encode(&ctx, &v, 2f64.powi(30), ctx.max_level()).unwrap()).unwrap();
    let norm = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let rt = v.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / norm;
    check(rt <= 2f64.powi(-20), || format!("round trip relative error {rt:e}"))?;

    let depth = ctx.max_level() - 1;
    let s = ctx.default_scale();
    let vals: Vec<Vec<f64>> = (0..=depth).map(|_| (0..ctx.slots()).map(|_| r.gen_range(0.5..1.0)).collect()).collect();
    let mut acc = ckks::encrypt(&ctx, &ckks::encode_real(&ctx, &vals[0], s, ctx.max_level()).unwrap(), &pk, &mut fr).unwrap();
    let mut want = vals[0].clone();
    for v in &vals[1..] {
        let c = ckks::encrypt(&ctx, &ckks::encode_real(&ctx, v, acc.scale(), acc.level()).unwrap(), &pk, &mut fr).unwrap();
        acc = ckks::multiply_relin_rescale(&ctx, &acc, &c, &rlk).unwrap();
        want.iter_mut().zip(v).for_each(|(w, x)| *w *= x);
    }
    let got = ckks::decode_real(&ctx, &ckks::decrypt(&ctx, &acc, &sk).unwrap()).unwrap();
    let chain = want.iter().zip(&got).map(|(a, b)| ((a - b) / a).abs()).fold(0.0, f64::max);
    check(chain <= 1e-3, || format!("depth {depth} relative error {chain:e}"))?;

    let (ctx, _, pk, _, mut fr) = keyed(EncryptionParams::for_profile(Profile::Desk4k, Scheme::Ckks).unwrap(), 31);
    for i in 0..100 {
        let enc = |v: &[Complex64], fr: &mut rnsfhe::Rng| {
            ckks::encrypt(&ctx, &ckks::encode(&ctx, v, ctx.default_scale(), ctx.max_level()).unwrap(), &pk, fr).unwrap()
        };
        let (x, y) = (enc(&rand_complex(&mut r, 16), &mut fr), enc(&rand_complex(&mut r, 16), &mut fr));
        let a = ckks::multiply(&ctx, &x, &y, MulMode::Fused).unwrap();
        let b = ckks::multiply(&ctx, &x, &y, MulMode::Unfused).unwrap();
        check(a.data().data() == b.data().data() && a.scale() == b.scale(), || format!("fused product differs on pair {i}"))?;
    }
    within(start, Duration::from_secs(120), format!("round trip {rt:.2e}; depth {depth} chain {chain:.2e}; 100 fused pairs identical"))
}

// ---- 4: BGV

fn c4_bgv() -> Outcome {
    let start = Instant::now();
    let mut r = rng(4);
    let (ctx, sk, pk, rlk, mut fr) = keyed(EncryptionParams::for_profile(Profile::Desk4k, Scheme::Bgv).unwrap(), 40);
    let gk: GaloisKeys = galois_keygen(&ctx, &sk, &[1, -3, 7], false, &mut fr).unwrap();
    let n = ctx.n();
    let half = n / 2;
    let dec = |c: &Ciphertext| batch_decode(&ctx, &bgv::decrypt(&ctx, c, &sk).unwrap()).unwrap();
    let cases = 1000;
    for i in 0..cases {
        let x: Vec<u64> = (0..n).map(|_| r.gen_range(0..T)).collect();
        let y: Vec<u64> = (0..n).map(|_| r.gen_range(0..T)).collect();
        let cx = bgv::encrypt(&ctx, &batch_encode(&ctx, &x).unwrap(), &pk, &mut fr).unwrap();
        let cy = bgv::encrypt(&ctx, &batch_encode(&ctx, &y).unwrap(), &pk, &mut fr).unwrap();
        let step = [1i64, -3, 7][i % 3];
        let sum = bgv::add(&ctx, &cx, &cy).unwrap();
        let prod = bgv::mod_switch(&ctx, &bgv::relinearize(&ctx, &bgv::multiply(&ctx, &sum, &cy).unwrap(), &rlk).unwrap()).unwrap();
        let rot = bgv::rotate_rows(&ctx, &prod, step, &gk).unwrap();
        let p: Vec<u64> = x.iter().zip(&y).map(|(&a, &b)| (a + b) % T * b % T).collect();
        let want: Vec<u64> = (0..n).map(|j| p[(j / half) * half + (j % half + step.rem_euclid(half as i64) as usize) % half]).collect();
        check(dec(&sum) == x.iter().zip(&y).map(|(&a, &b)| (a + b) % T).collect::<Vec<_>>(), || format!("sum wrong in case {i}"))?;
        check(dec(&prod) == p, || format!("switched product wrong in case {i}"))?;
        check(dec(&rot) == want, || format!("rotation by {step} wrong in case {i}"))?;
    }
    within(start, Duration::from_secs(120), format!("{cases} encrypt/add/multiply/switch/rotate pipelines exact"))
}

// ---- 5: memory pool

fn c5_pool() -> Outcome {
    let start = Instant::now();
    let capacity = 4 << 20;
    let pool = MemoryPool::with_capacity(capacity, PoolMode::Pooled, false).map_err(|e| e.to_string())?;
    let mut r = rng(5);
    let sizes = [100usize, 256, 512, 768, 1024, 3000, 4096, 8192];
    let mut live = Vec::new();
    let mut shadow: BTreeMap<usize, usize> = BTreeMap::new();
    let mut last = 0;
    let steps = 100_000;
    for step in 0..steps {
        if live.is_empty() || r.gen_bool(0.55) {
            let size = sizes[r.gen_range(0..sizes.len())];
            let mut h = pool.ask(size).map_err(|e| e.to_string())?;
            check(h.size() >= size, || format!("short block at step {step}"))?;
            if let Some(off) = h.offset() {
                let end = off + h.size();
                check(end <= capacity, || format!("block past the arena at step {step}"))?;
                let clash = shadow.range(..end).next_back().is_some_and(|(_, &e)| e > off);
                check(!clash, || format!("overlap at step {step}"))?;
                shadow.insert(off, end);
            }
            h.words_mut().fill(step as u64);
            live.push(h);
        } else {
            let h = live.swap_remove(r.gen_range(0..live.len()));
            let tag = h.words()[0];
            check(h.words().iter().all(|&w| w == tag), || format!("block clobbered at step {step}"))?;
            if let Some(off) = h.offset() {
                shadow.remove(&off);
            }
            pool.ret(h).map_err(|e| e.to_string())?;
        }
        let rec = pool.recorder();
        check(rec >= last, || format!("recorder moved back at step {step}"))?;
        last = rec;
        let used: usize = shadow.iter().map(|(s, e)| e - s).sum();
        check(used + pool.free_arena_bytes() + capacity - rec == capacity, || format!("bytes not conserved at step {step}"))?;
    }
    let p = PoolConfig::standard();
    let (a, b) = (arena_capacity_mb(16, p.unit_mb, p.cap_mb), arena_capacity_mb(4, p.unit_mb, p.cap_mb));
    check(a == 2048 && b == 800, || format!("sizing gave {a} and {b} MB"))?;
    within(start, Duration::from_secs(60), format!("{steps}-step trace agrees with the shadow set; sizing 16 -> {a} MB, 4 -> {b} MB"))
}

// ---- 6: ablation direction

fn c6_ablation(cold_q1: &PdqReport) -> Outcome {
    let m = ablate::mempool(&PdqOptions::default()).map_err(|e| e.to_string())?;
    let one = run_pdq(&PdqOptions { lanes: 1, warm_runs: 0, ..Default::default() }).map_err(|e| e.to_string())?;
    let four = run_pdq(&PdqOptions { lanes: 4, warm_runs: 0, ..Default::default() }).map_err(|e| e.to_string())?;
    let lanes = ablate::streampool(4, 5).map_err(|e| e.to_string())?;
    let reductions: Vec<String> = lanes.best_reduction.iter().map(|(op, x)| format!("{op} {:.0}%", x * 100.0)).collect();
    let detail = format!(
        "never-return memory {:.2}x (need >= 2); return-every-op time {:.2}x (need >= 1.2); lanes 1 vs 4 identical {}; best lane reduction {}",
        m.never_return_memory_ratio,
        m.return_every_op_time_ratio,
        one.digest == four.digest && lanes.outputs_identical,
        reductions.join(", ")
    );
    let ok = m.never_return_memory_ratio >= 2.0
        && m.return_every_op_time_ratio >= 1.2
        && m.outputs_identical
        && one.digest == four.digest
        && one.digest == cold_q1.digest
        && lanes.outputs_identical;
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---- 7: queries

fn c7_queries(runs: &[PdqReport]) -> Outcome {
    let mut parts = Vec::new();
    for r in runs {
        check(r.oracle_ok, || format!("query {}: {}", r.options.query, r.mismatches.join("; ")))?;
        check(r.full_task_ms < 60_000.0, || format!("query {} took {:.1} s", r.options.query, r.full_task_ms / 1e3))?;
        parts.push(format!("q{} {:.1} s", r.options.query, r.full_task_ms / 1e3));
    }
    let (worst, _) = inverse_error(Profile::Pdq, 1024, |x, y| (x * y - 1.0).abs())?;
    check(worst < 1e-4, || format!("inverse |r x - 1| = {worst:e}"))?;
    Ok(format!("oracle agrees; {}; inverse |r x - 1| {worst:.1e}", parts.join(", ")))
}

/// Worst `metric(x, inverse)` over every slot for `x` drawn from the data range.
fn inverse_error(profile: Profile, rows: usize, metric: impl Fn(f64, f64) -> f64) -> Result<(f64, usize), String> {
    let e = |e: pdq::PdqError| e.to_string();
    let ctx = Context::new(EncryptionParams::for_profile(profile, Scheme::Ckks).map_err(|e| e.to_string())?, PoolConfig::desk())
        .map_err(|e| e.to_string())?;
    let cfg = PdqConfig::desk().with_rows(rows);
    let mut client = Client::with_rotation_keys(ctx.clone(), cfg.clone(), 8, false).map_err(e)?;
    let engine = Engine::new(ctx.clone(), client.relin_key().clone(), GaloisKeys::default(), cfg.clone()).map_err(e)?;
    let mut r = rnsfhe::Rng::seed_from_u64(9);
    let mut x: Vec<f64> = (0..ctx.slots()).map(|_| 1.0 + r.below(cfg.limit() - 1) as f64).collect();
    x[0] = 1.0;
    x[1] = (cfg.limit() - 1) as f64;
    let pt = ckks::encode_real(&ctx, &x, ctx.default_scale(), ctx.max_level()).map_err(|e| e.to_string())?;
    let ct = ckks::encrypt(&ctx, &pt, client.public_key(), &mut r).map_err(|e| e.to_string())?;
    let th = cfg.reciprocal_threshold;
    let inv = {
        let mut f = |c1: Ciphertext| client.reciprocal(&c1, th).map(|(y, _)| y);
        engine.inverse(&ct, &mut r, &mut f).map_err(e)?
    };
    let got = client.decrypt_slots(&inv).map_err(e)?;
    Ok((x.iter().zip(&got).map(|(&a, &b)| metric(a, b)).fold(0.0, f64::max), ctx.n()))
}

// ---- 8: large profile

fn c8_large() -> Outcome {
    let (worst, n) = inverse_error(Profile::Paper32k, 1024, |x, y| (y - 1.0 / x).abs())?;
    let bound = 2f64.powi(-32);
    let detail = format!("n = {n} reciprocal absolute error {worst:.2e} (bound {bound:.2e})");
    if worst <= bound {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---- 9: protocol

fn c9_protocol(inproc_q1: &PdqReport) -> Outcome {
    let mut r = rng(9);
    for i in 0..1000 {
        let ty = MsgType::from_u8(r.gen_range(1..=7)).unwrap();
        let payload: Vec<u8> = (0..r.gen_range(0..256)).map(|_| r.gen()).collect();
        let f = Frame::new(ty, r.gen(), payload);
        let bytes = f.encode();
        let back = Frame::decode(&bytes).map_err(|e| e.to_string())?;
        check(back == f && back.encode() == bytes, || format!("frame {i} did not round trip"))?;
    }

    let (a, b) = pipe_pair();
    let mut ct: Box<dyn Transport> = Box::new(Framed::new(a));
    let server = thread::spawn(move || {
        let mut t = Framed::new(b);
        let mut s = Server::new(ServerConfig::default());
        let r = s.serve(&mut t);
        (s.queries(), r.is_ok())
    });
    let rows = 128;
    let mut client = Client::new(Context::new(EncryptionParams::for_profile(Profile::Pdq, Scheme::Ckks).unwrap(), PoolConfig::desk()).unwrap(), PdqConfig::desk().with_rows(rows), 90)
        .map_err(|e| e.to_string())?;
    let table = pdq::dataset::generate(client.config(), 90);
    let sid = 9;
    let mut rejected = 0;
    let mut expect_error = |t: &mut dyn Transport| -> Result<(), String> {
        let f = t.recv().map_err(|e| e.to_string())?.ok_or("server hung up")?;
        check(f.ty == MsgType::Error, || format!("expected an error frame, got {:?}", f.ty))?;
        rejected += 1;
        Ok(())
    };
    ct.send(&Frame::new(MsgType::Query, sid, Vec::new())).unwrap();
    expect_error(ct.as_mut())?;
    let mut raw = Frame::new(MsgType::Result, sid, vec![0; 8]).encode();
    raw[4] = 200;
    ct.send_raw(&raw).unwrap();
    expect_error(ct.as_mut())?;
    ct.send(&Frame::new(MsgType::UploadContext, sid, vec![0xab; 64])).unwrap();
    expect_error(ct.as_mut())?;
    Session::new(&mut client, ct.as_mut(), sid).upload_context().map_err(|e| e.to_string())?;
    ct.send(&Frame::new(MsgType::Query, sid, PayloadWriter::new().json(&QuerySpec::standard(1).unwrap()).u16(0).finish())).unwrap();
    expect_error(ct.as_mut())?;
    ct.send(&Frame::new(MsgType::ReciprocalCiphertext, sid, Vec::new())).unwrap();
    expect_error(ct.as_mut())?;
    ct.send(&Frame::new(MsgType::UploadColumn, sid + 1, Vec::new())).unwrap();
    expect_error(ct.as_mut())?;
    {
        let mut s = Session::new(&mut client, ct.as_mut(), sid);
        for (name, v) in &table {
            s.encrypt_and_upload(name, v, true).map_err(|e| e.to_string())?;
        }
        let spec = QuerySpec::standard(1).unwrap();
        let (res, _) = s.query(&spec).map_err(|e| e.to_string())?;
        let want = pdq::query::filter(&spec.predicate, &table, rows).map_err(|e| e.to_string())?;
        check(res.answer == pdq::client::Decoded::Index(want), || "query after rejected frames is wrong".into())?;
    }
    drop(ct);
    let (queries, clean) = server.join().map_err(|_| "server panicked".to_string())?;
    check(queries == 1 && clean, || format!("server answered {queries} queries, clean exit {clean}"))?;

    let socket = run_pdq(&PdqOptions { transport: TransportKind::Socket, warm_runs: 0, ..Default::default() }).map_err(|e| e.to_string())?;
    check(socket.digest == inproc_q1.digest, || "socket and in-process results differ".into())?;
    Ok(format!("1000 frames round trip; {rejected} bad frames rejected, session survived; socket == in-process"))
}

fn run(id: u32, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into())),
    };
    let secs = start.elapsed().as_secs_f64();
    let (tag, detail, ok) = match out {
        Ok(d) => ("PASS", d, true),
        Err(d) => ("FAIL", d, false),
    };
    println!("criterion {id} [{name}]: {tag} ({secs:.1} s) {detail}");
    ok
}

fn main() {
    let filter: Option<Vec<u32>> = std::env::var("RNSFHE_ACCEPT_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let want = |i: u32| filter.as_ref().is_none_or(|f| f.contains(&i));
    let mut results = Vec::new();

    if want(1) {
        results.push(run(1, "modular and NTT oracles", c1_math));
    }
    if want(2) {
        results.push(run(2, "BFV base extension", c2_bfv));
    }
    if want(3) {
        results.push(run(3, "CKKS precision", c3_ckks));
    }
    if want(4) {
        results.push(run(4, "BGV exactness", c4_bgv));
    }
    if want(5) {
        results.push(run(5, "memory pool laws", c5_pool));
    }

    let queries: Option<Vec<PdqReport>> = if want(6) || want(7) || want(9) {
        match (1..=4).map(|q| run_pdq(&PdqOptions { query: q, warm_runs: 0, ..Default::default() })).collect::<anyhow::Result<Vec<_>>>() {
            Ok(v) => Some(v),
            Err(e) => {
                println!("query runs failed: {e:#}");
                None
            }
        }
    } else {
        None
    };
    let need = |i: u32, name: &str, f: &dyn Fn(&[PdqReport]) -> Outcome| match &queries {
        Some(q) => run(i, name, || f(q)),
        None => run(i, name, || Err("query runs failed".into())),
    };
    if want(6) {
        results.push(need(6, "ablation direction", &|q| c6_ablation(&q[0])));
    }
    if want(7) {
        results.push(need(7, "private queries", &c7_queries));
    }
    if want(8) {
        if std::env::var("RNSFHE_LARGE").as_deref() == Ok("1") {
            results.push(run(8, "large-ring reciprocal", c8_large));
        } else {
            println!("criterion 8 [large-ring reciprocal]: SKIP (set RNSFHE_LARGE=1)");
        }
    }
    if want(9) {
        results.push(need(9, "protocol", &|q| c9_protocol(&q[0])));
    }

    let failed = results.iter().filter(|&&ok| !ok).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 && std::env::var("RNSFHE_ACCEPT_STRICT").as_deref() == Ok("1") {
        std::process::exit(1);
    }
}
