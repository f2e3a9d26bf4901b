use std::time::Instant;

use anyhow::{ensure, Result};
use num_complex::Complex64;
use rnsfhe::ckks;
use rnsfhe::context::{Context, EncryptionParams, Profile, Scheme};
use rnsfhe::keys::{galois_keygen, keygen, pk_gen, relin_keygen};
use rnsfhe::math::lookup::{build_lookup_table, lookup_mod, DEFAULT_WINDOW};
use rnsfhe::math::ntt::{NttPolicy, NttTables};
use rnsfhe::math::prime::gen_ntt_primes;
use rnsfhe::pool::lanes::DEFAULT_MAX_LEN;
use rnsfhe::serialize::serialize;
use rnsfhe::{PoolConfig, PoolMode, Rng};
use serde::{Deserialize, Serialize};

use crate::pdqrun::{run_pdq, PdqOptions};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeRun {
    pub mode: PoolMode,
    pub first_cal_ms: f64,
    pub cal_ms: f64,
    pub high_water_mb: f64,
    pub oracle_ok: bool,
    pub digest: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MempoolReport {
    pub query: u8,
    pub runs: Vec<ModeRun>,
    /// never-return high-water over pooled high-water
    pub never_return_memory_ratio: f64,
    /// return-every-op warm time over pooled warm time
    pub return_every_op_time_ratio: f64,
    pub outputs_identical: bool,
}

/// Query 1 under each pool mode. Never-return keeps every block, so it
/// runs the cold query only; memory is compared after the cold query in
/// every mode, time on the fastest warm run.
pub fn mempool(base: &PdqOptions) -> Result<MempoolReport> {
    let mut runs = Vec::new();
    for (mode, warm) in [(PoolMode::Pooled, 2), (PoolMode::ReturnEveryOp, 2), (PoolMode::NeverReturn, 0)] {
        let r = run_pdq(&PdqOptions { query: 1, pool_mode: mode, warm_runs: warm, ..base.clone() })?;
        runs.push(ModeRun {
            mode,
            first_cal_ms: r.first_cal_ms,
            cal_ms: r.cal_ms,
            high_water_mb: r.pool_high_water_mb,
            oracle_ok: r.oracle_ok,
            digest: r.digest,
        });
    }
    Ok(MempoolReport {
        query: 1,
        never_return_memory_ratio: runs[2].high_water_mb / runs[0].high_water_mb,
        return_every_op_time_ratio: runs[1].cal_ms / runs[0].cal_ms,
        outputs_identical: runs.iter().all(|r| r.digest == runs[0].digest),
        runs,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LaneRow {
    pub op: String,
    pub lanes: usize,
    pub mean_us: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StreampoolReport {
    pub rows: Vec<LaneRow>,
    /// Per operator, `1 - best / one_lane`.
    pub best_reduction: Vec<(String, f64)>,
    pub outputs_identical: bool,
}

fn mean_us(reps: usize, mut f: impl FnMut()) -> f64 {
    let t = Instant::now();
    for _ in 0..reps {
        f();
    }
    t.elapsed().as_secs_f64() * 1e6 / reps as f64
}

/// Heavy operators at every lane count up to `max_lanes`.
pub fn streampool(max_lanes: usize, reps: usize) -> Result<StreampoolReport> {
    let params = EncryptionParams::for_profile(Profile::Desk8k, Scheme::Ckks)?;
    let mut rows = Vec::new();
    let mut outputs: Vec<Vec<Vec<u8>>> = Vec::new();
    for lanes in 1..=max_lanes {
        let ctx = Context::new(params.clone(), PoolConfig::desk().with_lanes(lanes))?;
        let mut rng = Rng::seed_from_u64(3);
        let sk = keygen(&ctx, &mut rng)?;
        let pk = pk_gen(&ctx, &sk, &mut rng)?;
        let rlk = relin_keygen(&ctx, &sk, &mut rng)?;
        let gk = galois_keygen(&ctx, &sk, &[1], false, &mut rng)?;
        let v: Vec<Complex64> = (0..ctx.slots()).map(|i| Complex64::new((i % 13) as f64 / 13.0, 0.5)).collect();
        let x = ckks::encrypt(&ctx, &ckks::encode(&ctx, &v, ctx.default_scale(), ctx.max_level())?, &pk, &mut rng)?;
        let mul = || ckks::multiply_relin_rescale(&ctx, &x, &x, &rlk).unwrap();
        let rot = || ckks::rotate(&ctx, &x, 1, &gk).unwrap();
        outputs.push(vec![serialize(&ctx, &mul()), serialize(&ctx, &rot())]);
        rows.push(LaneRow { op: "multiply_relin_rescale".into(), lanes, mean_us: mean_us(reps, || drop(mul())) });
        rows.push(LaneRow { op: "rotate_one_step".into(), lanes, mean_us: mean_us(reps, || drop(rot())) });
    }
    let mut best_reduction = Vec::new();
    for op in ["multiply_relin_rescale", "rotate_one_step"] {
        let t: Vec<f64> = rows.iter().filter(|r| r.op == op).map(|r| r.mean_us).collect();
        let best = t.iter().cloned().fold(f64::INFINITY, f64::min);
        best_reduction.push((op.to_string(), 1.0 - best / t[0]));
    }
    Ok(StreampoolReport { rows, best_reduction, outputs_identical: outputs.iter().all(|o| *o == outputs[0]) })
}

pub fn default_max_lanes() -> usize {
    DEFAULT_MAX_LEN
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NttRow {
    pub n: usize,
    pub bm_us: f64,
    pub mm_us: f64,
    pub auto_us: f64,
    pub auto_picks: String,
}

/// Equality of the two variants is checked before anything is timed.
pub fn ntt(sizes: &[usize], reps: usize) -> Result<Vec<NttRow>> {
    let mut out = Vec::new();
    for &n in sizes {
        let q = gen_ntt_primes(50, n, 1, &[])?[0];
        let t = NttTables::with_matrix(n, q, true)?;
        let mut rng = Rng::seed_from_u64(n as u64);
        let a: Vec<u64> = (0..n).map(|_| rng.below(q.value())).collect();
        let (mut x, mut y) = (a.clone(), a.clone());
        t.forward_bm(&mut x)?;
        t.forward_mm(&mut y)?;
        ensure!(x == y, "butterfly and matrix NTT disagree at n = {n}");
        let auto = NttTables::new(n, q)?;
        let mut z = a.clone();
        let picks = auto.forward(&mut z, NttPolicy::Auto)?;
        ensure!(z == x, "auto NTT disagrees at n = {n}");
        let mut buf = a.clone();
        out.push(NttRow {
            n,
            bm_us: mean_us(reps, || t.forward_bm(&mut buf).unwrap()),
            mm_us: mean_us(reps, || t.forward_mm(&mut buf).unwrap()),
            auto_us: mean_us(reps, || {
                auto.forward(&mut buf, NttPolicy::Auto).unwrap();
            }),
            auto_picks: format!("{picks:?}").to_lowercase(),
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModReport {
    pub pairs: u64,
    pub lookup_ns: f64,
    pub native_ns: f64,
    pub lookup_over_native: f64,
}

fn splitmix(s: &mut u64) -> u64 {
    *s = s.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *s;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Operands in `[2^33, 2^63)`.
fn operand(s: &mut u64) -> u64 {
    (1 << 33) + splitmix(s) % ((1 << 63) - (1 << 33))
}

/// Lookup remainder against the `%` instruction. Numerators are refilled
/// per block outside the timed region; every result is compared.
pub fn modred(pairs: u64, seed: u64) -> Result<ModReport> {
    const BLOCK: usize = 1 << 20;
    let mut s = seed;
    let divisors: Vec<u64> = (0..16).map(|_| operand(&mut s)).collect();
    let tables = divisors.iter().map(|&y| build_lookup_table(y, DEFAULT_WINDOW)).collect::<rnsfhe::Result<Vec<_>>>()?;
    let mut xs = vec![0u64; BLOCK];
    let (mut out_l, mut out_n) = (vec![0u64; BLOCK], vec![0u64; BLOCK]);
    let (mut t_l, mut t_n) = (0.0, 0.0);
    let mut done = 0u64;
    let mut block = 0usize;
    while done < pairs {
        let len = BLOCK.min((pairs - done) as usize);
        xs[..len].iter_mut().for_each(|x| *x = operand(&mut s));
        let (y, table) = (divisors[block % 16], &tables[block % 16]);
        let t = Instant::now();
        for (o, &x) in out_l[..len].iter_mut().zip(&xs[..len]) {
            *o = lookup_mod(x, table);
        }
        t_l += t.elapsed().as_secs_f64();
        let t = Instant::now();
        for (o, &x) in out_n[..len].iter_mut().zip(&xs[..len]) {
            *o = x % y;
        }
        t_n += t.elapsed().as_secs_f64();
        ensure!(out_l[..len] == out_n[..len], "lookup remainder disagrees with % for divisor {y}");
        done += len as u64;
        block += 1;
    }
    let (l, n) = (t_l * 1e9 / pairs as f64, t_n * 1e9 / pairs as f64);
    Ok(ModReport { pairs, lookup_ns: l, native_ns: n, lookup_over_native: l / n })
}
