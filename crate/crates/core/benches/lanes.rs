use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;

use rnsfhe::ckks::{self, MulMode};
use rnsfhe::context::{Context, EncryptionParams, Profile, Scheme};
use rnsfhe::keys::{keygen, pk_gen, relin_keygen};
use rnsfhe::math::lookup::{build_lookup_table, lookup_mod, DEFAULT_WINDOW};
use rnsfhe::math::ntt::NttTables;
use rnsfhe::math::prime::gen_ntt_primes;
use rnsfhe::pool::lanes::WorkerPool;
use rnsfhe::{PoolConfig, PoolMode, Rng};

fn lane_rows(c: &mut Criterion) {
    let n = 8192;
    let moduli = gen_ntt_primes(50, n, 4, &[]).unwrap();
    let tables: Vec<_> = moduli.iter().map(|&q| NttTables::new(n, q).unwrap()).collect();
    let mut g = c.benchmark_group("ntt_rows_l4_n8192");
    for lanes in [1, 4] {
        let pool = WorkerPool::with_lanes(lanes);
        let mut data: Vec<u64> = (0..4 * n as u64).map(|i| i * 7919 % moduli[0].value()).collect();
        g.bench_with_input(BenchmarkId::new("lanes", lanes), &lanes, |b, _| {
            b.iter(|| {
                let rows: Vec<_> = data.chunks_mut(n).collect();
                pool.par_for_each_modulus(rows, |j, row| {
                    tables[j].forward_bm(row).unwrap();
                    tables[j].inverse_bm(row).unwrap();
                });
            })
        });
    }
    g.finish();
}

fn ckks_multiply(c: &mut Criterion) {
    let mut g = c.benchmark_group("ckks_mul_relin_rescale_desk8k");
    g.sample_size(20);
    for (label, cfg) in [
        ("sequential", PoolConfig::desk().with_lanes(1)),
        ("parallel", PoolConfig::desk()),
        ("return_every_op", PoolConfig::desk().with_mode(PoolMode::ReturnEveryOp)),
    ] {
        let ctx = Context::new(EncryptionParams::for_profile(Profile::Desk8k, Scheme::Ckks).unwrap(), cfg).unwrap();
        let mut rng = Rng::seed_from_u64(1);
        let sk = keygen(&ctx, &mut rng).unwrap();
        let pk = pk_gen(&ctx, &sk, &mut rng).unwrap();
        let rlk = relin_keygen(&ctx, &sk, &mut rng).unwrap();
        let v: Vec<Complex64> = (0..ctx.slots()).map(|i| Complex64::new((i % 7) as f64 / 7.0, 0.0)).collect();
        let pt = ckks::encode(&ctx, &v, ctx.default_scale(), ctx.max_level()).unwrap();
        let x = ckks::encrypt(&ctx, &pt, &pk, &mut rng).unwrap();
        g.bench_function(label, |b| {
            b.iter(|| {
                let m = ckks::multiply(&ctx, &x, &x, MulMode::Fused).unwrap();
                let r = ckks::relinearize(&ctx, &m, &rlk).unwrap();
                black_box(ckks::rescale(&ctx, &r).unwrap())
            })
        });
    }
    g.finish();
}

fn ntt_variants(c: &mut Criterion) {
    let mut g = c.benchmark_group("ntt_variant");
    for n in [256usize, 512, 1024] {
        let q = gen_ntt_primes(50, n, 1, &[]).unwrap()[0];
        let t = NttTables::with_matrix(n, q, true).unwrap();
        let mut a: Vec<u64> = (0..n as u64).map(|i| i * 31 % q.value()).collect();
        g.bench_with_input(BenchmarkId::new("bm", n), &n, |b, _| b.iter(|| t.forward_bm(black_box(&mut a)).unwrap()));
        if t.matrix_enabled() {
            g.bench_with_input(BenchmarkId::new("mm", n), &n, |b, _| b.iter(|| t.forward_mm(black_box(&mut a)).unwrap()));
        }
    }
    g.finish();
}

fn remainder(c: &mut Criterion) {
    let y = gen_ntt_primes(50, 4096, 1, &[]).unwrap()[0];
    let table = build_lookup_table(y.value(), DEFAULT_WINDOW).unwrap();
    let xs: Vec<u64> = (0..4096u64).map(|i| i.wrapping_mul(0x9E37_79B9_7F4A_7C15)).collect();
    let mut g = c.benchmark_group("remainder_4096");
    g.bench_function("lookup", |b| b.iter(|| xs.iter().fold(0u64, |s, &x| s ^ lookup_mod(black_box(x), &table))));
    g.bench_function("barrett", |b| b.iter(|| xs.iter().fold(0u64, |s, &x| s ^ y.reduce(black_box(x)))));
    g.bench_function("hardware", |b| b.iter(|| xs.iter().fold(0u64, |s, &x| s ^ (black_box(x) % y.value()))));
    g.finish();
}

criterion_group!(benches, lane_rows, ckks_multiply, ntt_variants, remainder);
criterion_main!(benches);
