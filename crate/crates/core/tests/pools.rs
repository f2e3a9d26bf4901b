use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rnsfhe::math::{gen_ntt_primes, NttPolicy, NttTables};
use rnsfhe::pool::*;
use rnsfhe::poly::{to_coeff, to_eval, CData};

const MB: usize = 1 << 20;

#[test]
fn arena_sizing() {
    assert_eq!(arena_capacity_mb(16, 200, 2048), 2048);
    assert_eq!(arena_capacity_mb(4, 200, 2048), 800);
    assert_eq!(arena_capacity_mb(4, 25, 256), 100);
    let cfg = PoolConfig::standard();
    assert_eq!(arena_capacity_mb(16, cfg.unit_mb, cfg.cap_mb), 2048);
    assert_eq!(arena_capacity_mb(4, cfg.unit_mb, cfg.cap_mb), 800);
    let p = pool_new(4, 25, 256).unwrap();
    assert_eq!(p.capacity(), 100 * MB);
    assert!(pool_new(0, 25, 256).is_err());
}

#[test]
fn recorder_and_lifo_reuse() {
    let p = MemoryPool::with_capacity(MB, PoolMode::Pooled, false).unwrap();
    assert_eq!(p.stats(), PoolStats::default());
    let a = p.ask(100).unwrap();
    let b = p.ask(100).unwrap();
    assert_eq!(a.offset(), Some(0));
    assert_eq!(b.offset(), Some(GRANULE));
    let off = a.offset();
    p.ret(a).unwrap();
    assert_eq!(p.free_list_len(100), 1);
    let c = p.ask(100).unwrap();
    assert_eq!(c.offset(), off);

    p.ret(c).unwrap();
    let d = p.ask(1000).unwrap();
    assert_eq!(d.offset(), Some(2 * GRANULE));
    assert_eq!(p.free_list_len(100), 1);

    let s = p.stats();
    assert_eq!(s.ask_count, 4);
    assert_eq!(s.reuse_count, 1);
    assert_eq!(s.virgin_count, 3);
    assert!(s.return_count <= s.ask_count);
    assert!((s.per_size[&GRANULE].reuse_ratio() - 1.0 / 3.0).abs() < 1e-12);
    let _ = (b, d);

    let q = MemoryPool::with_capacity(MB, PoolMode::Pooled, false).unwrap();
    let h = q.ask(512).unwrap();
    q.ret(h).unwrap();
    let h = q.ask(512).unwrap();
    assert!((q.stats().per_size[&512].reuse_ratio() - 0.5).abs() < 1e-12);
    q.ret(h).unwrap();
    assert!(q.ask(0).is_err());
}

#[test]
fn overflow_and_rebalance() {
    let p = MemoryPool::with_capacity(4 * GRANULE, PoolMode::Pooled, false).unwrap();
    let a = p.ask(4 * GRANULE).unwrap();
    let b = p.ask(GRANULE).unwrap();
    assert_eq!(b.origin(), Origin::Overflow);
    p.ret(b).unwrap();
    let c = p.ask(GRANULE).unwrap();
    assert_eq!(c.origin(), Origin::Overflow);
    assert_eq!(p.stats().overflow_count, 1);
    let _ = (a, c);

    let r = MemoryPool::with_capacity(4 * GRANULE, PoolMode::Pooled, true).unwrap();
    let big = r.ask(3 * GRANULE).unwrap();
    let _rest = r.ask(GRANULE).unwrap();
    r.ret(big).unwrap();
    let small = r.ask(2 * GRANULE).unwrap();
    assert_eq!(small.origin(), Origin::Arena);
    assert_eq!(small.size(), 3 * GRANULE);
    assert_eq!(r.stats().overflow_count, 0);
}

#[test]
fn modes_account_memory() {
    let never = MemoryPool::with_capacity(MB, PoolMode::NeverReturn, false).unwrap();
    for _ in 0..10 {
        let h = never.ask(4096).unwrap();
        never.ret(h).unwrap();
    }
    assert_eq!(never.stats().high_water_bytes, 10 * 4096);
    assert_eq!(never.stats().reuse_count, 0);

    let host = MemoryPool::with_capacity(MB, PoolMode::ReturnEveryOp, false).unwrap();
    for _ in 0..10 {
        let mut h = host.ask(4096).unwrap();
        assert_eq!(h.origin(), Origin::Host);
        assert!(h.words().iter().all(|&w| w == 0));
        h.words_mut()[3] = 7;
        host.ret(h).unwrap();
    }
    assert_eq!(host.stats().high_water_bytes, 4096);
    assert_eq!(host.stats().host_count, 10);

    let json = serde_json::to_string(&host.stats()).unwrap();
    let back: PoolStats = serde_json::from_str(&json).unwrap();
    assert_eq!(back, host.stats());
}

/// Replays a random ask/ret trace against a shadow interval set.
fn check_trace(seed: u64, steps: usize, capacity: usize, rebalance: bool) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let pool = MemoryPool::with_capacity(capacity, PoolMode::Pooled, rebalance).unwrap();
    let sizes = [256usize, 512, 768, 1024, 4096, 8192, 100, 3000];
    let mut live: Vec<PoolHandle> = Vec::new();
    // start -> end of live arena intervals
    let mut shadow: BTreeMap<usize, usize> = BTreeMap::new();
    let mut last_recorder = 0;
    for step in 0..steps {
        if live.is_empty() || r.gen_bool(0.55) {
            let size = sizes[r.gen_range(0..sizes.len())];
            let mut h = pool.ask(size).unwrap();
            assert!(h.size() >= size);
            if let Some(off) = h.offset() {
                let end = off + h.size();
                assert!(end <= capacity);
                if let Some((_, &e)) = shadow.range(..end).next_back() {
                    let (&s, _) = shadow.range(..end).next_back().unwrap();
                    assert!(e <= off || s >= end, "overlap at step {step}");
                }
                shadow.insert(off, end);
            }
            let tag = step as u64;
            h.words_mut().iter_mut().for_each(|w| *w = tag);
            live.push(h);
        } else {
            let i = r.gen_range(0..live.len());
            let h = live.swap_remove(i);
            let tag = h.words()[0];
            assert!(h.words().iter().all(|&w| w == tag), "block clobbered");
            if let Some(off) = h.offset() {
                shadow.remove(&off);
            }
            pool.ret(h).unwrap();
        }
        let rec = pool.recorder();
        assert!(rec >= last_recorder, "recorder moved backwards");
        last_recorder = rec;
        let live_arena: usize = shadow.values().zip(shadow.keys()).map(|(e, s)| e - s).sum();
        let free = pool.free_arena_bytes();
        assert_eq!(live_arena + free + (capacity - rec), capacity, "conservation at {step}");
    }
    let s = pool.stats();
    assert!(s.return_count <= s.ask_count);
}

#[test]
fn shadow_trace_100k() {
    check_trace(1, 100_000, 4 * MB, false);
}

#[test]
fn shadow_trace_small_arena_rebalance() {
    check_trace(2, 20_000, 64 * 1024, true);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn prop_pool_laws(seed in any::<u64>(), cap_kb in 16usize..1024, rebalance in any::<bool>()) {
        check_trace(seed, 3000, cap_kb * 1024, rebalance);
    }
}

#[test]
fn lane_counts() {
    assert_eq!(lane_count(16, 4), 4);
    assert_eq!(lane_count(2, 4), 2);
    assert_eq!(WorkerPool::new(16, DEFAULT_MAX_LEN).lanes(), 4);
    assert_eq!(WorkerPool::new(1, 4).lanes(), 1);
}

#[test]
fn lanes_are_deterministic() {
    let n = 4096;
    let moduli = gen_ntt_primes(50, n, 8, &[]).unwrap();
    let tables: Vec<NttTables> = moduli.iter().map(|&q| NttTables::new(n, q).unwrap()).collect();
    let pool = std::sync::Arc::new(MemoryPool::with_capacity(16 * MB, PoolMode::Pooled, false).unwrap());
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let mut a = CData::new(&pool, 2, 8, n).unwrap();
    for (i, row) in a.rows_mut().enumerate() {
        let q = moduli[i % 8].value();
        row.iter_mut().for_each(|x| *x = r.gen_range(0..q));
    }
    let mut outs = Vec::new();
    for lanes in 1..=4 {
        let wp = WorkerPool::with_lanes(lanes);
        let mut b = a.clone();
        to_eval(&mut b, &tables, NttPolicy::Auto, &wp).unwrap();
        outs.push(b.clone());
        to_coeff(&mut b, &tables, NttPolicy::Auto, &wp).unwrap();
        assert_eq!(b, a);
    }
    assert!(outs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
#[should_panic(expected = "lane task")]
fn lane_panic_propagates() {
    let wp = WorkerPool::with_lanes(3);
    wp.par_for_each_modulus((0..6).collect(), |_, t: i32| {
        if t == 4 {
            panic!("lane task failed");
        }
    });
}
