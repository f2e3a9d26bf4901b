//! End-to-end query runs over a real transport, checked against the
//! plaintext oracle.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::thread;
use std::time::Instant;

use anyhow::{anyhow, Result};
use pdq::client::Decoded;
use pdq::dataset::{generate, DEFAULT_SEED};
use pdq::query::{evaluate, Answer};
use pdq::{connected_pair, Client, PdqConfig, QuerySpec, Server, ServerConfig, Session, TransportKind};
use rnsfhe::context::{Context, EncryptionParams, Profile, Scheme};
use rnsfhe::math::ntt::NttPolicy;
use rnsfhe::{PoolConfig, PoolMode};
use serde::{Deserialize, Serialize};

pub const SESSION_ID: u64 = 0x5044_5121;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PdqOptions {
    pub query: u8,
    pub rows: usize,
    pub transport: TransportKind,
    pub pool_mode: PoolMode,
    pub lanes: usize,
    pub ntt: NttPolicy,
    pub seed: u64,
    /// Warm repetitions after the first query; 0 skips them.
    pub warm_runs: usize,
}

impl Default for PdqOptions {
    fn default() -> Self {
        Self {
            query: 1,
            rows: 1024,
            transport: TransportKind::Inproc,
            pool_mode: PoolMode::Pooled,
            lanes: PoolConfig::desk().max_lanes,
            ntt: NttPolicy::Auto,
            seed: DEFAULT_SEED,
            warm_runs: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PdqReport {
    pub options: PdqOptions,
    pub first_cal_ms: f64,
    /// Fastest warm run; equals `first_cal_ms` without warm runs.
    pub cal_ms: f64,
    /// Encryption, serialization, the first query and decryption.
    pub full_task_ms: f64,
    /// Server pool high-water after the first query.
    pub pool_high_water_mb: f64,
    pub matching_rows: usize,
    pub oracle_ok: bool,
    pub mismatches: Vec<String>,
    /// Hash of the decrypted slots of the first query.
    pub digest: u64,
    pub answer: Decoded,
    #[serde(skip)]
    pub slots: Vec<f64>,
}

fn digest(slots: &[f64]) -> u64 {
    let mut h = DefaultHasher::new();
    for s in slots {
        s.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Compares a decoded answer with the oracle; returns readable diffs.
pub fn check_answer(want: &Answer, got: &Decoded, slots: &[f64]) -> Vec<String> {
    let rel = |g: f64, w: f64| (g - w).abs() / w.abs().max(f64::MIN_POSITIVE);
    let mut out = Vec::new();
    match (want, got) {
        (Answer::Index(w), Decoded::Index(g)) => {
            for (i, (a, b)) in w.iter().zip(g).enumerate() {
                if a != b {
                    out.push(format!("row {i}: expected {a}, got {b} (slot {:.6})", slots[i]));
                }
            }
        }
        (Answer::Sum(w), Decoded::Sum(g)) => {
            if rel(*g, *w) > 1e-3 {
                out.push(format!("sum: expected {w}, got {g}"));
            }
        }
        (Answer::Avg(w), Decoded::Avg { value, empty }) => match w {
            None if !*empty => out.push(format!("avg: expected empty, got {value}")),
            Some(w) if *empty || rel(*value, *w) > 1e-3 => out.push(format!("avg: expected {w}, got {value} (empty {empty})")),
            _ => {}
        },
        (Answer::DivSquare(w), Decoded::DivSquare(g)) => {
            for (i, (a, &b)) in w.iter().zip(g).enumerate() {
                match a {
                    Some(a) if rel(b, *a) > 1e-3 => out.push(format!("row {i}: expected {a}, got {b}")),
                    None if b.abs() > 1e-3 => out.push(format!("row {i}: expected no value, got {b}")),
                    _ => {}
                }
            }
        }
        _ => out.push("answer kind differs from the query".into()),
    }
    out
}

pub fn run_pdq(opts: &PdqOptions) -> Result<PdqReport> {
    let spec = QuerySpec::standard(opts.query)?;
    let mut params = EncryptionParams::for_profile(Profile::Pdq, Scheme::Ckks)?;
    params.ntt_policy = opts.ntt;
    let cfg = PdqConfig::desk().with_rows(opts.rows);
    let ctx = Context::new(params, PoolConfig::desk().with_lanes(opts.lanes))?;
    let mut client = Client::new(ctx, cfg.clone(), opts.seed)?;
    let table = generate(&cfg, opts.seed);

    let (mut ct, mut st) = connected_pair(opts.transport)?;
    let server_cfg = ServerConfig { pool: PoolConfig::desk().with_mode(opts.pool_mode).with_lanes(opts.lanes), ntt: Some(opts.ntt) };
    let server = thread::spawn(move || -> pdq::Result<()> { Server::new(server_cfg).serve(st.as_mut()) });

    let result = (|| -> Result<_> {
        let mut s = Session::new(&mut client, ct.as_mut(), SESSION_ID);
        s.upload_context()?;
        let t0 = Instant::now();
        for name in spec.columns() {
            let values = table.get(&name).ok_or_else(|| anyhow!("no column {name}"))?;
            s.encrypt_and_upload(&name, values, true)?;
        }
        let (first, meta) = s.query(&spec)?;
        let full_task_ms = t0.elapsed().as_secs_f64() * 1e3;
        let mut cal_ms = meta.calc_ms;
        for i in 0..opts.warm_runs {
            let (r, m) = s.query(&spec)?;
            cal_ms = if i == 0 { m.calc_ms } else { cal_ms.min(m.calc_ms) };
            if r.slots.len() != first.slots.len() {
                return Err(anyhow!("warm run changed the result shape"));
            }
        }
        Ok((first, meta, cal_ms, full_task_ms))
    })();
    drop(ct);
    let served = server.join().map_err(|_| anyhow!("server thread panicked"))?;
    let (first, meta, cal_ms, full_task_ms) = result?;
    served?;

    let want = evaluate(&spec, &table, opts.rows)?;
    let mismatches = check_answer(&want, &first.answer, &first.slots);
    let matching_rows = match &want {
        Answer::Index(m) => m.iter().filter(|&&b| b).count(),
        _ => pdq::query::filter(&spec.predicate, &table, opts.rows)?.iter().filter(|&&b| b).count(),
    };
    Ok(PdqReport {
        options: opts.clone(),
        first_cal_ms: meta.calc_ms,
        cal_ms,
        full_task_ms,
        pool_high_water_mb: meta.high_water_bytes as f64 / (1 << 20) as f64,
        matching_rows,
        oracle_ok: mismatches.is_empty(),
        mismatches,
        digest: digest(&first.slots),
        answer: first.answer,
        slots: first.slots,
    })
}
