use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use pdq::TransportKind;
use rnsfhe::context::{Profile, Scheme};
use rnsfhe::math::ntt::NttPolicy;
use rnsfhe::PoolMode;
use rnsfhe_cli::ablate;
use rnsfhe_cli::operators::bench_operators;
use rnsfhe_cli::pdqrun::{run_pdq, PdqOptions};
use rnsfhe_cli::report::write_json;

#[derive(Parser)]
#[command(name = "rnsfhe", about = "RNS homomorphic encryption benches and private queries")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Ckks,
    Bfv,
    Bgv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Desk4k,
    Desk8k,
    Paper32k,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransportArg {
    Inproc,
    Socket,
}

#[derive(Clone, Copy, ValueEnum)]
enum NttArg {
    Auto,
    Bm,
    Mm,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Mempool,
    Streampool,
    Ntt,
    Mod,
}

#[derive(Subcommand)]
enum Cmd {
    /// Time every operator of one scheme.
    Bench {
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        #[arg(long, value_enum, default_value = "desk4k")]
        profile: ProfileArg,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Comma separated operator names.
        #[arg(long, value_delimiter = ',')]
        ops: Option<Vec<String>>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run one of the four standard queries between a client and a server.
    Pdq {
        #[arg(long, default_value_t = 1)]
        query: u8,
        #[arg(long, default_value_t = 1024)]
        rows: usize,
        #[arg(long, value_enum, default_value = "inproc")]
        transport: TransportArg,
        /// Never hand memory back to the pool.
        #[arg(long, conflicts_with = "return_every_op")]
        no_mem_pool: bool,
        /// Take and release host memory on every request.
        #[arg(long)]
        return_every_op: bool,
        #[arg(long)]
        lanes: Option<usize>,
        #[arg(long, value_enum, default_value = "auto")]
        ntt: NttArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        warm_runs: usize,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Ablations of the pool, lane, NTT and remainder choices.
    Ablate {
        #[arg(long, value_enum)]
        which: Which,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        /// Operand pairs for the remainder ablation.
        #[arg(long, default_value_t = 100_000_000)]
        pairs: u64,
        #[arg(long, default_value_t = 1024)]
        rows: usize,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn emit<T: serde::Serialize>(json: &Option<PathBuf>, v: &T) -> Result<()> {
    match json {
        Some(p) => write_json(p, v),
        None => Ok(()),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Bench { scheme, profile, reps, seed, ops, json } => {
            let scheme = match scheme {
                SchemeArg::Ckks => Scheme::Ckks,
                SchemeArg::Bfv => Scheme::Bfv,
                SchemeArg::Bgv => Scheme::Bgv,
            };
            let profile = match profile {
                ProfileArg::Desk4k => Profile::Desk4k,
                ProfileArg::Desk8k => Profile::Desk8k,
                ProfileArg::Paper32k => Profile::Paper32k,
            };
            let r = bench_operators(scheme, profile, reps, seed, ops)?;
            print!("{}", r.table());
            emit(&json, &r)?;
            Ok(true)
        }
        Cmd::Pdq { query, rows, transport, no_mem_pool, return_every_op, lanes, ntt, seed, warm_runs, json } => {
            let d = PdqOptions::default();
            let opts = PdqOptions {
                query,
                rows,
                transport: match transport {
                    TransportArg::Inproc => TransportKind::Inproc,
                    TransportArg::Socket => TransportKind::Socket,
                },
                pool_mode: if no_mem_pool {
                    PoolMode::NeverReturn
                } else if return_every_op {
                    PoolMode::ReturnEveryOp
                } else {
                    PoolMode::Pooled
                },
                lanes: lanes.unwrap_or(d.lanes),
                ntt: match ntt {
                    NttArg::Auto => NttPolicy::Auto,
                    NttArg::Bm => NttPolicy::ForceBm,
                    NttArg::Mm => NttPolicy::ForceMm,
                },
                seed: seed.unwrap_or(d.seed),
                warm_runs,
            };
            let r = run_pdq(&opts)?;
            println!("query {query}: {:?}", r.answer);
            println!("matching rows   {}", r.matching_rows);
            println!("first calc      {:.1} ms", r.first_cal_ms);
            println!("calc            {:.1} ms", r.cal_ms);
            println!("full task       {:.1} ms", r.full_task_ms);
            println!("pool high-water {:.1} MB", r.pool_high_water_mb);
            for m in &r.mismatches {
                println!("mismatch: {m}");
            }
            println!("oracle          {}", if r.oracle_ok { "agrees" } else { "DISAGREES" });
            emit(&json, &r)?;
            Ok(r.oracle_ok)
        }
        Cmd::Ablate { which, reps, pairs, rows, json } => match which {
            Which::Mempool => {
                let r = ablate::mempool(&PdqOptions { rows, ..Default::default() })?;
                for m in &r.runs {
                    println!(
                        "{:<16} first {:>9.1} ms  warm {:>9.1} ms  high-water {:>8.1} MB  oracle {}",
                        format!("{:?}", m.mode),
                        m.first_cal_ms,
                        m.cal_ms,
                        m.high_water_mb,
                        m.oracle_ok
                    );
                }
                println!("never-return memory ratio   {:.2}", r.never_return_memory_ratio);
                println!("return-every-op time ratio  {:.2}", r.return_every_op_time_ratio);
                println!("outputs identical           {}", r.outputs_identical);
                emit(&json, &r)?;
                Ok(r.outputs_identical && r.runs.iter().all(|m| m.oracle_ok))
            }
            Which::Streampool => {
                let r = ablate::streampool(ablate::default_max_lanes(), reps)?;
                for row in &r.rows {
                    println!("{:<24} lanes {}  {:>10.1} us", row.op, row.lanes, row.mean_us);
                }
                for (op, red) in &r.best_reduction {
                    println!("{op:<24} best reduction {:.1}%", red * 100.0);
                }
                println!("outputs identical {}", r.outputs_identical);
                emit(&json, &r)?;
                Ok(r.outputs_identical)
            }
            Which::Ntt => {
                let r = ablate::ntt(&[256, 512, 1024, 2048], reps.max(100))?;
                for row in &r {
                    println!(
                        "n {:>5}  bm {:>8.2} us  mm {:>8.2} us  auto {:>8.2} us ({})",
                        row.n, row.bm_us, row.mm_us, row.auto_us, row.auto_picks
                    );
                }
                emit(&json, &r)?;
                Ok(true)
            }
            Which::Mod => {
                let r = ablate::modred(pairs, 7)?;
                println!("pairs {}  lookup {:.2} ns  native {:.2} ns  ratio {:.2}", r.pairs, r.lookup_ns, r.native_ns, r.lookup_over_native);
                emit(&json, &r)?;
                Ok(true)
            }
        },
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
