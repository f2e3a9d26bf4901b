#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use pdq::dataset::{generate, DEFAULT_SEED};
use pdq::query::Table;
use pdq::{Client, EncryptedColumn, Engine, PdqConfig};
use rnsfhe::context::{Context, EncryptionParams, Profile, Scheme};
use rnsfhe::PoolConfig;

pub fn context() -> Arc<Context> {
    Context::new(EncryptionParams::for_profile(Profile::Pdq, Scheme::Ckks).unwrap(), PoolConfig::desk()).unwrap()
}

pub struct Setup {
    pub client: Client,
    pub engine: Engine,
    pub table: Table,
    pub cols: HashMap<String, EncryptedColumn>,
}

/// Client, engine and encrypted columns `a..e` over `rows` rows.
pub fn setup(rows: usize, seed: u64) -> Setup {
    let cfg = PdqConfig::desk().with_rows(rows);
    let ctx = context();
    let mut client = Client::new(ctx.clone(), cfg.clone(), seed).unwrap();
    let engine = Engine::new(ctx, client.relin_key().clone(), client.galois_keys().clone(), cfg.clone()).unwrap();
    let table = generate(&cfg, DEFAULT_SEED ^ seed);
    let mut cols = HashMap::new();
    for (name, v) in &table {
        cols.insert(name.clone(), client.encrypt_column(name, v, true).unwrap());
    }
    Setup { client, engine, table, cols }
}
