//! Parameters and the immutable precomputed context shared by every operation.

pub mod params;

use std::sync::{Arc, OnceLock};

use num_bigint::BigUint;
use num_traits::ToPrimitive;

pub use params::{EncryptionParams, Profile, Scheme, DEFAULT_PLAIN_MODULUS, MAX_MODULI};

use crate::bfv::behz::BehzConstants;
use crate::ckks::encoder::SpecialFft;
use crate::ckks::precise::PreciseFft;
use crate::error::{Error, Result};
use crate::math::lookup::{build_lookup_table, LookupTable, DEFAULT_WINDOW};
use crate::math::modulus::Modulus;
use crate::math::ntt::{bit_reverse, NttPolicy, NttTables, NttVariant};
use crate::math::rns::RnsBase;
use crate::poly::galois::{conjugation_element, galois_element_for_step};
use crate::pool::{MemoryPool, PoolConfig, WorkerPool};

/// Plaintext-modulus tables for BFV/BGV.
#[derive(Debug)]
pub struct PlainContext {
    modulus: Modulus,
    tables: Option<NttTables>,
    /// Slot `k` (row-major over the 2 x n/2 matrix) lives at NTT index `slot_index[k]`.
    slot_index: Vec<usize>,
    /// `floor(Q / t) mod q_j`.
    delta: Vec<u64>,
    /// `Q mod t`.
    q_mod_t: u64,
}

impl PlainContext {
    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn tables(&self) -> Option<&NttTables> {
        self.tables.as_ref()
    }

    pub fn slot_index(&self) -> &[usize] {
        &self.slot_index
    }

    pub fn delta(&self) -> &[u64] {
        &self.delta
    }

    pub fn q_mod_t(&self) -> u64 {
        self.q_mod_t
    }
}

pub struct Context {
    params: EncryptionParams,
    base: RnsBase,
    level_bases: Vec<RnsBase>,
    tables: Vec<NttTables>,
    lookup: Vec<LookupTable>,
    plain: Option<PlainContext>,
    behz: Option<BehzConstants>,
    fft: Option<SpecialFft>,
    precise_fft: OnceLock<PreciseFft>,
    q_inv: Vec<Vec<u64>>,
    p_inv: Vec<u64>,
    p_mod_q: Vec<u64>,
    pool: Arc<MemoryPool>,
    lanes: Arc<WorkerPool>,
    pool_config: PoolConfig,
}

impl std::fmt::Debug for Context {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Context")
            .field("scheme", &self.params.scheme)
            .field("n", &self.params.n)
            .field("levels", &self.params.len())
            .field("lanes", &self.lanes.lanes())
            .finish()
    }
}

/// Slot-to-NTT-index map for the 2 x n/2 batching matrix.
pub fn batching_slot_index(n: usize) -> Vec<usize> {
    let m = 2 * n as u64;
    let log_n = n.trailing_zeros();
    let half = n / 2;
    let mut idx = vec![0usize; n];
    let mut g = 1u64;
    for c in 0..half {
        idx[c] = bit_reverse(((g - 1) / 2) as usize, log_n);
        idx[c + half] = bit_reverse(((m - g - 1) / 2) as usize, log_n);
        g = g * 5 % m;
    }
    idx
}

pub fn context_new(params: EncryptionParams, pool_config: PoolConfig) -> Result<Arc<Context>> {
    Context::new(params, pool_config)
}

impl Context {
    pub fn new(params: EncryptionParams, pool_config: PoolConfig) -> Result<Arc<Self>> {
        params.validate()?;
        let n = params.n;
        let l = params.len();
        let moduli: Vec<Modulus> = params.coeff_moduli.iter().map(|&q| Modulus::prime(q)).collect::<Result<_>>()?;
        let special = Modulus::prime(params.special_modulus)?;
        let base = RnsBase::new(moduli.clone())?;
        let level_bases = (1..=l).map(|k| base.prefix(k)).collect::<Result<Vec<_>>>()?;
        let tables = moduli
            .iter()
            .chain(std::iter::once(&special))
            .map(|&q| NttTables::new(n, q))
            .collect::<Result<Vec<_>>>()?;
        let lookup = moduli
            .iter()
            .map(|q| build_lookup_table(q.value(), DEFAULT_WINDOW))
            .collect::<Result<Vec<_>>>()?;

        let mut q_inv = Vec::with_capacity(l);
        for i in 0..l {
            q_inv.push((0..i).map(|j| moduli[j].inv(moduli[j].reduce(moduli[i].value()))).collect::<Result<Vec<_>>>()?);
        }
        let p_inv = moduli.iter().map(|q| q.inv(q.reduce(special.value()))).collect::<Result<Vec<_>>>()?;
        let p_mod_q = moduli.iter().map(|q| q.reduce(special.value())).collect();

        let plain = match params.plain_modulus {
            Some(t) if params.scheme != Scheme::Ckks => {
                let tm = Modulus::new(t)?;
                let tables = if params.batching_enabled() { Some(NttTables::new(n, tm)?) } else { None };
                let delta_big: BigUint = base.big_q() / t;
                let delta = base.decompose(&delta_big);
                let q_mod_t = (base.big_q() % t).to_u64().unwrap_or(0);
                Some(PlainContext { modulus: tm, tables, slot_index: batching_slot_index(n), delta, q_mod_t })
            }
            _ => None,
        };

        let behz = if params.scheme == Scheme::Bfv {
            let t = params.plain_modulus.ok_or_else(|| Error::Parameter("BFV needs t".into()))?;
            let mut exclude = params.coeff_moduli.clone();
            exclude.push(params.special_modulus);
            Some(BehzConstants::new(n, &moduli, t, &exclude)?)
        } else {
            None
        };

        let fft = (params.scheme == Scheme::Ckks).then(|| SpecialFft::new(n));
        let pool = Arc::new(MemoryPool::from_config(l, &pool_config)?);
        let lanes = Arc::new(WorkerPool::new(l, pool_config.max_lanes));
        Ok(Arc::new(Self {
            params,
            base,
            level_bases,
            tables,
            lookup,
            plain,
            behz,
            fft,
            precise_fft: OnceLock::new(),
            q_inv,
            p_inv,
            p_mod_q,
            pool,
            lanes,
            pool_config,
        }))
    }

    pub fn params(&self) -> &EncryptionParams {
        &self.params
    }

    pub fn scheme(&self) -> Scheme {
        self.params.scheme
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn slots(&self) -> usize {
        self.params.n / 2
    }

    /// Number of moduli in the full chain.
    pub fn max_level(&self) -> usize {
        self.params.len()
    }

    pub fn base(&self) -> &RnsBase {
        &self.base
    }

    /// The first `level` moduli.
    pub fn level_base(&self, level: usize) -> &RnsBase {
        &self.level_bases[level - 1]
    }

    pub fn moduli(&self) -> &[Modulus] {
        self.base.moduli()
    }

    /// Tables for the ciphertext chain.
    pub fn q_tables(&self) -> &[NttTables] {
        &self.tables[..self.max_level()]
    }

    pub fn tables_at(&self, level: usize) -> &[NttTables] {
        &self.tables[..level]
    }

    /// Chain tables followed by the special modulus.
    pub fn key_tables(&self) -> &[NttTables] {
        &self.tables
    }

    pub fn special_table(&self) -> &NttTables {
        &self.tables[self.max_level()]
    }

    pub fn special_modulus(&self) -> &Modulus {
        self.special_table().modulus()
    }

    pub fn lookup_tables(&self) -> &[LookupTable] {
        &self.lookup
    }

    pub fn plain(&self) -> Result<&PlainContext> {
        self.plain.as_ref().ok_or_else(|| Error::Config("no plain modulus for this scheme".into()))
    }

    pub fn plain_modulus(&self) -> Option<u64> {
        self.params.plain_modulus
    }

    pub fn behz(&self) -> Result<&BehzConstants> {
        self.behz.as_ref().ok_or_else(|| Error::Config("BEHZ constants exist only for BFV".into()))
    }

    pub fn fft(&self) -> Result<&SpecialFft> {
        self.fft.as_ref().ok_or_else(|| Error::Config("canonical embedding exists only for CKKS".into()))
    }

    /// Double-double embedding, built on first use.
    pub fn precise_fft(&self) -> Result<&PreciseFft> {
        self.fft()?;
        Ok(self.precise_fft.get_or_init(|| PreciseFft::new(self.n())))
    }

    /// `q_i^{-1} mod q_j` for `j < i`.
    pub fn q_inv(&self, i: usize, j: usize) -> u64 {
        self.q_inv[i][j]
    }

    pub fn q_inv_row(&self, i: usize) -> &[u64] {
        &self.q_inv[i]
    }

    /// `P^{-1} mod q_j`.
    pub fn p_inv(&self) -> &[u64] {
        &self.p_inv
    }

    pub fn p_mod_q(&self) -> &[u64] {
        &self.p_mod_q
    }

    pub fn default_scale(&self) -> f64 {
        self.params.default_scale.unwrap_or(1.0)
    }

    pub fn policy(&self) -> NttPolicy {
        self.params.ntt_policy
    }

    pub fn pool(&self) -> &Arc<MemoryPool> {
        &self.pool
    }

    pub fn lanes(&self) -> &WorkerPool {
        &self.lanes
    }

    pub fn pool_config(&self) -> &PoolConfig {
        &self.pool_config
    }

    pub fn galois_element(&self, step: i64) -> u64 {
        galois_element_for_step(step, self.n())
    }

    pub fn conjugation_element(&self) -> u64 {
        conjugation_element(self.n())
    }

    pub(crate) fn ntt(&self, row: &mut [u64], table: &NttTables) -> NttVariant {
        table.forward(row, self.policy()).expect("policy checked at construction")
    }

    pub(crate) fn intt(&self, row: &mut [u64], table: &NttTables) -> NttVariant {
        table.inverse(row, self.policy()).expect("policy checked at construction")
    }
}
