use std::sync::Arc;

use rnsfhe::ckks;
use rnsfhe::context::Context;
use rnsfhe::keys::{galois_keygen, keygen, pk_gen, relin_keygen};
use rnsfhe::{Ciphertext, GaloisKeys, PublicKey, RelinKey, Rng, SecretKey};
use serde::{Deserialize, Serialize};

use crate::column::{encode_column, EncryptedColumn};
use crate::config::PdqConfig;
use crate::error::Result;
use crate::query::{Aggregator, QuerySpec};

/// Decrypted query output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    /// Decoded real parts of the first `rows` slots.
    pub slots: Vec<f64>,
    /// Slots whose masked denominator fell below the reciprocal threshold.
    pub flagged: Vec<usize>,
    pub answer: Decoded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoded {
    Index(Vec<bool>),
    Sum(f64),
    Avg { value: f64, empty: bool },
    DivSquare(Vec<f64>),
}

impl QueryResult {
    pub fn matching_rows(&self) -> Vec<usize> {
        match &self.answer {
            Decoded::Index(m) => m.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect(),
            _ => Vec::new(),
        }
    }
}

/// Data holder: owns the secret key and never evaluates ciphertexts.
pub struct Client {
    ctx: Arc<Context>,
    cfg: PdqConfig,
    sk: SecretKey,
    pk: PublicKey,
    rlk: RelinKey,
    gk: GaloisKeys,
    rng: Rng,
    seen: Vec<Vec<f64>>,
}

impl Client {
    pub fn new(ctx: Arc<Context>, cfg: PdqConfig, seed: u64) -> Result<Self> {
        Self::with_rotation_keys(ctx, cfg, seed, true)
    }

    /// Without rotation keys the server can still run the reciprocal
    /// sub-protocol, but no aggregation.
    pub fn with_rotation_keys(ctx: Arc<Context>, cfg: PdqConfig, seed: u64, rotations: bool) -> Result<Self> {
        cfg.validate(ctx.slots())?;
        let mut rng = Rng::seed_from_u64(seed);
        let sk = keygen(&ctx, &mut rng)?;
        let pk = pk_gen(&ctx, &sk, &mut rng)?;
        let rlk = relin_keygen(&ctx, &sk, &mut rng)?;
        let gk = if rotations {
            let steps: Vec<i64> = (0..).map(|i| 1i64 << i).take_while(|&s| (s as usize) < ctx.slots()).collect();
            galois_keygen(&ctx, &sk, &steps, true, &mut rng)?
        } else {
            GaloisKeys::default()
        };
        Ok(Self { ctx, cfg, sk, pk, rlk, gk, rng, seen: Vec::new() })
    }

    pub fn context(&self) -> &Arc<Context> {
        &self.ctx
    }

    pub fn config(&self) -> &PdqConfig {
        &self.cfg
    }

    pub fn secret_key(&self) -> &SecretKey {
        &self.sk
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.pk
    }

    pub fn relin_key(&self) -> &RelinKey {
        &self.rlk
    }

    pub fn galois_keys(&self) -> &GaloisKeys {
        &self.gk
    }

    /// Masked values decrypted during reciprocal rounds, one vector per round.
    pub fn seen(&self) -> &[Vec<f64>] {
        &self.seen
    }

    pub fn encrypt_column(&mut self, name: &str, values: &[u64], with_value: bool) -> Result<EncryptedColumn> {
        encode_column(&self.ctx, name, values, &self.cfg, &self.pk, with_value, &mut self.rng)
    }

    /// A constant broadcast over every row, digits only.
    pub fn condition_column(&mut self, index: usize, value: u64) -> Result<EncryptedColumn> {
        let v = vec![value; self.cfg.rows];
        self.encrypt_column(&format!("#cond{index}"), &v, false)
    }

    /// Threshold below which a masked denominator counts as zero. Counts
    /// are whole numbers, so a nonzero masked count is at least `mask_min`.
    pub fn threshold_for(&self, spec: &QuerySpec) -> f64 {
        match spec.aggregator {
            Aggregator::Avg(_) => self.cfg.mask_min / 2.0,
            _ => self.cfg.reciprocal_threshold,
        }
    }

    /// Client half of the reciprocal: decrypt `r x`, invert slot-wise,
    /// encrypt fresh at the top level. Returns the flagged slots.
    pub fn reciprocal(&mut self, c1: &Ciphertext, threshold: f64) -> Result<(Ciphertext, Vec<usize>)> {
        let v = ckks::decode_real_precise(&self.ctx, &ckks::decrypt(&self.ctx, c1, &self.sk)?)?;
        let mut flagged = Vec::new();
        let recip: Vec<f64> = v
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                if x.abs() < threshold {
                    flagged.push(i);
                    0.0
                } else {
                    1.0 / x
                }
            })
            .collect();
        self.seen.push(v);
        let scale = 2f64.powi(self.cfg.reply_scale_bits as i32);
        let pt = ckks::encode_real_precise(&self.ctx, &recip, scale, self.ctx.max_level())?;
        Ok((ckks::encrypt(&self.ctx, &pt, &self.pk, &mut self.rng)?, flagged))
    }

    pub fn decrypt_slots(&self, ct: &Ciphertext) -> Result<Vec<f64>> {
        Ok(ckks::decode_real_precise(&self.ctx, &ckks::decrypt(&self.ctx, ct, &self.sk)?)?)
    }

    pub fn decode_result(&self, spec: &QuerySpec, ct: &Ciphertext, flagged: Vec<usize>) -> Result<QueryResult> {
        let mut slots = self.decrypt_slots(ct)?;
        slots.truncate(self.cfg.rows);
        let answer = match &spec.aggregator {
            Aggregator::Index => Decoded::Index(slots.iter().map(|&x| x > 0.5).collect()),
            Aggregator::Sum(_) => Decoded::Sum(slots[0]),
            Aggregator::Avg(_) => {
                let empty = !flagged.is_empty();
                Decoded::Avg { value: if empty { 0.0 } else { slots[0] }, empty }
            }
            Aggregator::DivSquare { .. } => Decoded::DivSquare(slots.clone()),
        };
        Ok(QueryResult { slots, flagged, answer })
    }

    /// Encrypted condition columns for the constants in `spec`.
    pub fn prepare_query(&mut self, spec: &QuerySpec) -> Result<(QuerySpec, Vec<EncryptedColumn>)> {
        let (stripped, consts) = spec.split_constants();
        let conds = consts.iter().enumerate().map(|(i, &v)| self.condition_column(i, v)).collect::<Result<_>>()?;
        Ok((stripped, conds))
    }
}
