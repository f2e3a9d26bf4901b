use std::sync::Arc;

use num_complex::Complex64;
use rnsfhe::ckks;
use rnsfhe::context::Context;
use rnsfhe::{Ciphertext, PublicKey, Rng};

use crate::config::{digit_decompose, PdqConfig};
use crate::error::{PdqError, Result};
use crate::interp::root;

/// Digit `j` of row `r` is `omega^{d_j(v_r)}` in slot `r`; the optional value
/// ciphertext holds `v_r` itself. Slots past the last row are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct EncryptedColumn {
    pub name: String,
    pub digits: Vec<Ciphertext>,
    pub value: Option<Ciphertext>,
}

/// Slot vectors for every digit position.
pub fn digit_slots(values: &[u64], cfg: &PdqConfig) -> Result<Vec<Vec<Complex64>>> {
    let mut out = vec![Vec::with_capacity(values.len()); cfg.k];
    for &v in values {
        if v >= cfg.limit() {
            return Err(PdqError::Range { value: v, limit: cfg.limit() });
        }
        for (j, d) in digit_decompose(v, cfg.p, cfg.k)?.into_iter().enumerate() {
            out[j].push(root(cfg.p, d as i64));
        }
    }
    Ok(out)
}

pub fn encode_column(
    ctx: &Arc<Context>,
    name: &str,
    values: &[u64],
    cfg: &PdqConfig,
    pk: &PublicKey,
    with_value: bool,
    rng: &mut Rng,
) -> Result<EncryptedColumn> {
    if values.len() > cfg.rows {
        return Err(PdqError::Config(format!("{} values for {} rows", values.len(), cfg.rows)));
    }
    let top = ctx.max_level();
    let scale = ctx.default_scale();
    let digits = digit_slots(values, cfg)?
        .iter()
        .map(|slots| Ok(ckks::encrypt(ctx, &ckks::encode(ctx, slots, scale, top)?, pk, rng)?))
        .collect::<Result<Vec<_>>>()?;
    let value = if with_value {
        let v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
        Some(ckks::encrypt(ctx, &ckks::encode_real(ctx, &v, scale, top)?, pk, rng)?)
    } else {
        None
    };
    Ok(EncryptedColumn { name: name.to_string(), digits, value })
}
