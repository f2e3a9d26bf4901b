use rnsfhe::Rng;

use crate::config::PdqConfig;
use crate::query::Table;

pub const DEFAULT_SEED: u64 = 20240601;

/// Columns `a..e`. Values are uniform in `[1, 2^bits)`; `e` copies `d` on
/// a random half of the rows so equality predicates have matches.
pub fn generate(cfg: &PdqConfig, seed: u64) -> Table {
    let mut rng = Rng::seed_from_u64(seed);
    let limit = cfg.limit();
    let draw = |rng: &mut Rng| 1 + rng.below(limit - 1);
    let mut table = Table::new();
    for name in ["a", "b", "c", "d"] {
        table.insert(name.to_string(), (0..cfg.rows).map(|_| draw(&mut rng)).collect());
    }
    let d = table["d"].clone();
    let e = d.iter().map(|&x| if rng.below(2) == 0 { x } else { draw(&mut rng) }).collect();
    table.insert("e".into(), e);
    table
}

/// Uniform column in `[lo, hi)`.
pub fn uniform_column(rows: usize, lo: u64, hi: u64, seed: u64) -> Vec<u64> {
    let mut rng = Rng::seed_from_u64(seed);
    (0..rows).map(|_| lo + rng.below(hi - lo)).collect()
}
