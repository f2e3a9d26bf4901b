//! Table-driven remainder of a 64-bit dividend by a word divisor.
//!
//! The dividend is consumed in `len_Y`-bit chunks. Each step multiplies the
//! running remainder by `2^len_Y` one window at a time: the bits shifted past
//! `len_Y` index a table of `(i * 2^len_Y) mod Y`, and any carry above
//! `2^len_Y` is folded back with `2^len_Y mod Y`.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LookupTable {
    divisor: u64,
    window_bits: u32,
    len_y: u32,
    entries: Vec<u64>,
    poly_mod_y: u64,
}

impl LookupTable {
    pub fn divisor(&self) -> u64 {
        self.divisor
    }

    pub fn window_bits(&self) -> u32 {
        self.window_bits
    }

    pub fn len_y(&self) -> u32 {
        self.len_y
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn poly_mod_y(&self) -> u64 {
        self.poly_mod_y
    }
}

pub const DEFAULT_WINDOW: u32 = 8;

pub fn build_lookup_table(y: u64, w: u32) -> Result<LookupTable> {
    if !(1..=16).contains(&w) {
        return Err(Error::Parameter(format!("window {w} outside [1, 16]")));
    }
    if !(2..1u64 << 63).contains(&y) {
        return Err(Error::Parameter(format!("divisor {y} outside [2, 2^63)")));
    }
    let len_y = 64 - y.leading_zeros();
    let w = w.min(len_y);
    let poly_mod_y = ((1u128 << len_y) % y as u128) as u64;
    let entries = (0..1u128 << w)
        .map(|i| ((i << len_y) % y as u128) as u64)
        .collect();
    Ok(LookupTable { divisor: y, window_bits: w, len_y, entries, poly_mod_y })
}

#[inline]
pub fn lookup_mod(x: u64, table: &LookupTable) -> u64 {
    let y = table.divisor;
    if x < y {
        return x;
    }
    let len = table.len_y;
    let w = table.window_bits;
    let top = 1u64 << len;
    let mask = top - 1;
    let fold = table.poly_mod_y;
    // Set_higher_bits_0: 2^len is congruent to poly_mod_y
    let normalize = |mut t: u64| {
        while t >= top {
            t = t - top + fold;
        }
        t
    };

    let shift_1st = 64 / len * len;
    let mut t = if shift_1st >= 64 { 0 } else { x >> shift_1st };
    let shift_2nd = (len - 1) % w + 1;
    let mut rem = shift_1st;
    while rem > 0 {
        rem -= len;
        let mut win = shift_2nd;
        let mut consumed = 0;
        while consumed < len {
            let idx = (t >> (len - win)) as usize;
            t = normalize(((t & (mask >> win)) << win) + table.entries[idx]);
            consumed += win;
            win = w;
        }
        t = normalize(t + ((x >> rem) & mask));
    }
    if t >= y {
        t - y
    } else {
        t
    }
}
