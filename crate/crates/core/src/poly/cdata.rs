//! Flat RNS polynomial buffer.
//!
//! Word `((p * size_modulus) + j) * n + i` holds coefficient `i` of
//! polynomial `p` modulo `q_j`. Storage comes from a `MemoryPool`; growing
//! past capacity trades the block for a bigger one, shrinking keeps it.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::pool::{MemoryPool, PoolHandle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Domain {
    Coefficient,
    Evaluation,
}

pub struct CData {
    pool: Arc<MemoryPool>,
    handle: Option<PoolHandle>,
    capacity: usize,
    size_poly: usize,
    size_modulus: usize,
    n: usize,
    domains: Vec<Domain>,
}

impl std::fmt::Debug for CData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CData")
            .field("size_poly", &self.size_poly)
            .field("size_modulus", &self.size_modulus)
            .field("n", &self.n)
            .field("capacity", &self.capacity)
            .field("domains", &self.domains)
            .finish()
    }
}

fn ask(pool: &MemoryPool, words: usize, zeroed: bool) -> Result<Option<PoolHandle>> {
    if words == 0 {
        return Ok(None);
    }
    let h = if zeroed { pool.ask_zeroed(words * 8)? } else { pool.ask(words * 8)? };
    Ok(Some(h))
}

impl CData {
    /// Zero-filled, coefficient domain.
    pub fn new(pool: &Arc<MemoryPool>, size_poly: usize, size_modulus: usize, n: usize) -> Result<Self> {
        Self::alloc(pool, size_poly, size_modulus, n, true)
    }

    /// Contents unspecified; for outputs that are fully overwritten.
    pub fn new_uninit(
        pool: &Arc<MemoryPool>,
        size_poly: usize,
        size_modulus: usize,
        n: usize,
    ) -> Result<Self> {
        Self::alloc(pool, size_poly, size_modulus, n, false)
    }

    fn alloc(
        pool: &Arc<MemoryPool>,
        size_poly: usize,
        size_modulus: usize,
        n: usize,
        zeroed: bool,
    ) -> Result<Self> {
        let size = size_poly * size_modulus * n;
        Ok(Self {
            pool: pool.clone(),
            handle: ask(pool, size, zeroed)?,
            capacity: size,
            size_poly,
            size_modulus,
            n,
            domains: vec![Domain::Coefficient; size_poly],
        })
    }

    /// Same shape and domains as `other`, zero-filled.
    pub fn zeros_like(other: &CData) -> Result<Self> {
        let mut c = Self::new(&other.pool, other.size_poly, other.size_modulus, other.n)?;
        c.domains = other.domains.clone();
        Ok(c)
    }

    pub fn uninit_like(other: &CData) -> Result<Self> {
        let mut c = Self::new_uninit(&other.pool, other.size_poly, other.size_modulus, other.n)?;
        c.domains = other.domains.clone();
        Ok(c)
    }

    pub fn pool(&self) -> &Arc<MemoryPool> {
        &self.pool
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn size(&self) -> usize {
        self.size_poly * self.size_modulus * self.n
    }

    pub fn size_poly(&self) -> usize {
        self.size_poly
    }

    pub fn size_modulus(&self) -> usize {
        self.size_modulus
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.size_poly, self.size_modulus, self.n)
    }

    pub fn domain(&self, p: usize) -> Domain {
        self.domains[p]
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    pub fn set_domain(&mut self, p: usize, d: Domain) {
        self.domains[p] = d;
    }

    pub fn set_all_domains(&mut self, d: Domain) {
        self.domains.iter_mut().for_each(|x| *x = d);
    }

    /// The single domain shared by all polynomials, if any.
    pub fn uniform_domain(&self) -> Option<Domain> {
        let d = *self.domains.first()?;
        self.domains.iter().all(|&x| x == d).then_some(d)
    }

    pub fn data(&self) -> &[u64] {
        let size = self.size();
        match &self.handle {
            Some(h) => &h.words()[..size],
            None => &[],
        }
    }

    pub fn data_mut(&mut self) -> &mut [u64] {
        let size = self.size();
        match &mut self.handle {
            Some(h) => &mut h.words_mut()[..size],
            None => &mut [],
        }
    }

    #[inline]
    pub fn index(&self, p: usize, j: usize, i: usize) -> usize {
        ((p * self.size_modulus) + j) * self.n + i
    }

    pub fn row(&self, p: usize, j: usize) -> &[u64] {
        let s = self.index(p, j, 0);
        &self.data()[s..s + self.n]
    }

    pub fn row_mut(&mut self, p: usize, j: usize) -> &mut [u64] {
        let s = self.index(p, j, 0);
        let n = self.n;
        &mut self.data_mut()[s..s + n]
    }

    /// All residue rows of polynomial `p`.
    pub fn poly(&self, p: usize) -> &[u64] {
        let len = self.size_modulus * self.n;
        &self.data()[p * len..(p + 1) * len]
    }

    pub fn poly_mut(&mut self, p: usize) -> &mut [u64] {
        let len = self.size_modulus * self.n;
        &mut self.data_mut()[p * len..(p + 1) * len]
    }

    /// Disjoint mutable views of every polynomial.
    pub fn polys_mut(&mut self) -> Vec<&mut [u64]> {
        let len = self.size_modulus * self.n;
        if len == 0 {
            return Vec::new();
        }
        self.data_mut().chunks_mut(len).collect()
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, u64> {
        self.data().chunks(self.n)
    }

    pub fn rows_mut(&mut self) -> std::slice::ChunksMut<'_, u64> {
        let n = self.n;
        self.data_mut().chunks_mut(n)
    }

    /// Grow or shrink in polynomial count and modulus count.
    pub fn resize(&mut self, new_size_poly: usize, new_size_modulus: usize) -> Result<()> {
        let (op, om, n) = (self.size_poly, self.size_modulus, self.n);
        let new_size = new_size_poly * new_size_modulus * n;
        if new_size > self.capacity {
            let mut fresh = ask(&self.pool, new_size, true)?;
            if let (Some(dst), Some(src)) = (fresh.as_mut(), self.handle.as_ref()) {
                let (dst, src) = (dst.words_mut(), src.words());
                for p in 0..op.min(new_size_poly) {
                    for j in 0..om.min(new_size_modulus) {
                        let s = (p * om + j) * n;
                        let d = (p * new_size_modulus + j) * n;
                        dst[d..d + n].copy_from_slice(&src[s..s + n]);
                    }
                }
            }
            if let Some(old) = std::mem::replace(&mut self.handle, fresh) {
                self.pool.ret(old)?;
            }
            self.capacity = new_size;
        } else if let Some(h) = self.handle.as_mut() {
            let buf = h.words_mut();
            let keep_p = op.min(new_size_poly);
            let keep_m = om.min(new_size_modulus);
            if new_size_modulus <= om {
                for p in 0..keep_p {
                    for j in 0..keep_m {
                        let s = (p * om + j) * n;
                        let d = (p * new_size_modulus + j) * n;
                        if s != d {
                            buf.copy_within(s..s + n, d);
                        }
                    }
                }
            } else {
                for p in (0..keep_p).rev() {
                    for j in (0..keep_m).rev() {
                        let s = (p * om + j) * n;
                        let d = (p * new_size_modulus + j) * n;
                        if s != d {
                            buf.copy_within(s..s + n, d);
                        }
                    }
                    let z = (p * new_size_modulus + keep_m) * n;
                    buf[z..(p + 1) * new_size_modulus * n].fill(0);
                }
            }
            if new_size_poly > op {
                buf[op * new_size_modulus * n..new_size].fill(0);
            }
        }
        self.size_poly = new_size_poly;
        self.size_modulus = new_size_modulus;
        let d = self.domains.last().copied().unwrap_or(Domain::Coefficient);
        self.domains.resize(new_size_poly, d);
        Ok(())
    }

    /// Removes the last residue row of every polynomial.
    pub fn drop_last_modulus(&mut self) -> Result<()> {
        if self.size_modulus < 2 {
            return Err(Error::Level("cannot drop the last remaining modulus".into()));
        }
        self.resize(self.size_poly, self.size_modulus - 1)
    }

    /// Keeps the first `level` residues of each polynomial.
    pub fn truncate_moduli(&mut self, level: usize) -> Result<()> {
        if level == 0 || level > self.size_modulus {
            return Err(Error::Level(format!(
                "cannot truncate {} moduli to {level}",
                self.size_modulus
            )));
        }
        self.resize(self.size_poly, level)
    }

    /// Copy with the same pool.
    pub fn try_clone(&self) -> Result<Self> {
        let mut c = Self::new_uninit(&self.pool, self.size_poly, self.size_modulus, self.n)?;
        c.data_mut().copy_from_slice(self.data());
        c.domains = self.domains.clone();
        Ok(c)
    }

    /// Single polynomial `p` as its own buffer.
    pub fn extract_poly(&self, p: usize) -> Result<Self> {
        let mut c = Self::new_uninit(&self.pool, 1, self.size_modulus, self.n)?;
        c.data_mut().copy_from_slice(self.poly(p));
        c.domains = vec![self.domains[p]];
        Ok(c)
    }

    pub fn check_shape(&self, other: &CData) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.shape(), other.shape())));
        }
        Ok(())
    }

    pub fn check_domain(&self, d: Domain) -> Result<()> {
        if self.domains.iter().any(|&x| x != d) {
            return Err(Error::Domain(format!("expected {d:?}, found {:?}", self.domains)));
        }
        Ok(())
    }
}

impl Clone for CData {
    fn clone(&self) -> Self {
        self.try_clone().expect("pool allocation failed during clone")
    }
}

impl PartialEq for CData {
    fn eq(&self, other: &Self) -> bool {
        self.shape() == other.shape() && self.domains == other.domains && self.data() == other.data()
    }
}

impl Drop for CData {
    fn drop(&mut self) {
        if let Some(h) = self.handle.take() {
            let _ = self.pool.ret(h);
        }
    }
}

pub fn cdata_new(pool: &Arc<MemoryPool>, size_poly: usize, size_modulus: usize, n: usize) -> Result<CData> {
    CData::new(pool, size_poly, size_modulus, n)
}

pub fn cdata_resize(cd: &mut CData, new_size_poly: usize, new_size_modulus: usize) -> Result<()> {
    cd.resize(new_size_poly, new_size_modulus)
}
