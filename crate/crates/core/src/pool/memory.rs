//! Arena memory pool with size-keyed LIFO free lists.
//!
//! Fresh requests are carved from the arena at a one-way recorder. Returned
//! blocks go to the free list for their size and are handed out again before
//! the recorder moves. Once the arena is spent, requests fall back to
//! individual host allocations that stay with the pool until teardown.

use std::alloc::{alloc_zeroed, dealloc, Layout};
use std::collections::{BTreeMap, HashSet};
use std::ptr::NonNull;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRANULE: usize = 256;
const MB: usize = 1 << 20;
const ALIGN: usize = 4096;

pub const DEFAULT_UNIT_MB: usize = 200;
pub const DEFAULT_CAP_MB: usize = 2048;
pub const DESK_UNIT_MB: usize = 25;
pub const DESK_CAP_MB: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    #[default]
    Pooled,
    /// Returns are dropped; every request takes fresh memory.
    NeverReturn,
    /// Every request and return goes straight to the host allocator.
    ReturnEveryOp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub unit_mb: usize,
    pub cap_mb: usize,
    pub mode: PoolMode,
    pub rebalance: bool,
    pub max_lanes: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl PoolConfig {
    pub fn desk() -> Self {
        Self {
            unit_mb: DESK_UNIT_MB,
            cap_mb: DESK_CAP_MB,
            mode: PoolMode::Pooled,
            rebalance: false,
            max_lanes: crate::pool::lanes::DEFAULT_MAX_LEN,
        }
    }

    pub fn standard() -> Self {
        Self { unit_mb: DEFAULT_UNIT_MB, cap_mb: DEFAULT_CAP_MB, ..Self::desk() }
    }

    pub fn with_mode(mut self, mode: PoolMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_lanes(mut self, max_lanes: usize) -> Self {
        self.max_lanes = max_lanes;
        self
    }
}

/// `S = min(cap, L * unit)` megabytes.
pub fn arena_capacity_mb(modulus_length: usize, unit_mb: usize, cap_mb: usize) -> usize {
    cap_mb.min(modulus_length * unit_mb)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Arena,
    Overflow,
    Host,
}

/// Exclusive ownership of one pool block.
#[derive(Debug)]
pub struct PoolHandle {
    origin: Origin,
    /// Arena offset, or overflow/host id.
    key: usize,
    size: usize,
    ptr: NonNull<u8>,
}

// A handle is the sole accessor of its block.
unsafe impl Send for PoolHandle {}
unsafe impl Sync for PoolHandle {}

impl PoolHandle {
    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn offset(&self) -> Option<usize> {
        (self.origin == Origin::Arena).then_some(self.key)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn words(&self) -> &[u64] {
        unsafe { std::slice::from_raw_parts(self.ptr.as_ptr() as *const u64, self.size / 8) }
    }

    pub fn words_mut(&mut self) -> &mut [u64] {
        unsafe { std::slice::from_raw_parts_mut(self.ptr.as_ptr() as *mut u64, self.size / 8) }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SizeStats {
    pub asks: u64,
    pub reuses: u64,
    pub returns: u64,
    pub live: u64,
    pub high_water_live: u64,
}

impl SizeStats {
    pub fn reuse_ratio(&self) -> f64 {
        if self.asks == 0 {
            0.0
        } else {
            self.reuses as f64 / self.asks as f64
        }
    }

    pub fn return_ratio(&self) -> f64 {
        if self.asks == 0 {
            0.0
        } else {
            self.returns as f64 / self.asks as f64
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PoolStats {
    pub ask_count: u64,
    pub reuse_count: u64,
    pub virgin_count: u64,
    pub overflow_count: u64,
    pub host_count: u64,
    pub return_count: u64,
    pub recorder_bytes: usize,
    pub overflow_bytes: usize,
    pub live_bytes: usize,
    /// Peak bytes held from the host on behalf of callers.
    pub high_water_bytes: usize,
    pub per_size: BTreeMap<usize, SizeStats>,
}

impl PoolStats {
    pub fn reuse_ratio(&self) -> f64 {
        if self.ask_count == 0 {
            0.0
        } else {
            self.reuse_count as f64 / self.ask_count as f64
        }
    }

    pub fn return_ratio(&self) -> f64 {
        if self.ask_count == 0 {
            0.0
        } else {
            self.return_count as f64 / self.ask_count as f64
        }
    }

    pub fn high_water_mb(&self) -> f64 {
        self.high_water_bytes as f64 / MB as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Arena(usize),
    Overflow(usize),
}

struct State {
    recorder: usize,
    free: BTreeMap<usize, Vec<Slot>>,
    overflow: Vec<(NonNull<u8>, usize)>,
    host_live: usize,
    next_host_id: usize,
    live: HashSet<(Origin, usize)>,
    stats: PoolStats,
}

pub struct MemoryPool {
    arena: Option<NonNull<u8>>,
    capacity: usize,
    mode: PoolMode,
    rebalance: bool,
    state: Mutex<State>,
}

unsafe impl Send for MemoryPool {}
unsafe impl Sync for MemoryPool {}

impl std::fmt::Debug for MemoryPool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MemoryPool")
            .field("capacity", &self.capacity)
            .field("mode", &self.mode)
            .finish()
    }
}

fn round_up(size: usize) -> usize {
    size.div_ceil(GRANULE) * GRANULE
}

fn layout(size: usize) -> Layout {
    Layout::from_size_align(size, ALIGN).expect("layout")
}

pub fn pool_new(modulus_length: usize, unit_mb: usize, cap_mb: usize) -> Result<MemoryPool> {
    if modulus_length == 0 {
        return Err(Error::Parameter("modulus length must be >= 1".into()));
    }
    MemoryPool::with_capacity(arena_capacity_mb(modulus_length, unit_mb, cap_mb) * MB, PoolMode::Pooled, false)
}

impl MemoryPool {
    pub fn from_config(modulus_length: usize, cfg: &PoolConfig) -> Result<Self> {
        if modulus_length == 0 {
            return Err(Error::Parameter("modulus length must be >= 1".into()));
        }
        let bytes = arena_capacity_mb(modulus_length, cfg.unit_mb, cfg.cap_mb) * MB;
        Self::with_capacity(bytes, cfg.mode, cfg.rebalance)
    }

    /// Arena of `capacity` bytes (rounded to the granule).
    pub fn with_capacity(capacity: usize, mode: PoolMode, rebalance: bool) -> Result<Self> {
        let capacity = round_up(capacity);
        let arena = if capacity == 0 || mode == PoolMode::ReturnEveryOp {
            None
        } else {
            let p = unsafe { alloc_zeroed(layout(capacity)) };
            Some(NonNull::new(p).ok_or_else(|| {
                Error::Resource(format!("arena allocation of {capacity} bytes failed"))
            })?)
        };
        Ok(Self {
            arena,
            capacity: if arena.is_some() { capacity } else { 0 },
            mode,
            rebalance,
            state: Mutex::new(State {
                recorder: 0,
                free: BTreeMap::new(),
                overflow: Vec::new(),
                host_live: 0,
                next_host_id: 0,
                live: HashSet::new(),
                stats: PoolStats::default(),
            }),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn mode(&self) -> PoolMode {
        self.mode
    }

    pub fn recorder(&self) -> usize {
        self.state.lock().unwrap().recorder
    }

    pub fn free_list_len(&self, size: usize) -> usize {
        let st = self.state.lock().unwrap();
        st.free.get(&round_up(size)).map_or(0, |v| v.len())
    }

    /// Bytes sitting in free lists that lie inside the arena.
    pub fn free_arena_bytes(&self) -> usize {
        let st = self.state.lock().unwrap();
        st.free
            .iter()
            .map(|(&sz, v)| sz * v.iter().filter(|s| matches!(s, Slot::Arena(_))).count())
            .sum()
    }

    pub fn stats(&self) -> PoolStats {
        self.state.lock().unwrap().stats.clone()
    }

    pub fn ask(&self, size: usize) -> Result<PoolHandle> {
        if size == 0 {
            return Err(Error::Parameter("zero-size pool request".into()));
        }
        let size = round_up(size);
        let mut st = self.state.lock().unwrap();
        st.stats.ask_count += 1;
        st.stats.per_size.entry(size).or_default().asks += 1;

        let handle = if self.mode == PoolMode::ReturnEveryOp {
            let ptr = host_alloc(size)?;
            let id = st.next_host_id;
            st.next_host_id += 1;
            st.host_live += size;
            st.stats.host_count += 1;
            PoolHandle { origin: Origin::Host, key: id, size, ptr }
        } else if let Some(slot) = st.free.get_mut(&size).and_then(|v| v.pop()) {
            st.stats.reuse_count += 1;
            st.stats.per_size.get_mut(&size).unwrap().reuses += 1;
            self.slot_handle(&st, slot, size)
        } else if st.recorder + size <= self.capacity {
            let off = st.recorder;
            st.recorder += size;
            st.stats.virgin_count += 1;
            PoolHandle {
                origin: Origin::Arena,
                key: off,
                size,
                ptr: unsafe { NonNull::new_unchecked(self.arena.unwrap().as_ptr().add(off)) },
            }
        } else if let Some((bigger, slot)) = self.rebalance_slot(&mut st, size) {
            st.stats.reuse_count += 1;
            st.stats.per_size.get_mut(&size).unwrap().reuses += 1;
            self.slot_handle(&st, slot, bigger)
        } else {
            let p = unsafe { alloc_zeroed(layout(size)) };
            let ptr = NonNull::new(p).ok_or_else(|| {
                Error::Resource(format!("overflow allocation of {size} bytes failed"))
            })?;
            let id = st.overflow.len();
            st.overflow.push((ptr, size));
            st.stats.overflow_count += 1;
            st.stats.overflow_bytes += size;
            PoolHandle { origin: Origin::Overflow, key: id, size, ptr }
        };

        if cfg!(debug_assertions) {
            st.live.insert((handle.origin, handle.key));
        }
        st.stats.live_bytes += handle.size;
        let ps = st.stats.per_size.entry(handle.size).or_default();
        ps.live += 1;
        ps.high_water_live = ps.high_water_live.max(ps.live);
        st.stats.recorder_bytes = st.recorder;
        let held = match self.mode {
            PoolMode::ReturnEveryOp => st.host_live,
            _ => st.recorder + st.stats.overflow_bytes,
        };
        st.stats.high_water_bytes = st.stats.high_water_bytes.max(held);
        Ok(handle)
    }

    /// Like `ask`, with the block cleared.
    pub fn ask_zeroed(&self, size: usize) -> Result<PoolHandle> {
        let mut h = self.ask(size)?;
        if h.origin != Origin::Host {
            h.words_mut().fill(0);
        }
        Ok(h)
    }

    fn rebalance_slot(&self, st: &mut State, size: usize) -> Option<(usize, Slot)> {
        if !self.rebalance {
            return None;
        }
        let key = st
            .free
            .range(size + 1..)
            .find(|(_, v)| !v.is_empty())
            .map(|(&k, _)| k)?;
        st.free.get_mut(&key).unwrap().pop().map(|s| (key, s))
    }

    fn slot_handle(&self, st: &State, slot: Slot, size: usize) -> PoolHandle {
        match slot {
            Slot::Arena(off) => PoolHandle {
                origin: Origin::Arena,
                key: off,
                size,
                ptr: unsafe { NonNull::new_unchecked(self.arena.unwrap().as_ptr().add(off)) },
            },
            Slot::Overflow(id) => PoolHandle {
                origin: Origin::Overflow,
                key: id,
                size,
                ptr: st.overflow[id].0,
            },
        }
    }

    pub fn ret(&self, handle: PoolHandle) -> Result<()> {
        let mut st = self.state.lock().unwrap();
        if cfg!(debug_assertions) && !st.live.remove(&(handle.origin, handle.key)) {
            return Err(Error::Resource(format!(
                "double return of {:?} block {}",
                handle.origin, handle.key
            )));
        }
        st.stats.return_count += 1;
        st.stats.live_bytes -= handle.size;
        let ps = st.stats.per_size.entry(handle.size).or_default();
        ps.returns += 1;
        ps.live -= 1;
        match (self.mode, handle.origin) {
            (_, Origin::Host) => {
                st.host_live -= handle.size;
                host_free(handle.ptr, handle.size);
            }
            (PoolMode::NeverReturn, _) => {}
            (_, Origin::Arena) => st.free.entry(handle.size).or_default().push(Slot::Arena(handle.key)),
            (_, Origin::Overflow) => {
                st.free.entry(handle.size).or_default().push(Slot::Overflow(handle.key))
            }
        }
        Ok(())
    }
}

impl Drop for MemoryPool {
    fn drop(&mut self) {
        let st = self.state.get_mut().unwrap();
        for &(ptr, size) in &st.overflow {
            unsafe { dealloc(ptr.as_ptr(), layout(size)) };
        }
        if let Some(a) = self.arena {
            unsafe { dealloc(a.as_ptr(), layout(self.capacity)) };
        }
    }
}

#[cfg(unix)]
fn host_alloc(size: usize) -> Result<NonNull<u8>> {
    let p = unsafe {
        libc::mmap(
            std::ptr::null_mut(),
            size,
            libc::PROT_READ | libc::PROT_WRITE,
            libc::MAP_PRIVATE | libc::MAP_ANONYMOUS,
            -1,
            0,
        )
    };
    if p == libc::MAP_FAILED {
        return Err(Error::Resource(format!("host allocation of {size} bytes failed")));
    }
    Ok(NonNull::new(p as *mut u8).unwrap())
}

#[cfg(unix)]
fn host_free(ptr: NonNull<u8>, size: usize) {
    unsafe {
        libc::munmap(ptr.as_ptr() as *mut libc::c_void, size);
    }
}

#[cfg(not(unix))]
fn host_alloc(size: usize) -> Result<NonNull<u8>> {
    NonNull::new(unsafe { alloc_zeroed(layout(size)) })
        .ok_or_else(|| Error::Resource(format!("host allocation of {size} bytes failed")))
}

#[cfg(not(unix))]
fn host_free(ptr: NonNull<u8>, size: usize) {
    unsafe { dealloc(ptr.as_ptr(), layout(size)) }
}
