pub mod lanes;
pub mod memory;

pub use lanes::{lane_count, WorkerPool, DEFAULT_MAX_LEN};
pub use memory::{
    arena_capacity_mb, pool_new, MemoryPool, Origin, PoolConfig, PoolHandle, PoolMode, PoolStats,
    SizeStats, GRANULE,
};
