//! Bounded worker lanes for per-modulus tasks.

pub const DEFAULT_MAX_LEN: usize = 4;

pub struct WorkerPool {
    lanes: usize,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl std::fmt::Debug for WorkerPool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WorkerPool").field("lanes", &self.lanes).finish()
    }
}

/// `min(modulus_length, max_len)`, at least 1.
pub fn lane_count(modulus_length: usize, max_len: usize) -> usize {
    modulus_length.min(max_len).max(1)
}

impl WorkerPool {
    pub fn new(modulus_length: usize, max_len: usize) -> Self {
        Self::with_lanes(lane_count(modulus_length, max_len))
    }

    pub fn sequential() -> Self {
        Self::with_lanes(1)
    }

    pub fn with_lanes(lanes: usize) -> Self {
        let lanes = lanes.max(1);
        #[cfg(feature = "parallel")]
        {
            let pool = (lanes > 1).then(|| {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(lanes)
                    .thread_name(|i| format!("lane-{i}"))
                    .build()
                    .expect("lane pool")
            });
            Self { lanes, pool }
        }
        #[cfg(not(feature = "parallel"))]
        Self { lanes }
    }

    pub fn lanes(&self) -> usize {
        self.lanes
    }

    /// Runs `f(i, task)` for every task and joins.
    pub fn par_for_each_modulus<T, F>(&self, tasks: Vec<T>, f: F)
    where
        T: Send,
        F: Fn(usize, T) + Send + Sync,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            pool.install(|| {
                tasks
                    .into_par_iter()
                    .enumerate()
                    .with_max_len(1)
                    .for_each(|(i, t)| f(i, t))
            });
            return;
        }
        for (i, t) in tasks.into_iter().enumerate() {
            f(i, t);
        }
    }

    /// Maps `f` over `0..count`, preserving order.
    pub fn par_map<R, F>(&self, count: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Send + Sync,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| (0..count).into_par_iter().with_max_len(1).map(&f).collect());
        }
        (0..count).map(f).collect()
    }
}
