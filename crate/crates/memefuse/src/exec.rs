//! Thread-pool executor for the training and prediction loops.
//!
//! Work is split into fixed chunks and results are collected in index order,
//! so output does not depend on the number of threads.

use memefuse_core::Executor;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

pub const THREADS_ENV: &str = "MEMEFUSE_THREADS";

pub struct PoolExecutor {
    pool: ThreadPool,
}

impl PoolExecutor {
    /// `threads == 0` lets rayon pick.
    pub fn new(threads: usize) -> Self {
        let pool = ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool construction");
        Self { pool }
    }

    /// Honors `MEMEFUSE_THREADS` when set.
    pub fn from_env() -> Result<Self, String> {
        match std::env::var(THREADS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(Self::new(n)),
                _ => Err(format!("{THREADS_ENV} must be a positive integer, got {v:?}")),
            },
            Err(_) => Ok(Self::new(0)),
        }
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for PoolExecutor {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
