//! Thread-pool executor for the per-vessel stages.

use aisguard_core::Executor;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuildError, ThreadPoolBuilder};

/// Runs per-vessel work on a dedicated rayon pool. Results keep input order.
pub struct RayonExecutor {
    pool: ThreadPool,
}

impl RayonExecutor {
    pub fn new(workers: usize) -> Result<Self, ThreadPoolBuildError> {
        Ok(RayonExecutor { pool: ThreadPoolBuilder::new().num_threads(workers.max(1)).build()? })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for RayonExecutor {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        self.pool.install(|| items.par_iter().map(f).collect())
    }

    fn map_mut<T, R, F>(&self, items: &mut [T], f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(&mut T) -> R + Sync + Send,
    {
        self.pool.install(|| items.par_iter_mut().map(f).collect())
    }
}
