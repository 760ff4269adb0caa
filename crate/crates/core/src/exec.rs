//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature, jobs fan out on a rayon pool sized by
//! [`Workers`]; without it (or with one worker) they run in order. Results are
//! always returned in job order, so the output never depends on scheduling.

use std::num::NonZeroUsize;

/// Worker-count knob. `Workers::sequential()` forces in-order execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Workers(NonZeroUsize);

impl Workers {
    pub fn new(n: usize) -> Self {
        Workers(NonZeroUsize::new(n.max(1)).unwrap())
    }

    pub fn sequential() -> Self {
        Self::new(1)
    }

    pub fn available() -> Self {
        Self::new(std::thread::available_parallelism().map_or(1, NonZeroUsize::get))
    }

    pub fn get(self) -> usize {
        self.0.get()
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self.get() > 1
    }
}

impl Default for Workers {
    fn default() -> Self {
        Self::available()
    }
}

/// Maps `f` over `0..n`, returning results in index order.
pub fn map_indexed<T, F>(workers: Workers, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if workers.is_parallel() {
        use rayon::prelude::*;
        return with_pool(workers, || (0..n).into_par_iter().map(&f).collect());
    }
    let _ = workers;
    (0..n).map(f).collect()
}

/// Fallible variant of [`map_indexed`]; returns the lowest-index error.
pub fn try_map_indexed<T, E, F>(workers: Workers, n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(workers, n, f).into_iter().collect()
}

#[cfg(feature = "parallel")]
fn with_pool<R: Send>(workers: Workers, op: impl FnOnce() -> R + Send) -> R {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex, OnceLock};

    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<rayon::ThreadPool>>>> = OnceLock::new();
    let n = workers.get();
    if rayon::current_num_threads() == n && rayon::current_thread_index().is_some() {
        return op();
    }
    let pool = {
        let mut pools = POOLS.get_or_init(Default::default).lock().unwrap();
        pools
            .entry(n)
            .or_insert_with(|| {
                Arc::new(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build()
                        .expect("failed to build worker pool"),
                )
            })
            .clone()
    };
    pool.install(op)
}
