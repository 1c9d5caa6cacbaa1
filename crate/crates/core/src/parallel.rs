//! Optional thread pool for independent per-column / per-row solves.
//!
//! Results are collected in index order and scattered by the caller, so the
//! output does not depend on the thread count.

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

pub(crate) struct Executor {
    pool: Option<ThreadPool>,
}

impl Executor {
    pub fn new(threads: usize) -> Self {
        let pool = (threads > 1)
            .then(|| ThreadPoolBuilder::new().num_threads(threads).build().ok())
            .flatten();
        Self { pool }
    }

    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match &self.pool {
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
            None => (0..n).map(f).collect(),
        }
    }
}
