//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature, [`Execution::Parallel`] fans work out over
//! rayon's pool. Without it, every call runs sequentially. Results always
//! come back in input order, and reductions are done on the calling thread
//! in that order, so outputs are bit-identical across both modes.

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `items.iter().map(f).collect()`, possibly in parallel.
pub fn map<T, U, F>(exec: Execution, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Fallible [`map`]; the first error in input order wins.
pub fn try_map<T, U, F>(exec: Execution, items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    map(exec, items, f).into_iter().collect()
}
