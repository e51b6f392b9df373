//! Execution mode for the data-parallel loops (pair scoring, candidate
//! scoring). Without the `parallel` feature every mode runs sequentially.
//!
//! Results never depend on the mode: each output slot is computed
//! independently and collected in index order.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

/// Below this many items the parallel path is not worth the fork/join.
pub const PARALLEL_MIN_ITEMS: usize = 256;

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Evaluates `f(i)` for `i in 0..n`, returning results in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel && n >= PARALLEL_MIN_ITEMS {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }
}
