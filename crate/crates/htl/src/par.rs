//! Execution policy for the data-parallel inner loops.
//!
//! With the `parallel` feature (default) the parallel arms run on rayon;
//! without it every arm falls back to the sequential path. All call sites
//! are order-preserving maps over index ranges, so results are identical
//! whichever arm runs — the policy only affects scheduling.

/// How to run a data-parallel section.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    /// Run on a rayon pool with the given number of worker threads
    /// (0 = rayon's default). Without the `parallel` feature this behaves
    /// like `Sequential`.
    Workers(usize),
}

impl Default for Parallelism {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Parallelism::Workers(0)
        }
        #[cfg(not(feature = "parallel"))]
        {
            Parallelism::Sequential
        }
    }
}

/// Order-preserving indexed map: returns `f(0), f(1), .., f(n-1)`.
pub fn map_indexed<T, F>(par: Parallelism, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match par {
        Parallelism::Sequential => (0..n).map(f).collect(),
        Parallelism::Workers(workers) => run_parallel(workers, n, f),
    }
}

#[cfg(feature = "parallel")]
fn run_parallel<T, F>(workers: usize, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let body = || (0..n).into_par_iter().map(&f).collect();
    if workers == 0 {
        body()
    } else {
        // A scoped pool so worker counts can vary per call without touching
        // the global pool.
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("building a rayon pool")
            .install(body)
    }
}

#[cfg(not(feature = "parallel"))]
fn run_parallel<T, F>(_workers: usize, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}
