//! Data-parallel loop helpers.
//!
//! With the `parallel` feature (default) the closures run on the rayon pool;
//! without it the same loops run sequentially. Every element is computed
//! independently and written back by index, so the two modes produce bitwise
//! identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `0..n` through `f` into a vector, index order preserved.
pub(crate) fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Fallible variant of [`map_collect`]; returns the first error by index order
/// under both execution modes.
pub(crate) fn try_map_collect<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        let results: Vec<Result<T, E>> = (0..n).into_par_iter().map(f).collect();
        results.into_iter().collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Run `f` on a dedicated pool capped at `threads` workers.
///
/// `None` or `Some(0)` uses the default pool. Without the `parallel` feature
/// the cap is accepted and ignored. The cap never changes results.
pub fn with_threads<T, F>(threads: Option<usize>, f: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    #[cfg(feature = "parallel")]
    {
        match threads {
            Some(t) if t > 0 => rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .expect("failed to build thread pool")
                .install(f),
            _ => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}
