//! Thin dispatch layer between the rayon and sequential execution paths.
//!
//! Everything in this crate that fans out over independent work items
//! (trajectories, Monte Carlo chains, parameter grids) goes through
//! [`map_indexed`]. With the `parallel` feature enabled the work is spread
//! over the rayon pool; without it the same closure runs on one thread.
//! Results come back in input order either way, so downstream reductions
//! are deterministic.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f` to `0..n`, collecting results in index order.
pub fn map_indexed<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
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

/// Sequential twin of [`map_indexed`], always single-threaded.
///
/// Kept unconditionally compiled so benchmarks can compare both paths.
pub fn map_indexed_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Apply `f` over a slice of inputs, in input order.
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
