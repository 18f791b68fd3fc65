//! Data-parallel map helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) these fan out over rayon; results
//! are collected in index order, so output is identical to the sequential
//! path bit-for-bit. Without the feature they degrade to plain loops.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map over `0..n`, optionally in parallel.
#[cfg(feature = "parallel")]
pub fn map_indices<R, F>(n: usize, parallel: bool, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync,
{
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indices<R, F>(n: usize, _parallel: bool, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    (0..n).map(f).collect()
}

/// Map over a slice of independent jobs, optionally in parallel.
#[cfg(feature = "parallel")]
pub fn map_jobs<T, R, F>(items: &[T], parallel: bool, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_jobs<T, R, F>(items: &[T], _parallel: bool, f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}
