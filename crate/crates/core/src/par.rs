//! Order-preserving batch maps.
//!
//! With the `parallel` feature (default) these run on rayon; without it they
//! are plain sequential loops. Results are always in input order, so callers
//! get identical output either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Whether batch maps run on a thread pool in this build.
pub const PARALLEL: bool = cfg!(feature = "parallel");

/// Sequential reference path, available in every build.
pub fn map_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_sequential(items, f)
}

/// Like [`map`] but with at most `max_workers` items in flight. Used for
/// I/O-bound work against rate-limited backends.
#[cfg(feature = "parallel")]
pub fn map_bounded<T, R, F>(items: &[T], max_workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let workers = max_workers.max(1);
    if workers == 1 || items.len() <= 1 {
        return map_sequential(items, f);
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => map_sequential(items, f),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_bounded<T, R, F>(items: &[T], _max_workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_sequential(items, f)
}
