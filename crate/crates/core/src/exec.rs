//! Execution switch between the rayon-backed parallel path and the plain
//! sequential path.
//!
//! Every helper here produces results in index order and never reduces
//! across tasks, so both paths give bitwise-identical outputs. The `parallel`
//! cargo feature compiles rayon in; [`set_parallel`] toggles it at runtime
//! (used by the benches to compare both paths in one binary).

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

static PARALLEL: AtomicBool = AtomicBool::new(true);

/// Enable or disable the parallel path. Has no effect without the `parallel` feature.
pub fn set_parallel(enabled: bool) {
    PARALLEL.store(enabled, Ordering::Relaxed);
}

pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && PARALLEL.load(Ordering::Relaxed)
}

/// Run `f(chunk_index, chunk)` over consecutive `chunk_len` slices of `data`.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    let chunk_len = chunk_len.max(1);
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    data.chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

/// Ordered map over `0..n`.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Ordered map over a slice.
pub fn map_slice<I, R, F>(items: &[I], f: F) -> Vec<R>
where
    I: Sync,
    R: Send,
    F: Fn(usize, &I) -> R + Send + Sync,
{
    map_range(items.len(), |i| f(i, &items[i]))
}

/// Row-block size for splitting `rows` rows of `row_cost` work units each.
pub(crate) fn rows_per_task(rows: usize, row_cost: usize) -> usize {
    // ~32k multiply-adds per task keeps scheduling overhead negligible
    let target = 32_768usize;
    (target / row_cost.max(1)).clamp(1, rows.max(1))
}
