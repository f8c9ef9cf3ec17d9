use std::ops::Range;

use rayon::prelude::*;

/// Number of work items per parallel chunk. Fixed so that reductions are
/// independent of the worker count.
pub(crate) const CHUNK: u64 = 8192;

/// Runs `f` over fixed-size chunks of `0..total` in parallel and returns the
/// per-chunk results in index order.
pub(crate) fn map_chunks<T, F>(total: u64, chunk: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, Range<u64>) -> T + Sync + Send,
{
    let chunks = total.div_ceil(chunk);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * chunk;
            f(c, start..(start + chunk).min(total))
        })
        .collect()
}
