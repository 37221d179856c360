//! Parallel execution over trajectory indices.
//!
//! Indices are cut into fixed-size chunks independent of the worker count.
//! Each chunk is processed sequentially, and chunk results come back in index
//! order, so any reduction over them is bit-identical for any number of
//! workers.

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Trajectories per chunk.
pub const CHUNK_SIZE: u64 = 256;

/// Runs `work` over consecutive chunks of `0..n` on `workers` threads
/// (`0` picks the machine default) and returns the chunk results in order.
/// The first failing chunk in index order determines the error.
pub fn map_chunks<T, F>(n: u64, workers: usize, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Range<u64>) -> Result<T> + Sync,
{
    let chunks: Vec<Range<u64>> = (0..n.div_ceil(CHUNK_SIZE))
        .map(|c| c * CHUNK_SIZE..((c + 1) * CHUNK_SIZE).min(n))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Runtime(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<T>> = pool.install(|| chunks.into_par_iter().map(&work).collect());
    results.into_iter().collect()
}

/// Attaches the stream index to a per-trajectory failure.
pub fn at_index<T>(index: u64, result: Result<T>) -> Result<T> {
    result.map_err(|e| match e {
        Error::Trajectory { .. } => e,
        other => Error::Trajectory {
            index,
            source: Box::new(other),
        },
    })
}
