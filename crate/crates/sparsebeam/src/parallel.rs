//! Deterministic work decomposition helpers.
//!
//! Every parallel kernel in the crate either writes each output element from
//! exactly one worker (gather form) or accumulates into per-chunk private
//! buffers that are reduced in fixed chunk order. Chunk boundaries depend only
//! on the problem size, never on the thread count, so results are bitwise
//! identical for any pool size, including the serial pool.

use rayon::prelude::*;

/// Number of scatter chunks. Fixed so that reductions are reproducible
/// across thread counts.
pub const SCATTER_CHUNKS: usize = 16;

/// Fill `out` in parallel: `f(start_index, chunk)` owns the chunk exclusively.
pub fn fill_chunks<T: Send, F>(out: &mut [T], chunk_len: usize, f: F)
where
    F: Fn(usize, &mut [T]) + Sync,
{
    let chunk_len = chunk_len.max(1);
    out.par_chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, c)| f(i * chunk_len, c));
}

/// Scatter-reduce: split `0..n_items` into [`SCATTER_CHUNKS`] ranges, let each
/// worker accumulate into a private buffer, then sum buffers in chunk order.
/// Falls back to a single serial buffer when the private buffers would be
/// large; the mode depends only on the problem size, so any given call is
/// reproducible across thread counts.
pub fn scatter_reduce<A, F>(n_items: usize, acc_len: usize, zero: A, scatter: F, out: &mut [A])
where
    A: Copy + Send + Sync + std::ops::AddAssign,
    F: Fn(std::ops::Range<usize>, &mut [A]) + Sync,
{
    assert_eq!(out.len(), acc_len);
    if acc_len.saturating_mul(SCATTER_CHUNKS) > (32 << 20) {
        scatter(0..n_items, out);
        return;
    }
    let chunk = n_items.div_ceil(SCATTER_CHUNKS).max(1);
    let ranges: Vec<_> = (0..n_items)
        .step_by(chunk)
        .map(|s| s..(s + chunk).min(n_items))
        .collect();
    let partials: Vec<Vec<A>> = ranges
        .into_par_iter()
        .map(|r| {
            let mut buf = vec![zero; acc_len];
            scatter(r, &mut buf);
            buf
        })
        .collect();
    for p in partials {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
}
