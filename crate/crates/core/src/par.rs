//! Block-structured parallel helpers.
//!
//! Work is split into fixed-size blocks whose boundaries depend only on the
//! item count, never on the worker count. Each block is reduced sequentially
//! in index order and block results are merged in block order, so floating
//! point output is bitwise identical for 1 or N threads, and identical
//! between the rayon build and the sequential fallback.

use std::ops::Range;

/// Path-ensemble block size. Fixed: changing it changes the (still
/// deterministic) floating-point merge order.
pub(crate) const PATH_BLOCK: usize = 1024;

/// Minimum row count before a matvec is worth parallelizing.
pub(crate) const MATVEC_PAR_MIN: usize = 4096;

/// Applies `f` to each index block of `0..n_items` and collects the results
/// in block order.
#[cfg(feature = "parallel")]
pub(crate) fn map_blocks<R, F>(n_items: usize, block: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(Range<usize>) -> R + Sync,
{
    use rayon::prelude::*;
    let n_blocks = n_items.div_ceil(block);
    (0..n_blocks)
        .into_par_iter()
        .map(|b| f(b * block..((b + 1) * block).min(n_items)))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_blocks<R, F>(n_items: usize, block: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(Range<usize>) -> R + Sync,
{
    let n_blocks = n_items.div_ceil(block);
    (0..n_blocks)
        .map(|b| f(b * block..((b + 1) * block).min(n_items)))
        .collect()
}

/// Fills `out[i] = f(i)`; each element is produced by exactly one worker, so
/// the result does not depend on the partition.
#[cfg(feature = "parallel")]
pub(crate) fn fill_indexed<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync,
{
    use rayon::prelude::*;
    if out.len() < MATVEC_PAR_MIN {
        for (i, y) in out.iter_mut().enumerate() {
            *y = f(i);
        }
    } else {
        out.par_iter_mut().enumerate().for_each(|(i, y)| *y = f(i));
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn fill_indexed<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync,
{
    for (i, y) in out.iter_mut().enumerate() {
        *y = f(i);
    }
}

/// Runs `f` on every item of a mutable slice, in parallel when available.
/// Items are independent; no cross-item state is shared.
#[cfg(feature = "parallel")]
pub(crate) fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync,
{
    use rayon::prelude::*;
    items.par_iter_mut().enumerate().for_each(|(i, t)| f(i, t));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync,
{
    for (i, t) in items.iter_mut().enumerate() {
        f(i, t);
    }
}
