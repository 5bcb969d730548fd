//! Data-parallel map helpers with a sequential fallback.
//!
//! Hot loops in this crate are embarrassingly parallel over an index
//! range (Newton starts, restarts, scan trials).  `map_indexed` runs
//! them through rayon when the `parallel` feature is enabled and
//! through a plain iterator otherwise.  Both paths preserve index
//! order, and callers derive any randomness from the item index, so
//! results are bit-identical across the two modes.  `map_indexed_seq`
//! is always sequential; benches use it as the comparison baseline.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub fn map_indexed<U, F>(count: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<U, F>(count: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..count).map(f).collect()
}

pub fn map_indexed_seq<U, F>(count: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..count).map(f).collect()
}
