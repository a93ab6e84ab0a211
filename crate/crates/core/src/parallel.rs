//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) the hot loops fan out over rayon;
//! without it the same entry points run sequentially. Results are identical in
//! both modes: parallel maps collect into index order and every reduction is
//! performed sequentially on the collected values.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Build a vector where element `i` is `f(i)`.
pub fn build_vec<U, F>(n: usize, f: F) -> Vec<U>
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

/// Sequential twin of [`build_vec`], kept available in all configurations so
/// benchmarks can compare the two code paths in a single build.
pub fn build_vec_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Map a slice, preserving order.
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
