//! Order-preserving data-parallel map. With the `parallel` feature the work
//! is spread over the rayon pool; without it the same closure runs
//! sequentially. Results come back in input order either way, so any
//! reduction over them is deterministic.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub fn map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_mut<T: Send, R: Send>(items: &mut [T], f: impl Fn(&mut T) -> R + Sync + Send) -> Vec<R> {
    items.par_iter_mut().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_mut<T: Send, R: Send>(items: &mut [T], f: impl Fn(&mut T) -> R + Sync + Send) -> Vec<R> {
    items.iter_mut().map(f).collect()
}

/// `map` over `0..n`.
pub fn map_range<R: Send>(n: usize, f: impl Fn(usize) -> R + Sync + Send) -> Vec<R> {
    let idx: Vec<usize> = (0..n).collect();
    map(&idx, |&i| f(i))
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
