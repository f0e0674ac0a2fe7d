//! Trial-level data parallelism.
//!
//! Every helper here produces results that do not depend on the number of
//! worker threads: maps are collected in index order, counts are integer
//! sums, and floating-point sums are accumulated over fixed-size chunks whose
//! partial sums are combined left to right.
//!
//! With the `parallel` feature disabled all helpers run sequentially and
//! [`with_threads`] simply calls its closure.

use crate::error::{Error, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Run `f` on a dedicated pool of `threads` workers (`0` means the global
/// default pool).
#[cfg(feature = "parallel")]
pub fn with_threads<R, F>(threads: usize, f: F) -> Result<R>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<R, F>(threads: usize, f: F) -> Result<R>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    let _ = threads;
    Ok(f())
}

/// Number of workers the current context would use.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// `(0..n).map(f)` collected in index order.
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
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

/// Fallible [`map_collect`]. The error reported is the one with the lowest index.
pub fn try_map_collect<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_collect(n, f).into_iter().collect()
}

/// Number of indices in `0..n` for which `pred` holds.
pub fn try_count<F>(n: usize, pred: F) -> Result<u64>
where
    F: Fn(usize) -> Result<bool> + Sync + Send,
{
    let hits = try_map_collect(n, |i| pred(i).map(u64::from))?;
    Ok(hits.into_iter().sum())
}

/// Sum of `f(i)` over `0..n`, accumulated in fixed chunks of `chunk` indices.
///
/// The chunk layout depends only on `n` and `chunk`, so the rounding pattern
/// (and therefore the result) is identical for any worker count.
pub fn chunked_sum<F>(n: u64, chunk: u64, f: F) -> f64
where
    F: Fn(u64) -> f64 + Sync + Send,
{
    let chunk = chunk.max(1);
    let chunks = n.div_ceil(chunk) as usize;
    let partials = map_collect(chunks, |c| {
        let start = c as u64 * chunk;
        let end = (start + chunk).min(n);
        (start..end).map(&f).sum::<f64>()
    });
    partials.into_iter().sum()
}

/// Maximum of `f(c)` over chunk indices `0..chunks`.
pub fn try_max_over_chunks<F>(chunks: usize, f: F) -> Result<f64>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    let partials = try_map_collect(chunks, f)?;
    Ok(partials.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_collect_keeps_order() {
        let v = map_collect(1000, |i| i * 3);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 3 * i));
    }

    #[test]
    fn chunked_sum_is_thread_count_invariant() {
        let f = |i: u64| ((i as f64) * 0.1).sin() / (1.0 + i as f64);
        let a = with_threads(1, || chunked_sum(100_003, 977, f)).unwrap();
        let b = with_threads(7, || chunked_sum(100_003, 977, f)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn try_count_reports_first_error() {
        let r = try_count(10, |i| {
            if i >= 4 {
                Err(Error::Parameter(format!("bad {i}")))
            } else {
                Ok(true)
            }
        });
        match r {
            Err(Error::Parameter(m)) => assert_eq!(m, "bad 4"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
