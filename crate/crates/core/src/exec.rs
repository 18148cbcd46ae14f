//! Data-parallel execution helpers.
//!
//! Every hot loop in the crate (Monte Carlo realizations, quadrature panels,
//! sweep grids) is expressed as an index-space map so it can run on rayon when
//! the `parallel` feature is enabled and fall back to a plain sequential loop
//! otherwise. Results are always collected in index order and reduced
//! sequentially, so floating-point output is bit-identical no matter how many
//! worker threads are used.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, collecting results in index order.
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
        map_collect_seq(n, f)
    }
}

/// Sequential variant of [`map_collect`], always available.
///
/// The criterion bench suite uses this as the baseline against the rayon
/// path; library code calls it for small index spaces where the fork/join
/// overhead is not worth paying.
pub fn map_collect_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Map and sum in deterministic index order.
pub fn map_sum<T, F>(n: usize, f: F) -> T
where
    T: Send + std::iter::Sum<T>,
    F: Fn(usize) -> T + Sync + Send,
{
    map_collect(n, f).into_iter().sum()
}

/// Configure the global worker pool size. Returns the effective thread count.
///
/// `0` keeps the library default (one worker per logical CPU). Calling this
/// more than once is a no-op because the global pool can only be built once;
/// the sequential build ignores the request entirely.
pub fn configure_threads(n: usize) -> usize {
    #[cfg(feature = "parallel")]
    {
        if n > 0 {
            // An Err here means the pool already exists; that is fine.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_collect() {
        let v = map_collect(10, |i| i * i);
        assert_eq!(v, map_collect_seq(10, |i| i * i));
    }

    #[test]
    fn sum_matches_sequential() {
        let s: f64 = map_sum(1000, |i| (i as f64).sqrt());
        let q: f64 = (0..1000).map(|i| (i as f64).sqrt()).sum();
        assert_eq!(s, q);
    }
}
