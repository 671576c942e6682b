//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over a rayon pool of
//! the requested size; `workers == 1` or a build without the feature runs
//! the same closure sequentially. Results always come back in index order,
//! so output never depends on the worker count.

/// Evaluates `f(0..n)` and returns the results in index order.
///
/// `workers == 0` means "all available threads".
pub fn map_indexed<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if workers != 1 && n > 1 {
            use rayon::prelude::*;
            let run = || (0..n).into_par_iter().map(&f).collect();
            if workers == 0 {
                return run();
            }
            match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                Ok(pool) => return pool.install(run),
                Err(e) => log::warn!("thread pool unavailable ({e}); running sequentially"),
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    (0..n).map(f).collect()
}

/// Number of threads a `workers == 0` request resolves to.
pub fn available_workers() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_for_any_worker_count() {
        let seq = map_indexed(100, 1, |i| i * i);
        for w in [0, 2, 8] {
            assert_eq!(map_indexed(100, w, |i| i * i), seq);
        }
        assert!(map_indexed(0, 4, |i| i).is_empty());
    }
}
