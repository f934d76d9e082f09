//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) these fan out over rayon's global pool.
//! Without it, or inside [`sequential`], they run on the calling thread. Every
//! helper returns results in index order, so output never depends on scheduling.

use std::cell::Cell;

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Runs `f` with all helpers in this module forced onto the calling thread.
pub fn sequential<R>(f: impl FnOnce() -> R) -> R {
    struct Reset(bool);
    impl Drop for Reset {
        fn drop(&mut self) {
            FORCE_SEQUENTIAL.with(|c| c.set(self.0));
        }
    }
    let prev = FORCE_SEQUENTIAL.with(|c| c.replace(true));
    let _reset = Reset(prev);
    f()
}

/// Whether helpers called from this thread would currently run in parallel.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.with(|c| c.get())
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// `items.iter().map(f).collect()`, possibly in parallel.
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// Calls `f(chunk_index, chunk)` on each `chunk_len`-sized piece of `data`.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(chunk_len > 0, "chunk_len must be positive");
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c));
        return;
    }
    data.chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c));
}

/// Pairwise (fixed binary tree) summation. The tree depends only on `values.len()`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_scope_restores_flag() {
        let outer = is_parallel();
        sequential(|| {
            assert!(!is_parallel());
            sequential(|| assert!(!is_parallel()));
            assert!(!is_parallel());
        });
        assert_eq!(is_parallel(), outer);
    }

    #[test]
    fn map_range_preserves_order() {
        let par = map_range(1000, |i| i * 3);
        let seq = sequential(|| map_range(1000, |i| i * 3));
        assert_eq!(par, seq);
        assert_eq!(par[999], 2997);
    }

    #[test]
    fn chunked_mutation_matches_sequential() {
        let mut a = vec![0usize; 103];
        let mut b = a.clone();
        for_each_chunk_mut(&mut a, 10, |ci, c| c.iter_mut().enumerate().for_each(|(j, v)| *v = ci * 10 + j));
        sequential(|| for_each_chunk_mut(&mut b, 10, |ci, c| c.iter_mut().enumerate().for_each(|(j, v)| *v = ci * 10 + j)));
        assert_eq!(a, b);
        assert_eq!(a, (0..103).collect::<Vec<_>>());
    }

    #[test]
    fn pairwise_sum_is_exact_on_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
