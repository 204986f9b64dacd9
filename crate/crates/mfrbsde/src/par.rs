//! Data-parallel helpers with a sequential fallback. Accumulations run over
//! fixed-size chunks combined in index order, so results are bitwise
//! identical for any thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk width for deterministic accumulation; independent of thread count.
pub const CHUNK: usize = 4096;

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    // a minimum split length keeps cheap per-element closures from drowning
    // in task overhead; collect preserves index order either way
    (0..n).into_par_iter().with_min_len(256).map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_index_order() {
        let out = map_indexed(10_000, |i| i as f64 * 0.5);
        for (i, v) in out.iter().enumerate() {
            assert_eq!(*v, i as f64 * 0.5);
        }
    }
}
