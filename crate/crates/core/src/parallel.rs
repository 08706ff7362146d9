//! Deterministic particle-loop parallelism.
//!
//! Particles are always processed in fixed blocks of [`BLOCK`] and the
//! per-block partial results are combined by a fixed pairwise tree. The
//! floating-point result therefore does not depend on the worker count.

use rayon::prelude::*;

/// Particles per block.
pub const BLOCK: usize = 256;

/// Worker pool for particle loops. One worker runs everything inline.
#[derive(Debug, Default)]
pub struct Workers {
    pool: Option<rayon::ThreadPool>,
}

impl Workers {
    pub fn serial() -> Self {
        Workers { pool: None }
    }

    pub fn new(count: usize) -> Self {
        if count <= 1 {
            return Workers::serial();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(count)
            .build()
            .ok();
        Workers { pool }
    }

    pub fn count(&self) -> usize {
        self.pool.as_ref().map_or(1, |p| p.current_num_threads())
    }

    /// Run `f(offset, chunk)` over consecutive blocks of `data` and return
    /// the per-block results in block order.
    pub fn map_blocks<A, T, F>(&self, data: &mut [A], f: F) -> Vec<T>
    where
        A: Send,
        T: Send,
        F: Fn(usize, &mut [A]) -> T + Sync,
    {
        match &self.pool {
            None => data
                .chunks_mut(BLOCK)
                .enumerate()
                .map(|(b, chunk)| f(b * BLOCK, chunk))
                .collect(),
            Some(pool) => pool.install(|| {
                data.par_chunks_mut(BLOCK)
                    .enumerate()
                    .map(|(b, chunk)| f(b * BLOCK, chunk))
                    .collect()
            }),
        }
    }

    /// Read-only variant of [`Workers::map_blocks`] over `0..n`.
    pub fn map_ranges<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(std::ops::Range<usize>) -> T + Sync,
    {
        let blocks = n.div_ceil(BLOCK);
        let range = |b: usize| b * BLOCK..((b + 1) * BLOCK).min(n);
        match &self.pool {
            None => (0..blocks).map(|b| f(range(b))).collect(),
            Some(pool) => pool.install(|| (0..blocks).into_par_iter().map(|b| f(range(b))).collect()),
        }
    }
}

/// Combine `items` with a fixed balanced pairwise tree.
pub fn pairwise<T, F>(mut items: Vec<T>, combine: F) -> Option<T>
where
    F: Fn(T, T) -> T,
{
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(combine(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_results_independent_of_worker_count() {
        let n = 10 * BLOCK + 17;
        let values: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.731).sin() * 1e-3 + 1.0 / (i + 1) as f64).collect();
        let sum_with = |workers: &Workers| {
            let parts = workers.map_ranges(n, |r| values[r].iter().sum::<f64>());
            pairwise(parts, |a, b| a + b).unwrap()
        };
        let serial = sum_with(&Workers::serial());
        let threaded = sum_with(&Workers::new(4));
        assert_eq!(serial.to_bits(), threaded.to_bits());
    }

    #[test]
    fn pairwise_of_empty_is_none() {
        assert!(pairwise(Vec::<f64>::new(), |a, b| a + b).is_none());
    }
}
