//! Thin parallelism layer.
//!
//! Every data-parallel loop in the crate goes through these helpers. With the
//! `parallel` feature they dispatch to rayon; otherwise they are plain
//! iterators. Reductions use fixed-size blocks, so a sum never depends on how
//! work was split across threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Block length for reductions. Fixed so results are partition-independent.
const BLOCK: usize = 2048;

/// Evaluates `f` on `0..n` and collects the results in index order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
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

/// Maps over a slice, preserving order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
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

/// Runs `f(chunk_index, chunk)` over consecutive chunks of `data`.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

/// Applies `f(index, &mut value)` to every element.
pub fn for_each_indexed_mut<T, F>(data: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    for_each_chunk_mut(data, BLOCK, |c, chunk| {
        let base = c * BLOCK;
        for (i, v) in chunk.iter_mut().enumerate() {
            f(base + i, v);
        }
    });
}

/// Compensated sum of `f(i)` for `i in 0..n`.
///
/// Each block of [`BLOCK`] terms is summed with Neumaier compensation and the
/// block partials are combined pairwise in index order.
pub fn sum_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let blocks = n.div_ceil(BLOCK);
    let partials = map_range(blocks, |b| {
        let lo = b * BLOCK;
        let hi = (lo + BLOCK).min(n);
        neumaier((lo..hi).map(&f))
    });
    pairwise(&partials)
}

/// Maximum of `f(i)` over `0..n` (`-inf` when empty).
pub fn max_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let blocks = n.div_ceil(BLOCK);
    map_range(blocks, |b| {
        let lo = b * BLOCK;
        let hi = (lo + BLOCK).min(n);
        (lo..hi).map(&f).fold(f64::NEG_INFINITY, f64::max)
    })
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max)
}

pub fn sum(values: &[f64]) -> f64 {
    sum_by(values.len(), |i| values[i])
}

fn neumaier(iter: impl Iterator<Item = f64>) -> f64 {
    let mut s = 0.0_f64;
    let mut c = 0.0_f64;
    for x in iter {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

fn pairwise(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise(a) + pairwise(b)
        }
    }
}

/// Number of worker threads the helpers will use.
pub fn current_num_threads() -> usize {
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
    fn compensated_sum_recovers_small_terms() {
        let mut v = vec![1.0e16, 1.0, -1.0e16];
        v.extend(std::iter::repeat_n(1.0, 10));
        assert_eq!(sum(&v), 11.0);
    }

    #[test]
    fn sum_matches_naive_on_integers() {
        let n = 10_000;
        let s = sum_by(n, |i| i as f64);
        assert_eq!(s, (n * (n - 1) / 2) as f64);
    }

    #[test]
    fn max_of_empty_is_neg_inf() {
        assert_eq!(max_by(0, |_| 1.0), f64::NEG_INFINITY);
        assert_eq!(max_by(5000, |i| (i % 777) as f64), 776.0);
    }

    #[test]
    fn map_range_preserves_order() {
        let v = map_range(100, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }
}
