//! Deterministic parallel summation.
//!
//! Index ranges are cut into chunks of a fixed size. Each chunk is summed with
//! a pairwise tree and the chunk totals are combined with the same tree. The
//! tree shape depends only on the length, so the result is bitwise identical
//! for any number of worker threads.

use rayon::prelude::*;

/// Number of terms per parallel work unit.
pub const CHUNK: usize = 1 << 14;
const LEAF: usize = 32;

fn pairwise<const K: usize, F>(lo: usize, hi: usize, f: &F) -> [f64; K]
where
    F: Fn(usize) -> [f64; K],
{
    if hi - lo <= LEAF {
        let mut acc = [0.0; K];
        for i in lo..hi {
            let v = f(i);
            for k in 0..K {
                acc[k] += v[k];
            }
        }
        acc
    } else {
        let mid = lo + (hi - lo) / 2;
        let a = pairwise(lo, mid, f);
        let b = pairwise(mid, hi, f);
        let mut out = a;
        for k in 0..K {
            out[k] += b[k];
        }
        out
    }
}

/// Sums `K` quantities over `0..len` in one pass.
pub fn sum_n<const K: usize, F>(len: usize, f: F) -> [f64; K]
where
    F: Fn(usize) -> [f64; K] + Sync,
{
    if len == 0 {
        return [0.0; K];
    }
    let n_chunks = len.div_ceil(CHUNK);
    let partials: Vec<[f64; K]> = (0..n_chunks)
        .into_par_iter()
        .map(|c| pairwise(c * CHUNK, ((c + 1) * CHUNK).min(len), &f))
        .collect();
    pairwise(0, partials.len(), &|i| partials[i])
}

pub fn sum<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    sum_n::<1, _>(len, |i| [f(i)])[0]
}

/// Deterministic sum of a slice.
pub fn sum_slice(values: &[f64]) -> f64 {
    sum(values.len(), |i| values[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_exact_integer_sum() {
        let n = 3 * CHUNK + 17;
        let s = sum(n, |i| i as f64);
        assert_eq!(s, (n * (n - 1) / 2) as f64);
    }

    #[test]
    fn empty_is_zero() {
        assert_eq!(sum(0, |_| 1.0), 0.0);
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let n = 5 * CHUNK + 1234;
        let f = |i: usize| ((i as f64) * 0.37).sin() * 1e-3 + 1.0 / (1.0 + i as f64);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| sum(n, f));
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| sum(n, f));
        assert_eq!(one.to_bits(), four.to_bits());
    }

    #[test]
    fn multi_sum_agrees_with_single() {
        let n = 2 * CHUNK + 5;
        let both = sum_n::<2, _>(n, |i| [i as f64, 1.0]);
        assert_eq!(both[0], sum(n, |i| i as f64));
        assert_eq!(both[1], n as f64);
    }
}
