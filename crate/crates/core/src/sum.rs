//! Deterministic pairwise (tree) summation.
//!
//! The reduction order depends only on the length of the input, so serial
//! and parallel callers that materialize the same term sequence obtain
//! bit-identical results.

use crate::Real;

const LEAF: usize = 32;

/// Sums a slice with a fixed binary tree over blocks of 32 terms.
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    if values.len() <= LEAF {
        let mut acc = T::zero();
        for &v in values {
            acc += v;
        }
        return acc;
    }
    let mid = split_point(values.len());
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of `term(i)` for `i in 0..len`, without allocating.
pub fn pairwise_sum_by<T: Real, F: Fn(usize) -> T>(len: usize, term: F) -> T {
    sum_range(0, len, &term)
}

/// Parallel [`pairwise_sum_by`]: the tree is the same, only large subtrees
/// are evaluated on separate threads, so the result is bit-identical.
pub fn par_pairwise_sum_by<T: Real, F: Fn(usize) -> T + Sync>(len: usize, term: F) -> T {
    par_sum_range(0, len, &term)
}

const PAR_MIN: usize = 1 << 14;

fn par_sum_range<T: Real, F: Fn(usize) -> T + Sync>(lo: usize, hi: usize, term: &F) -> T {
    let len = hi - lo;
    if len <= PAR_MIN {
        return sum_range(lo, hi, term);
    }
    let mid = lo + split_point(len);
    let (a, b) = rayon::join(|| par_sum_range(lo, mid, term), || par_sum_range(mid, hi, term));
    a + b
}

fn sum_range<T: Real, F: Fn(usize) -> T>(lo: usize, hi: usize, term: &F) -> T {
    let len = hi - lo;
    if len <= LEAF {
        let mut acc = T::zero();
        for i in lo..hi {
            acc += term(i);
        }
        return acc;
    }
    let mid = lo + split_point(len);
    sum_range(lo, mid, term) + sum_range(mid, hi, term)
}

// Split on a multiple of the leaf size so that both halves are full blocks
// whenever possible.
fn split_point(len: usize) -> usize {
    let blocks = len.div_ceil(LEAF);
    (blocks / 2).max(1) * LEAF
}
