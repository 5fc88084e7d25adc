//! Deterministic reductions.
//!
//! Long sums are split into fixed-size blocks whose partial sums are then
//! added in block order, so results are identical for any thread count.

use rayon::prelude::*;

const BLOCK: usize = 8192;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    if a.len() <= BLOCK {
        return a.iter().zip(b).map(|(x, y)| x * y).sum();
    }
    let partials: Vec<f64> = a
        .par_chunks(BLOCK)
        .zip(b.par_chunks(BLOCK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    partials.iter().sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Sum of `f(i)` over `0..n` with the same blocking as [`dot`].
pub fn sum_by(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    if n <= BLOCK {
        return (0..n).map(f).sum();
    }
    let blocks = n.div_ceil(BLOCK);
    let partials: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| (b * BLOCK..((b + 1) * BLOCK).min(n)).map(&f).sum())
        .collect();
    partials.iter().sum()
}
