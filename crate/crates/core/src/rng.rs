//! Reproducible randomness.
//!
//! Every random choice in the pipeline draws from [`Rng`], a PCG-XSL-RR
//! 128/64 generator (`rand_pcg::Pcg64`). Its output and the `rand` 0.8
//! sampling routines layered on top are platform independent, so a seed
//! pins the whole stream.

use rand::{Rng as _, SeedableRng};
use rand_pcg::Pcg64;

#[derive(Debug, Clone)]
pub struct Rng {
    inner: Pcg64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            inner: Pcg64::seed_from_u64(seed),
        }
    }

    /// Independent child stream for item `index` of a batch, so batch
    /// items can be processed in any order with identical results.
    pub fn split(seed: u64, index: u64) -> Self {
        Rng::new(splitmix64(seed ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.gen()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen()
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
