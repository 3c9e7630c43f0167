//! Seeded, portable, splittable randomness.
//!
//! [`Rng`] wraps ChaCha8. Streams are derived from `(seed, stream)` pairs with
//! SplitMix64 mixing, so a child stream depends only on its parent's seed and
//! the stream label, never on how many draws the parent already made. Integer
//! ranges are sampled through `u64` so results do not depend on `usize` width.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream labelled `stream`.
    pub fn split(&self, stream: u64) -> Self {
        Self::new(splitmix64(self.seed ^ splitmix64(stream.wrapping_add(0x5851_f42d_4c95_7f2d))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `[0, n)`. `n` must be positive.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        self.inner.random_range(0..n as u64) as usize
    }

    /// Uniform node id over a store of `n` vectors.
    pub fn uniform_node(&mut self, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(Error::EmptyStore);
        }
        Ok(self.below(n))
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Standard normal draw (Box-Muller, one value per call).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
    }

    /// Sum of `trials` Bernoulli(`p`) draws.
    pub fn binomial(&mut self, trials: usize, p: f64) -> usize {
        (0..trials).filter(|_| self.bernoulli(p)).count()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        let xs: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
        assert_ne!(Rng::new(43).next_u64(), xs[0]);
    }

    #[test]
    fn split_ignores_parent_progress() {
        let parent = Rng::new(7);
        let mut advanced = parent.clone();
        advanced.next_u64();
        assert_eq!(parent.split(3).next_u64(), advanced.split(3).next_u64());
        assert_ne!(parent.split(3).next_u64(), parent.split(4).next_u64());
    }

    #[test]
    fn uniform_node_edges() {
        let mut rng = Rng::new(42);
        assert_eq!(rng.uniform_node(0), Err(Error::EmptyStore));
        assert_eq!(rng.uniform_node(1), Ok(0));
        let a = rng.uniform_node(5000).unwrap();
        let b = rng.uniform_node(5000).unwrap();
        assert!(a < 5000 && b < 5000);
    }

    #[test]
    fn uniform_node_frequencies_within_five_sigma() {
        // 10^5 draws over 10 bins: each count ~ Binomial(10^5, 0.1), sigma = sqrt(9000).
        let mut rng = Rng::new(2024);
        let mut counts = [0usize; 10];
        for _ in 0..100_000 {
            counts[rng.uniform_node(10).unwrap()] += 1;
        }
        let sigma = libm::sqrt(100_000.0 * 0.1 * 0.9);
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 5.0 * sigma, "count {c}");
        }
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - 1e4).powi(2) / 1e4).sum();
        // chi-square with 9 dof; 99.9th percentile is 27.88
        assert!(chi2 < 27.88, "chi2 {chi2}");
    }

    #[test]
    fn normal_moments() {
        let mut rng = Rng::new(9);
        let xs: Vec<f64> = (0..50_000).map(|_| rng.normal()).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.02, "{mean}");
        assert!((var - 1.0).abs() < 0.03, "{var}");
    }
}
