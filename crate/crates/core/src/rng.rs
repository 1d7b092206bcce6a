//! Seeded, splittable random streams.
//!
//! A [`SeededRng`] is a (seed, stream) pair. Each pair maps to an independent
//! ChaCha8 keystream, so work split across threads draws from per-task streams
//! and reproduces the serial result exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};
use crate::scalar::Real;
use crate::types::NoiseTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeededRng {
    pub seed: u64,
    pub stream: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    /// Child stream identified by `tag`. Distinct tags give distinct streams,
    /// and the derivation depends only on `(self, tag)`.
    pub fn substream(&self, tag: u64) -> Self {
        Self { seed: self.seed, stream: splitmix64(self.stream ^ splitmix64(tag.wrapping_add(1))) }
    }

    pub fn generator(&self) -> ChaCha8Rng {
        let mut g = ChaCha8Rng::seed_from_u64(self.seed);
        g.set_stream(self.stream);
        g
    }
}

pub fn standard_normal<T: Real, R: Rng + ?Sized>(g: &mut R) -> T {
    let z: f64 = g.sample(StandardNormal);
    T::lit(z)
}

pub fn normal<T: Real, R: Rng + ?Sized>(g: &mut R, mean: T, std_dev: T) -> T {
    mean + std_dev * standard_normal::<T, R>(g)
}

pub fn uniform<T: Real, R: Rng + ?Sized>(g: &mut R, lo: T, hi: T) -> T {
    let u: f64 = g.random();
    lo + (hi - lo) * T::lit(u)
}

/// Draws `K x N x m` i.i.d. `N(0, sigma^2)` perturbations. Trajectory `k`
/// reads from `rng.substream(k)`.
pub fn gaussian_noise<T: Real>(rng: &SeededRng, k: usize, n: usize, m: usize, sigma: T) -> Result<NoiseTensor<T>> {
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return param_err(format!("noise standard deviation must be positive, got {sigma}"));
    }
    let mut data = Vec::with_capacity(k * n * m);
    for traj in 0..k {
        let mut g = rng.substream(traj as u64).generator();
        for _ in 0..n * m {
            data.push(sigma * standard_normal::<T, _>(&mut g));
        }
    }
    NoiseTensor::new(k, n, m, sigma, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_tensor() {
        let r = SeededRng::new(42).substream(3);
        let a = gaussian_noise(&r, 5, 7, 2, 0.2f64).unwrap();
        let b = gaussian_noise(&r, 5, 7, 2, 0.2f64).unwrap();
        assert_eq!(a, b);
        let c = gaussian_noise(&SeededRng::new(43).substream(3), 5, 7, 2, 0.2f64).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn trajectory_rows_are_independent_of_k() {
        let r = SeededRng::new(7);
        let small = gaussian_noise(&r, 2, 4, 1, 1.0f64).unwrap();
        let big = gaussian_noise(&r, 6, 4, 1, 1.0f64).unwrap();
        assert_eq!(small.as_slice(), &big.as_slice()[..8]);
    }

    #[test]
    fn rejects_non_positive_sigma() {
        let r = SeededRng::new(1);
        assert!(gaussian_noise(&r, 1, 1, 1, 0.0f64).is_err());
        assert!(gaussian_noise(&r, 1, 1, 1, -1.0f64).is_err());
    }

    #[test]
    fn sample_moments() {
        let sigma = 0.005f64;
        let (k, n, m) = (100, 500, 2);
        let t = gaussian_noise(&SeededRng::new(2024), k, n, m, sigma).unwrap();
        let count = (k * n * m) as f64;
        let mean = t.as_slice().iter().sum::<f64>() / count;
        let var = t.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
        assert!(mean.abs() < 4.0 * sigma / count.sqrt(), "mean {mean}");
        assert!((var.sqrt() / sigma - 1.0).abs() < 0.02, "std {}", var.sqrt());
    }

    #[test]
    fn substreams_differ() {
        let r = SeededRng::new(9);
        let a: u64 = r.substream(0).generator().random();
        let b: u64 = r.substream(1).generator().random();
        let c: u64 = r.substream(0).substream(0).generator().random();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
