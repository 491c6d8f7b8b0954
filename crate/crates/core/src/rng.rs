//! The single seeded random source used across the crate.
//!
//! Backed by ChaCha8 (`rand_chacha`), whose output stream is fixed by the
//! seed and independent of platform endianness or word size. Normal
//! deviates use the Box–Muller transform.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Standard normal deviate via Box–Muller; the second value of each pair is cached.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - u keeps the log argument in (0, 1].
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.standard_normal()
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.inner.gen_range(0..=i);
            items.swap(i, j);
        }
    }
}

/// `count` draws from N(0, 2 / fan_in).
pub fn he_normal<T: Scalar>(rng: &mut Rng, fan_in: usize, count: usize) -> Result<Vec<T>> {
    if fan_in == 0 {
        return Err(Error::invalid("He initialization needs fan_in >= 1"));
    }
    let std = (2.0 / fan_in as f64).sqrt();
    Ok((0..count)
        .map(|_| T::from_f64_lossy(rng.normal(0.0, std)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn he_normal_statistics() {
        let mut rng = Rng::new(2024);
        let n = 1_000_000;
        let xs: Vec<f64> = he_normal(&mut rng, 288, n).unwrap();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let target = (2.0f64 / 288.0).sqrt();
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((var.sqrt() - target).abs() / target < 0.02, "std {}", var.sqrt());
    }

    #[test]
    fn he_normal_fan_in_two_has_unit_std() {
        let mut rng = Rng::new(1);
        let xs: Vec<f64> = he_normal(&mut rng, 2, 200_000).unwrap();
        let std = (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt();
        assert!((std - 1.0).abs() < 0.01);
    }

    #[test]
    fn he_normal_is_deterministic_and_rejects_zero_fan_in() {
        let a: Vec<f32> = he_normal(&mut Rng::new(9), 27, 100).unwrap();
        let b: Vec<f32> = he_normal(&mut Rng::new(9), 27, 100).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert!(he_normal::<f32>(&mut Rng::new(9), 0, 1).is_err());
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut v: Vec<usize> = (0..50).collect();
        Rng::new(4).shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
    }
}
