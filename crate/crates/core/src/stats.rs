//! Quantiles, sampling-distribution bounds, sample moments and seeded noise.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}

/// Inverse standard-normal CDF.
pub fn normal_quantile(p: f64) -> Result<f64> {
    check_probability(p)?;
    let n = Normal::standard();
    Ok(n.inverse_cdf(p))
}

/// Inverse chi-squared CDF with `dof` degrees of freedom.
pub fn chi2_quantile(p: f64, dof: usize) -> Result<f64> {
    check_probability(p)?;
    Ok(chi2(dof)?.inverse_cdf(p))
}

pub fn chi2_cdf(x: f64, dof: usize) -> Result<f64> {
    Ok(chi2(dof)?.cdf(x))
}

fn chi2(dof: usize) -> Result<ChiSquared> {
    if dof == 0 {
        return Err(Error::InvalidArgument("chi-squared needs at least one degree of freedom".into()));
    }
    ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Confidence limits for the sample mean `[ℓ1, ℓ2]` and variance `[p1, p2]`
/// of `C` i.i.d. `N(0, σ²)` draws.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBounds {
    pub l1: f64,
    pub l2: f64,
    pub p1: f64,
    pub p2: f64,
    pub alpha: f64,
    pub count: usize,
}

impl ConfidenceBounds {
    pub fn contains(&self, mean: f64, variance: f64) -> bool {
        (self.l1..=self.l2).contains(&mean) && (self.p1..=self.p2).contains(&variance)
    }
}

pub fn confidence_bounds(sigma: f64, count: usize, alpha: f64) -> Result<ConfidenceBounds> {
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("noise level must be non-negative, got {sigma}")));
    }
    if count < 2 {
        return Err(Error::InvalidArgument("variance bounds need at least two samples".into()));
    }
    check_probability(alpha)?;
    let z = normal_quantile(alpha / 2.0)?;
    let dof = count - 1;
    let var = sigma * sigma / dof as f64;
    let l1 = z * sigma / (count as f64).sqrt();
    Ok(ConfidenceBounds {
        l1,
        l2: -l1,
        p1: chi2_quantile(alpha / 2.0, dof)? * var,
        p2: chi2_quantile(1.0 - alpha / 2.0, dof)? * var,
        alpha,
        count,
    })
}

/// Sample mean and unbiased sample variance.
pub fn sample_moments(e: &[f64]) -> Result<(f64, f64)> {
    if e.len() < 2 {
        return Err(Error::InvalidArgument("sample moments need at least two values".into()));
    }
    let c = e.len() as f64;
    let s: f64 = e.iter().sum();
    let s2: f64 = e.iter().map(|v| v * v).sum();
    Ok((s / c, ((s2 - s * s / c) / (c - 1.0)).max(0.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

/// Seeded stream of uniform and Gaussian variates (ChaCha8 core, Box–Muller).
pub struct Stream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let t = std::f64::consts::TAU * u2;
        self.spare = Some(r * t.sin());
        r * t.cos()
    }
}

pub fn sample_noise(model: &NoiseModel, n: usize) -> Vec<f64> {
    if model.sigma == 0.0 {
        return vec![0.0; n];
    }
    let mut s = Stream::new(model.seed);
    (0..n).map(|_| model.sigma * s.standard_normal()).collect()
}

pub fn sample_uniform(seed: u64, n: usize) -> Vec<f64> {
    let mut s = Stream::new(seed);
    (0..n).map(|_| s.uniform()).collect()
}
