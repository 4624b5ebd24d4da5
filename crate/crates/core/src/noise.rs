//! Additive Gaussian noise for benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Generator recorded in reports.
pub const NOISE_RNG: &str = "ChaCha8Rng::seed_from_u64 + rand_distr::Normal, row-major draws";

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoiseSpec {
    /// Noise std as a fraction of `peak`.
    pub level: f64,
    pub seed: u64,
    pub peak: f64,
    /// Absolute std; overrides `level * peak` when set.
    pub sigma: Option<f64>,
}

impl NoiseSpec {
    pub fn new(level: f64, seed: u64) -> Self {
        Self { level, seed, peak: 255.0, sigma: None }
    }

    pub fn std_dev(&self) -> f64 {
        self.sigma.unwrap_or(self.level * self.peak)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak.is_finite() && self.peak > 0.0) {
            return Err(Error::param("peak", format!("must be positive, got {}", self.peak)));
        }
        match self.sigma {
            Some(s) if !(s.is_finite() && s > 0.0) => {
                Err(Error::param("sigma", format!("must be positive, got {s}")))
            }
            Some(_) => Ok(()),
            None if !(self.level.is_finite() && self.level > 0.0) => {
                Err(Error::param("level", format!("must be positive, got {}", self.level)))
            }
            None => Ok(()),
        }
    }
}

/// Returns `(f, delta)` with `f = u_gt + n` (unclipped) and `delta = ||n||_2`.
pub fn add_gaussian_noise(u_gt: &ScalarField, spec: &NoiseSpec) -> Result<(ScalarField, f64)> {
    spec.validate()?;
    let normal = Normal::new(0.0, spec.std_dev())
        .map_err(|e| Error::param("sigma", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise: Vec<f64> = (0..u_gt.len()).map(|_| normal.sample(&mut rng)).collect();
    let data = u_gt.as_slice().iter().zip(&noise).map(|(u, n)| u + n).collect();
    let f = ScalarField::from_raw(u_gt.rows(), u_gt.cols(), data);
    // delta is measured on the stored f so that ||f - u_gt|| <= delta holds exactly.
    let delta = f.sub(u_gt)?.l2_norm();
    Ok((f, delta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanishing_noise() {
        let u = ScalarField::from_fn(8, 8, |i, j| (i * 8 + j) as f64);
        let (f, delta) = add_gaussian_noise(&u, &NoiseSpec::new(1e-12, 3)).unwrap();
        assert!(delta < 1e-8);
        assert!(f.sub(&u).unwrap().as_slice().iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn deterministic_per_seed() {
        let u = ScalarField::filled(16, 16, 100.0);
        let a = add_gaussian_noise(&u, &NoiseSpec::new(0.1, 7)).unwrap();
        let b = add_gaussian_noise(&u, &NoiseSpec::new(0.1, 7)).unwrap();
        let c = add_gaussian_noise(&u, &NoiseSpec::new(0.1, 8)).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.to_bits(), b.1.to_bits());
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn sample_std_at_ten_percent() {
        let u = ScalarField::zeros(256, 256);
        let (f, delta) = add_gaussian_noise(&u, &NoiseSpec::new(0.10, 42)).unwrap();
        let n = f.len() as f64;
        let mean = f.mean();
        let std = (f.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(std > 24.2 && std < 26.8, "{std}");
        assert!(mean.abs() < 0.5);
        assert_eq!(delta, f.l2_norm());
    }

    #[test]
    fn sigma_override_and_validation() {
        let spec = NoiseSpec { sigma: Some(5.05), ..NoiseSpec::new(0.1, 1) };
        assert_eq!(spec.std_dev(), 5.05);
        assert!(NoiseSpec::new(0.0, 1).validate().is_err());
        assert!(NoiseSpec { peak: 0.0, ..NoiseSpec::new(0.1, 1) }.validate().is_err());
        assert!(NoiseSpec { sigma: Some(-1.0), ..NoiseSpec::new(0.1, 1) }.validate().is_err());
    }
}
