use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use super::EmpiricalMeasure;
use crate::error::{Error, Result};
use crate::rng::seeded_rng;

/// Deterministic initial positions `x_j`, one per particle.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialEnsemble {
    d: usize,
    points: Vec<f64>,
    source: String,
}

impl InitialEnsemble {
    pub fn from_points(d: usize, points: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        if d == 0 || points.is_empty() || points.len() % d != 0 {
            return Err(Error::invalid("initial points must be a non-empty multiple of d"));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("initial points must be finite"));
        }
        Ok(InitialEnsemble {
            d,
            points,
            source: source.into(),
        })
    }

    /// `n` copies of the point `at`.
    pub fn dirac(n: usize, at: &[f64]) -> Result<Self> {
        let points = at.iter().copied().cycle().take(n * at.len()).collect();
        Self::from_points(at.len(), points, format!("dirac n={n} at {at:?}"))
    }

    /// One-dimensional midpoint quantiles `mean + std Φ^{-1}((j + 1/2) / n)`.
    pub fn normal_quantiles(n: usize, mean: f64, std: f64) -> Result<Self> {
        if n == 0 || !(std >= 0.0) {
            return Err(Error::invalid("quantile ensemble needs n >= 1 and std >= 0"));
        }
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        let points = (0..n)
            .map(|j| mean + std * normal.inverse_cdf((j as f64 + 0.5) / n as f64))
            .collect();
        Self::from_points(
            1,
            points,
            format!("normal quantiles n={n} mean={mean} std={std}"),
        )
    }

    /// Frozen sample of `n` points from `N(mean, std² I)`.
    pub fn sampled_normal(n: usize, mean: &[f64], std: f64, seed: u64) -> Result<Self> {
        let d = mean.len();
        let mut rng = seeded_rng(seed, 0x1d17);
        let points = (0..n * d)
            .map(|i| {
                let z: f64 = rng.sample(StandardNormal);
                mean[i % d] + std * z
            })
            .collect();
        Self::from_points(
            d,
            points,
            format!("sampled normal n={n} mean={mean:?} std={std} seed={seed}"),
        )
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.d..(j + 1) * self.d]
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// `(1/N) Σ |x_j|²`.
    pub fn second_moment(&self) -> f64 {
        self.points.iter().map(|x| x * x).sum::<f64>() / self.len() as f64
    }

    pub fn measure(&self) -> EmpiricalMeasure {
        EmpiricalMeasure::uniform(self.d, self.points.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_are_symmetric_and_sorted() {
        let e = InitialEnsemble::normal_quantiles(64, 0.0, 1.0).unwrap();
        let p = e.points();
        assert!(p.windows(2).all(|w| w[0] < w[1]));
        for j in 0..32 {
            assert!((p[j] + p[63 - j]).abs() < 1e-12);
        }
        assert!(e.second_moment() > 0.9 && e.second_moment() < 1.0);
    }

    #[test]
    fn dirac_repeats_point() {
        let e = InitialEnsemble::dirac(3, &[1.0, -2.0]).unwrap();
        assert_eq!(e.points(), &[1.0, -2.0, 1.0, -2.0, 1.0, -2.0]);
        assert_eq!(e.second_moment(), 5.0);
    }

    #[test]
    fn sampled_ensemble_is_reproducible() {
        let a = InitialEnsemble::sampled_normal(10, &[0.0, 1.0], 0.5, 9).unwrap();
        let b = InitialEnsemble::sampled_normal(10, &[0.0, 1.0], 0.5, 9).unwrap();
        assert_eq!(a, b);
    }
}
