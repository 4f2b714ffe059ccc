//! Coefficient catalog, initial ensembles and empirical measures.
//!
//! Every model in the catalog interacts with the empirical measure only
//! through its mean, and the diffusion matrix never depends on the particle
//! position. [`MeasureStats`] carries the mean so hot loops can evaluate the
//! coefficients for all particles against one summary per time step.

mod ensemble;
mod measure;
mod validate;
mod wasserstein;

pub use ensemble::InitialEnsemble;
pub use measure::EmpiricalMeasure;
pub use validate::{validate_model, ValidationReport, Witness, DEFAULT_PROBE_RADIUS};
pub use wasserstein::{wasserstein1, wasserstein1_with, W1Method, Wasserstein1, SLICED_PROJECTIONS};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Drift `A x + B mean(μ) + c`, diffusion `Σ0 + tanh(g · mean(μ)_1) Σ1`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearInteraction {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DVector<f64>,
    pub sigma0: DMatrix<f64>,
    pub sigma1: DMatrix<f64>,
    pub mean_gain: f64,
}

/// Drift `-∇U(x) - κ (x - mean(μ))` with `U(x) = Σ_axis p(x_axis)` for a
/// polynomial `p` of degree at most four; constant diffusion `Σ0`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientPotential {
    /// Coefficients `p_0..=p_4` of the per-axis potential polynomial.
    pub potential: [f64; 5],
    pub kappa: f64,
    pub sigma0: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    LinearInteraction(LinearInteraction),
    GradientPotential(GradientPotential),
}

/// Summary of an empirical measure sufficient to evaluate catalog
/// coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureStats {
    pub mean: Vec<f64>,
}

impl MeasureStats {
    pub fn from_points(d: usize, points: &[f64]) -> Self {
        let n = points.len() / d;
        let mut mean = vec![0.0; d];
        for p in points.chunks_exact(d) {
            for (m, x) in mean.iter_mut().zip(p) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        MeasureStats { mean }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientModel {
    family: Family,
    declared_l: f64,
    d: usize,
    m: usize,
}

impl CoefficientModel {
    pub fn new(family: Family, declared_l: f64) -> Result<Self> {
        if !(declared_l > 0.0 && declared_l.is_finite()) {
            return Err(Error::invalid(format!(
                "declared Lipschitz constant must be positive and finite, got {declared_l}"
            )));
        }
        let (d, m) = match &family {
            Family::LinearInteraction(li) => {
                let d = li.a.nrows();
                let m = li.sigma0.ncols();
                Error::check_dim("A columns", d, li.a.ncols())?;
                Error::check_dim("B rows", d, li.b.nrows())?;
                Error::check_dim("B columns", d, li.b.ncols())?;
                Error::check_dim("c length", d, li.c.len())?;
                Error::check_dim("Sigma0 rows", d, li.sigma0.nrows())?;
                Error::check_dim("Sigma1 rows", d, li.sigma1.nrows())?;
                Error::check_dim("Sigma1 columns", m, li.sigma1.ncols())?;
                if !li.mean_gain.is_finite() {
                    return Err(Error::invalid("meanGain must be finite"));
                }
                (d, m)
            }
            Family::GradientPotential(gp) => {
                if gp.kappa < 0.0 || !gp.kappa.is_finite() {
                    return Err(Error::invalid(format!(
                        "interaction strength must be >= 0, got {}",
                        gp.kappa
                    )));
                }
                if let Some(top) = gp.potential.iter().rposition(|c| *c != 0.0) {
                    if top > 0 && (top % 2 != 0 || gp.potential[top] < 0.0) {
                        return Err(Error::invalid(
                            "potential must have an even, positive leading term",
                        ));
                    }
                }
                (gp.sigma0.nrows(), gp.sigma0.ncols())
            }
        };
        if d == 0 || m == 0 {
            return Err(Error::invalid("state and noise dimensions must be positive"));
        }
        Ok(CoefficientModel {
            family,
            declared_l,
            d,
            m,
        })
    }

    /// One-dimensional linear interaction `b = a x + b mean + c`, `σ = sigma`.
    pub fn linear_1d(a: f64, b: f64, c: f64, sigma: f64, declared_l: f64) -> Result<Self> {
        Self::new(
            Family::LinearInteraction(LinearInteraction {
                a: DMatrix::from_element(1, 1, a),
                b: DMatrix::from_element(1, 1, b),
                c: DVector::from_element(1, c),
                sigma0: DMatrix::from_element(1, 1, sigma),
                sigma1: DMatrix::zeros(1, 1),
                mean_gain: 0.0,
            }),
            declared_l,
        )
    }

    /// `d`-dimensional linear interaction with scalar blocks `a I`, `b I`, `σ I`.
    pub fn linear_isotropic(d: usize, a: f64, b: f64, sigma: f64, declared_l: f64) -> Result<Self> {
        Self::new(
            Family::LinearInteraction(LinearInteraction {
                a: DMatrix::identity(d, d) * a,
                b: DMatrix::identity(d, d) * b,
                c: DVector::zeros(d),
                sigma0: DMatrix::identity(d, d) * sigma,
                sigma1: DMatrix::zeros(d, d),
                mean_gain: 0.0,
            }),
            declared_l,
        )
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn noise_dim(&self) -> usize {
        self.m
    }

    pub fn declared_l(&self) -> f64 {
        self.declared_l
    }

    /// The catalog never lets σ depend on the particle position.
    pub fn sigma_measure_only(&self) -> bool {
        true
    }

    pub fn with_declared_l(&self, declared_l: f64) -> Result<Self> {
        Self::new(self.family.clone(), declared_l)
    }

    pub fn stats(&self, mu: &EmpiricalMeasure) -> MeasureStats {
        MeasureStats { mean: mu.mean() }
    }

    /// Drift at `x` given the measure summary; no dimension checks.
    pub fn drift_into(&self, x: &[f64], stats: &MeasureStats, out: &mut [f64]) {
        match &self.family {
            Family::LinearInteraction(li) => {
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = li.c[i];
                    for j in 0..self.d {
                        acc += li.a[(i, j)] * x[j] + li.b[(i, j)] * stats.mean[j];
                    }
                    *o = acc;
                }
            }
            Family::GradientPotential(gp) => {
                let p = &gp.potential;
                for (i, o) in out.iter_mut().enumerate() {
                    let xi = x[i];
                    let du = p[1] + xi * (2.0 * p[2] + xi * (3.0 * p[3] + xi * 4.0 * p[4]));
                    *o = -du - gp.kappa * (xi - stats.mean[i]);
                }
            }
        }
    }

    /// Diffusion matrix for a measure summary; no bound check.
    pub fn diffusion_at(&self, stats: &MeasureStats) -> DMatrix<f64> {
        match &self.family {
            Family::LinearInteraction(li) => {
                let scale = (li.mean_gain * stats.mean[0]).tanh();
                &li.sigma0 + &li.sigma1 * scale
            }
            Family::GradientPotential(gp) => gp.sigma0.clone(),
        }
    }

    pub fn drift_eval(&self, x: &[f64], mu: &EmpiricalMeasure) -> Result<DVector<f64>> {
        Error::check_dim("drift state", self.d, x.len())?;
        Error::check_dim("drift measure", self.d, mu.dim())?;
        let mut out = DVector::zeros(self.d);
        self.drift_into(x, &self.stats(mu), out.as_mut_slice());
        Ok(out)
    }

    /// σ(x, μ); fails when its Frobenius norm exceeds the declared constant.
    pub fn diffusion_eval(&self, x: &[f64], mu: &EmpiricalMeasure) -> Result<DMatrix<f64>> {
        Error::check_dim("diffusion state", self.d, x.len())?;
        Error::check_dim("diffusion measure", self.d, mu.dim())?;
        let sigma = self.diffusion_at(&self.stats(mu));
        let norm = sigma.norm();
        if norm > self.declared_l * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "|sigma| = {norm} exceeds declared constant {}",
                self.declared_l
            )));
        }
        Ok(sigma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delta(x: f64) -> EmpiricalMeasure {
        EmpiricalMeasure::uniform(1, vec![x])
    }

    #[test]
    fn linear_drift_examples() {
        let ou = CoefficientModel::linear_1d(-1.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(ou.drift_eval(&[2.0], &delta(5.0)).unwrap()[0], -2.0);

        let mean_only = CoefficientModel::linear_1d(0.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let mu = EmpiricalMeasure::uniform(1, vec![1.0, 3.0]);
        assert_eq!(mean_only.drift_eval(&[7.0], &mu).unwrap()[0], 2.0);
    }

    #[test]
    fn quartic_potential_drift() {
        let model = CoefficientModel::new(
            Family::GradientPotential(GradientPotential {
                potential: [0.0, 0.0, 0.0, 0.0, 0.25],
                kappa: 1.0,
                sigma0: DMatrix::identity(1, 1),
            }),
            1.0,
        )
        .unwrap();
        assert_eq!(model.drift_eval(&[1.0], &delta(0.0)).unwrap()[0], -2.0);
    }

    fn sigma_model(s0: f64, s1: f64, gain: f64, l: f64) -> CoefficientModel {
        CoefficientModel::new(
            Family::LinearInteraction(LinearInteraction {
                a: DMatrix::zeros(1, 1),
                b: DMatrix::zeros(1, 1),
                c: DVector::zeros(1),
                sigma0: DMatrix::from_element(1, 1, s0),
                sigma1: DMatrix::from_element(1, 1, s1),
                mean_gain: gain,
            }),
            l,
        )
        .unwrap()
    }

    #[test]
    fn diffusion_examples() {
        let m = sigma_model(1.0, 0.0, 0.0, 1.0);
        assert_eq!(m.diffusion_eval(&[3.0], &delta(-4.0)).unwrap()[(0, 0)], 1.0);

        let m = sigma_model(0.0, 1.0, 1.0, 1.0);
        assert_eq!(m.diffusion_eval(&[3.0], &delta(0.0)).unwrap()[(0, 0)], 0.0);

        let m = sigma_model(1.0, 1.0, 1.0, 2.0);
        let s = m.diffusion_eval(&[0.0], &delta(10.0)).unwrap()[(0, 0)];
        assert!((s - (1.0 + 10f64.tanh())).abs() < 1e-15);
        assert!(s > 1.999_999 && s < 2.0);
    }

    #[test]
    fn diffusion_above_declared_constant_is_rejected() {
        let m = sigma_model(1.0, 1.0, 1.0, 1.5);
        assert!(m.diffusion_eval(&[0.0], &delta(10.0)).is_err());
    }

    #[test]
    fn diffusion_does_not_depend_on_state() {
        let m = sigma_model(0.5, 0.3, 2.0, 1.0);
        let mu = EmpiricalMeasure::uniform(1, vec![0.2, -0.7, 1.1]);
        let a = m.diffusion_eval(&[-3.0], &mu).unwrap();
        let b = m.diffusion_eval(&[8.0], &mu).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_mismatch_is_fatal() {
        let m = CoefficientModel::linear_isotropic(2, -1.0, 0.0, 1.0, 2.0).unwrap();
        let mu = EmpiricalMeasure::uniform(2, vec![0.0, 0.0]);
        assert!(matches!(
            m.drift_eval(&[1.0], &mu),
            Err(Error::DimensionMismatch { .. })
        ));
        let mu1 = EmpiricalMeasure::uniform(1, vec![0.0]);
        assert!(m.drift_eval(&[1.0, 2.0], &mu1).is_err());
    }

    #[test]
    fn odd_leading_potential_rejected() {
        let r = CoefficientModel::new(
            Family::GradientPotential(GradientPotential {
                potential: [0.0, 0.0, 0.0, 1.0, 0.0],
                kappa: 0.0,
                sigma0: DMatrix::identity(1, 1),
            }),
            1.0,
        );
        assert!(r.is_err());
    }
}
