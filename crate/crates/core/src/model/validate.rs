//! Probe-based check of the Lipschitz and boundedness condition
//!
//! `|b(x,μ) - b(y,ν)| + |σ(x,μ) - σ(y,ν)| <= L (|x - y| + W1(μ, ν))`,
//! `|σ(x,μ)| <= L`,
//!
//! on random probes drawn from the box `[-R, R]^d`.

use std::fmt;

use rand::Rng;

use super::measure::{dist, norm};
use super::{wasserstein1, CoefficientModel, EmpiricalMeasure};
use crate::error::{Error, Result};
use crate::rng::seeded_rng;

pub const DEFAULT_PROBE_RADIUS: f64 = 10.0;
const PROBE_ATOMS: usize = 4;
const RATIO_SLACK: f64 = 1e-12;

/// The probe pair achieving the largest ratio.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub probe_count: usize,
    pub probe_radius: f64,
    pub seed: u64,
    pub declared_l: f64,
    /// Largest observed `(|Δb| + |Δσ|) / (L (|x-y| + W1))`.
    pub max_ratio: f64,
    pub max_sigma_norm: f64,
    /// Largest observed `|b(x,μ)| / (L (1 + |x| + ∫|y|μ(dy)))`.
    pub max_growth_ratio: f64,
    pub witness: Option<Witness>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn summary(&self) -> String {
        let mut s = format!(
            "max Lipschitz ratio {:.6} with L = {} ({} probes, radius {})",
            self.max_ratio, self.declared_l, self.probe_count, self.probe_radius
        );
        if self.max_sigma_norm > self.declared_l * (1.0 + RATIO_SLACK) {
            s.push_str(&format!("; |sigma| reaches {:.6}", self.max_sigma_norm));
        }
        if let (false, Some(w)) = (self.passed, &self.witness) {
            s.push_str(&format!("; witness x = {:?}, y = {:?}", w.x, w.y));
        }
        s
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "passed = {}", self.passed)?;
        writeln!(f, "declared_l = {}", self.declared_l)?;
        writeln!(f, "probe_count = {}", self.probe_count)?;
        writeln!(f, "probe_radius = {}", self.probe_radius)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "max_lipschitz_ratio = {:e}", self.max_ratio)?;
        writeln!(f, "max_sigma_norm = {:e}", self.max_sigma_norm)?;
        writeln!(f, "max_growth_ratio = {:e}", self.max_growth_ratio)?;
        if let Some(w) = &self.witness {
            writeln!(f, "witness_x = {:?}", w.x)?;
            writeln!(f, "witness_y = {:?}", w.y)?;
            writeln!(f, "witness_mu_atoms = {:?}", w.mu)?;
            writeln!(f, "witness_nu_atoms = {:?}", w.nu)?;
            writeln!(f, "witness_ratio = {:e}", w.ratio)?;
        }
        Ok(())
    }
}

/// Samples `probe_count` probe pairs and checks the declared constant.
/// Returns the report on success and [`Error::ModelValidation`] otherwise.
pub fn validate_model(
    model: &CoefficientModel,
    probe_count: usize,
    seed: u64,
    probe_radius: f64,
) -> Result<ValidationReport> {
    if probe_count < 2 {
        return Err(Error::invalid("validation needs at least 2 probes"));
    }
    if !(probe_radius > 0.0) {
        return Err(Error::invalid("probe radius must be positive"));
    }
    let d = model.dim();
    let l = model.declared_l();
    let mut rng = seeded_rng(seed, 0xa11d);
    let mut sample = |len: usize| -> Vec<f64> {
        (0..len)
            .map(|_| rng.random_range(-probe_radius..=probe_radius))
            .collect()
    };

    let mut report = ValidationReport {
        probe_count,
        probe_radius,
        seed,
        declared_l: l,
        max_ratio: 0.0,
        max_sigma_norm: 0.0,
        max_growth_ratio: 0.0,
        witness: None,
        passed: true,
    };
    let mut bx = vec![0.0; d];
    let mut by = vec![0.0; d];
    for probe in 0..probe_count {
        let x = sample(d);
        let mut y = sample(d);
        let mu_atoms = sample(d * PROBE_ATOMS);
        // Every other probe keeps the measure fixed and moves the state a
        // little, which isolates the local state-Lipschitz behaviour.
        let nu_atoms = if probe % 2 == 0 {
            sample(d * PROBE_ATOMS)
        } else {
            let scale = 1e-3 * probe_radius;
            for (yi, xi) in y.iter_mut().zip(&x) {
                *yi = xi + scale * (*yi / probe_radius);
            }
            mu_atoms.clone()
        };
        let mu = EmpiricalMeasure::uniform(d, mu_atoms);
        let nu = EmpiricalMeasure::uniform(d, nu_atoms);
        let (smu, snu) = (model.stats(&mu), model.stats(&nu));
        model.drift_into(&x, &smu, &mut bx);
        model.drift_into(&y, &snu, &mut by);
        let sigma_mu = model.diffusion_at(&smu);
        let sigma_nu = model.diffusion_at(&snu);

        let lhs = dist(&bx, &by) + (&sigma_mu - &sigma_nu).norm();
        let rhs = l * (dist(&x, &y) + wasserstein1(&mu, &nu)?.value);
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        let sigma_norm = sigma_mu.norm().max(sigma_nu.norm());
        report.max_sigma_norm = report.max_sigma_norm.max(sigma_norm);
        let growth = norm(&bx) / (l * (1.0 + norm(&x) + mu.first_moment()));
        report.max_growth_ratio = report.max_growth_ratio.max(growth);
        if ratio > report.max_ratio || report.witness.is_none() {
            report.max_ratio = report.max_ratio.max(ratio);
            report.witness = Some(Witness {
                x,
                y,
                mu: mu.atoms().to_vec(),
                nu: nu.atoms().to_vec(),
                ratio,
            });
        }
    }
    report.passed = report.max_ratio <= 1.0 + RATIO_SLACK
        && report.max_sigma_norm <= l * (1.0 + RATIO_SLACK);
    if report.passed {
        Ok(report)
    } else {
        Err(Error::ModelValidation(Box::new(report)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Family, GradientPotential};
    use nalgebra::DMatrix;

    #[test]
    fn ou_with_exact_constant_passes() {
        let m = CoefficientModel::linear_1d(-1.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        let r = validate_model(&m, 500, 3, DEFAULT_PROBE_RADIUS).unwrap();
        assert!(r.passed);
        assert!(r.max_ratio <= 1.0 + 1e-12);
        assert!(r.max_ratio > 0.99);
    }

    #[test]
    fn too_small_constant_fails_with_witness() {
        let m = CoefficientModel::linear_1d(-1.0, 0.0, 0.0, 1.0, 0.5).unwrap();
        match validate_model(&m, 100, 3, DEFAULT_PROBE_RADIUS) {
            Err(Error::ModelValidation(r)) => {
                assert!(!r.passed);
                let w = r.witness.as_ref().unwrap();
                assert!(w.ratio > 1.0);
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    fn quartic() -> CoefficientModel {
        CoefficientModel::new(
            Family::GradientPotential(GradientPotential {
                potential: [0.0, 0.0, 0.0, 0.0, 0.25],
                kappa: 1.0,
                sigma0: DMatrix::identity(1, 1),
            }),
            5.0,
        )
        .unwrap()
    }

    #[test]
    fn quartic_potential_is_not_globally_lipschitz() {
        // Direct ratio at x = 10, y = 11 with a shared measure:
        // |(-1000 - 10) - (-1331 - 11)| / 1 = 332 > L.
        let m = quartic();
        let mu = EmpiricalMeasure::uniform(1, vec![0.0]);
        let bx = m.drift_eval(&[10.0], &mu).unwrap()[0];
        let by = m.drift_eval(&[11.0], &mu).unwrap()[0];
        assert!(((bx - by).abs() - 332.0).abs() < 1e-9);
        assert!((bx - by).abs() / m.declared_l() > 1.0);

        assert!(matches!(
            validate_model(&m, 200, 1, DEFAULT_PROBE_RADIUS),
            Err(Error::ModelValidation(_))
        ));
    }

    #[test]
    fn quartic_potential_is_locally_lipschitz_on_small_ball() {
        // |b'| <= 3 R² + 2κ on [-R, R]; R = 1 gives 5.
        let m = quartic();
        assert!(validate_model(&m, 400, 1, 1.0).is_ok());
    }

    #[test]
    fn growth_bound_holds_for_passing_models() {
        let m = CoefficientModel::linear_1d(-1.0, 1.0, 0.5, 1.0, 2.5).unwrap();
        let r = validate_model(&m, 400, 11, DEFAULT_PROBE_RADIUS).unwrap();
        assert!(r.max_growth_ratio <= 3.0);
    }

    #[test]
    fn needs_two_probes() {
        let m = CoefficientModel::linear_1d(-1.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(validate_model(&m, 1, 0, 1.0).is_err());
    }
}
