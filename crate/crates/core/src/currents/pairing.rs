use super::TestFunctionSpec;
use crate::error::{Error, Result};
use crate::model::MeasureStats;
use crate::simulator::PathEnsemble;

fn check(ens: &PathEnsemble, phi: &TestFunctionSpec) -> Result<()> {
    phi.validate(ens.dim())?;
    if ens.states().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("path ensemble holds non-finite states"));
    }
    Ok(())
}

/// Midpoint discretization of `(1/N) Σ_j ∫ φ(t, X_j) ∘ dX_j`.
pub fn current_pairing_stratonovich(ens: &PathEnsemble, phi: &TestFunctionSpec) -> Result<f64> {
    check(ens, phi)?;
    let (d, k, dt) = (ens.dim(), phi.k, ens.dt());
    let mut mid = vec![0.0; d];
    let mut total = 0.0;
    for j in 0..ens.particles() {
        for i in 0..ens.steps() {
            let (a, b) = (ens.state(j, i), ens.state(j, i + 1));
            for l in 0..d {
                mid[l] = 0.5 * (a[l] + b[l]);
            }
            let dx = b[k] - a[k];
            if dx != 0.0 {
                total += phi.profile((i as f64 + 0.5) * dt, &mid) * dx;
            }
        }
    }
    Ok(total / ens.particles() as f64)
}

/// Left-endpoint Itô sum plus the quadratic-variation correction
/// `(ε²/2N) Σ_j Σ_i Σ_l ∂_l φ_k (σσᵀ)_{lk} Δt`.
pub fn current_pairing_ito_corrected(ens: &PathEnsemble, phi: &TestFunctionSpec) -> Result<f64> {
    check(ens, phi)?;
    let (d, n, k, dt) = (ens.dim(), ens.particles(), phi.k, ens.dt());
    let eps = ens.epsilon();
    let needs_correction = eps != 0.0 && !phi.is_constant_in_space();
    let mut ito = 0.0;
    let mut correction = 0.0;
    for i in 0..ens.steps() {
        let t = i as f64 * dt;
        // column k of σσᵀ at the measure of step i
        let qv: Vec<f64> = if needs_correction {
            let stats = MeasureStats::from_points(d, &ens.positions_at(i));
            let s = ens.model().diffusion_at(&stats);
            let a = &s * s.transpose();
            (0..d).map(|l| a[(l, k)]).collect()
        } else {
            Vec::new()
        };
        for j in 0..n {
            let (x, y) = (ens.state(j, i), ens.state(j, i + 1));
            if needs_correction {
                let jet = phi.jet(t, x);
                ito += jet.value * (y[k] - x[k]);
                correction += jet.grad.iter().zip(&qv).map(|(g, a)| g * a).sum::<f64>();
            } else {
                ito += phi.profile(t, x) * (y[k] - x[k]);
            }
        }
    }
    Ok(ito / n as f64 + 0.5 * eps * eps * correction * dt / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::currents::{
        current_fourier_coefficients, ModeGrid, Phase, TimeWindow,
    };
    use crate::model::{CoefficientModel, InitialEnsemble};
    use crate::simulator::{simulate, SimConfig};

    fn unit_drift(t_end: f64, steps: usize) -> PathEnsemble {
        let model = CoefficientModel::linear_1d(0.0, 0.0, 1.0, 1.0, 2.0).unwrap();
        let init = InitialEnsemble::dirac(1, &[0.0]).unwrap();
        simulate(&model, &init, &SimConfig::new(1, t_end, steps, 0.0)).unwrap()
    }

    fn ou(eps: f64, steps: usize, seed: u64) -> PathEnsemble {
        let model = CoefficientModel::linear_1d(-1.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        let init = InitialEnsemble::normal_quantiles(64, 0.5, 1.0).unwrap();
        simulate(&model, &init, &SimConfig::new(64, 1.0, steps, eps).with_seed(seed)).unwrap()
    }

    #[test]
    fn constant_test_function_integrates_displacement() {
        let t_end = 1.5;
        let ens = unit_drift(t_end, 30);
        let one = TestFunctionSpec::polynomial(vec![(vec![0], 1.0)], 0, Some(TimeWindow::covering(t_end)));
        let v = current_pairing_stratonovich(&ens, &one).unwrap();
        assert!((v - t_end).abs() < 1e-12);
    }

    #[test]
    fn linear_test_function_gives_half_square() {
        let t_end = 1.5;
        let ens = unit_drift(t_end, 30);
        let x = TestFunctionSpec::polynomial(vec![(vec![1], 1.0)], 0, Some(TimeWindow::covering(t_end)));
        let v = current_pairing_stratonovich(&ens, &x).unwrap();
        assert!((v - t_end * t_end / 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_paths_pair_to_zero() {
        let model = CoefficientModel::linear_1d(0.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        let init = InitialEnsemble::normal_quantiles(5, 0.0, 1.0).unwrap();
        let ens = simulate(&model, &init, &SimConfig::new(5, 1.0, 10, 0.0)).unwrap();
        let phi = TestFunctionSpec::gaussian_bump(0.5, vec![0.0], 0.2, 0.5, 0, None);
        assert_eq!(current_pairing_stratonovich(&ens, &phi).unwrap(), 0.0);
        assert_eq!(current_pairing_ito_corrected(&ens, &phi).unwrap(), 0.0);
    }

    #[test]
    fn noiseless_ito_is_left_riemann_sum() {
        let ens = ou(0.0, 64, 1);
        let phi = TestFunctionSpec::gaussian_bump(0.5, vec![0.2], 0.2, 0.7, 0, None);
        let mut left = 0.0;
        for j in 0..ens.particles() {
            for i in 0..ens.steps() {
                let x = ens.state(j, i)[0];
                left += phi.profile(i as f64 * ens.dt(), &[x]) * (ens.state(j, i + 1)[0] - x);
            }
        }
        left /= ens.particles() as f64;
        let ito = current_pairing_ito_corrected(&ens, &phi).unwrap();
        assert!((ito - left).abs() < 1e-14);
        let strat = current_pairing_stratonovich(&ens, &phi).unwrap();
        assert!((ito - strat).abs() < 0.05);
    }

    #[test]
    fn space_constant_test_function_has_no_correction() {
        let ens = ou(0.8, 64, 3);
        let phi = TestFunctionSpec::polynomial(vec![(vec![0], 2.0)], 0, Some(TimeWindow::interior(1.0)));
        let mut left = 0.0;
        for j in 0..ens.particles() {
            for i in 0..ens.steps() {
                let x = ens.state(j, i)[0];
                left += phi.profile(i as f64 * ens.dt(), &[x]) * (ens.state(j, i + 1)[0] - x);
            }
        }
        left /= ens.particles() as f64;
        let ito = current_pairing_ito_corrected(&ens, &phi).unwrap();
        assert!((ito - left).abs() < 1e-13);
    }

    #[test]
    fn single_mode_pairing_matches_coefficients() {
        let ens = ou(0.5, 128, 7);
        let g = ModeGrid::default_for(1, 1.0);
        let c = current_fourier_coefficients(&ens, &g).unwrap();
        for (n, l) in [(0i64, 8usize), (3, 11), (-2, 5), (8, 16)] {
            let xi = g.xi(l);
            let coeff = c.get(0, n, l);
            let re = TestFunctionSpec::single_mode(n, xi.clone(), 0, Phase::Cos, g.a, g.b);
            let im = TestFunctionSpec::single_mode(n, xi, 0, Phase::Sin, g.a, g.b);
            let pr = current_pairing_stratonovich(&ens, &re).unwrap();
            let pi = current_pairing_stratonovich(&ens, &im).unwrap();
            assert!((pr - coeff.re).abs() < 1e-12, "n={n} l={l}");
            assert!((pi - coeff.im).abs() < 1e-12, "n={n} l={l}");
        }
    }
}
