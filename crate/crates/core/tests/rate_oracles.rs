use meanfield_core::model::{CoefficientModel, InitialEnsemble};
use meanfield_core::rate::{
    cost_i, cost_i0, optimize_rate, ControlledEnsemble, RateOptions, RateTarget,
};
use meanfield_core::rng::seeded_rng;
use meanfield_core::simulator::ControlSpec;
use rand::Rng;

/// Minimum of `½ Σ u_i² Δt` subject to `x_{i+1} = x_i + (a x_i + u_i) Δt`,
/// `x_0 = x0`, `x_M = target`.
fn min_energy_closed_form(a: f64, x0: f64, target: f64, t_end: f64, steps: usize) -> f64 {
    let dt = t_end / steps as f64;
    let phi = 1.0 + a * dt;
    let gain: f64 = (0..steps).map(|i| phi.powi((steps - 1 - i) as i32).powi(2)).sum();
    let gap = target - phi.powi(steps as i32) * x0;
    0.5 * gap * gap / (dt * gain)
}

/// The same minimum from a backward Riccati recursion with a stiff terminal
/// penalty, rolled forward to read off the control energy.
fn min_energy_riccati(a: f64, x0: f64, target: f64, t_end: f64, steps: usize) -> f64 {
    let dt = t_end / steps as f64;
    let phi = 1.0 + a * dt;
    let w = 1e10;
    let (mut p, mut q) = (w, -w * target);
    let mut gains = vec![(0.0, 0.0); steps];
    for i in (0..steps).rev() {
        // u = -(p phi x + q) / (1 + p dt)
        let denom = 1.0 + p * dt;
        gains[i] = (-p * phi / denom, -q / denom);
        let k = gains[i].0;
        let c = gains[i].1;
        // value of x' = (phi + k dt) x + c dt under the cost-to-go
        let f = phi + k * dt;
        let g = c * dt;
        let p_new = k * k * dt + p * f * f;
        let q_new = k * c * dt + p * f * g + q * f;
        p = p_new;
        q = q_new;
    }
    let mut x = x0;
    let mut energy = 0.0;
    for (k, c) in gains {
        let u = k * x + c;
        energy += 0.5 * u * u * dt;
        x = phi * x + u * dt;
    }
    assert!((x - target).abs() < 1e-6);
    energy
}

#[test]
fn lqr_oracles_agree_and_approach_continuum() {
    for (a, delta) in [(-1.0, 1.0), (-1.0, 2.0), (0.0, 2.0), (0.5, -1.0)] {
        let c = min_energy_closed_form(a, 0.0, delta, 1.0, 64);
        let r = min_energy_riccati(a, 0.0, delta, 1.0, 64);
        assert!((c - r).abs() <= 1e-6 * c, "{a} {delta}: {c} vs {r}");
    }
    // continuum value Δ² / (1 - e^{-2T}) for the unit-rate OU drift
    let fine = min_energy_closed_form(-1.0, 0.0, 1.0, 1.0, 1 << 14);
    let exact = 1.0 / (1.0 - (-2.0f64).exp());
    assert!((fine / exact - 1.0).abs() < 1e-3);
    // free motion: Δ² / 2T
    assert!((min_energy_closed_form(0.0, 0.0, 2.0, 1.0, 32) - 2.0).abs() < 1e-12);
}

#[test]
fn ou_rate_matches_lqr_recursion() {
    let model = CoefficientModel::linear_1d(-1.0, 0.0, 0.0, 1.0, 1.0).unwrap();
    let init = InitialEnsemble::dirac(1, &[0.0]).unwrap();
    let steps = 32;
    for delta in [1.0, 2.0] {
        let r = optimize_rate(&model, &init, 1.0, steps, &RateTarget::TerminalMean(vec![delta]), &RateOptions::default())
            .unwrap();
        let oracle = min_energy_riccati(-1.0, 0.0, delta, 1.0, steps);
        assert!(r.converged, "{r:?}");
        assert!((r.cost_i / oracle - 1.0).abs() <= 0.02, "{} vs {oracle}", r.cost_i);
    }
}

#[test]
fn free_motion_rate_scales_quadratically_and_decreases_in_horizon() {
    let model = CoefficientModel::linear_1d(0.0, 0.0, 0.0, 1.0, 1.0).unwrap();
    let init = InitialEnsemble::dirac(1, &[0.0]).unwrap();
    let opts = RateOptions::default();
    let run = |delta: f64, t_end: f64| {
        let r = optimize_rate(&model, &init, t_end, 32, &RateTarget::TerminalMean(vec![delta]), &opts).unwrap();
        assert!(r.converged);
        r.cost_i
    };
    let (one, two) = (run(1.0, 1.0), run(2.0, 1.0));
    assert!((two / one / 4.0 - 1.0).abs() <= 0.05, "{one} {two}");
    let long = run(1.0, 2.0);
    assert!(long <= one * 1.02, "{one} {long}");
}

#[test]
fn rate_vanishes_at_the_uncontrolled_limit() {
    let model = CoefficientModel::linear_1d(-1.0, 1.0, 0.3, 1.0, 2.0).unwrap();
    let init = InitialEnsemble::normal_quantiles(16, 0.5, 1.0).unwrap();
    let free = ControlledEnsemble::integrate(&model, &init, 1.0, 32, &ControlSpec::None).unwrap();
    let target = RateTarget::TerminalMean(free.terminal_mean());
    let r = optimize_rate(&model, &init, 1.0, 32, &target, &RateOptions::default()).unwrap();
    assert!(r.cost_i <= 1e-6, "{r:?}");
}

#[test]
fn velocity_form_equals_control_form_for_distinct_paths() {
    let mut rng = seeded_rng(2024, 11);
    for trial in 0..100 {
        let d = 1 + trial % 2;
        let k = 3 + trial % 5;
        let steps = 8 + trial % 9;
        let model = CoefficientModel::linear_isotropic(d, rng.random_range(-1.0..0.0), 0.5, 1.0, 3.0).unwrap();
        let points: Vec<f64> = (0..k * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let init = InitialEnsemble::from_points(d, points, "random").unwrap();
        let values: Vec<f64> = (0..k * steps * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ctrl = ControlSpec::open_loop(k, steps, d, values).unwrap();
        let ce = ControlledEnsemble::integrate(&model, &init, 1.0, steps, &ctrl).unwrap();
        assert!(ce.dynamics_residual() <= 1e-8);
        let (a, b) = (cost_i(&ce), cost_i0(&ce).unwrap());
        assert!((a - b).abs() <= 1e-10 * (1.0 + a), "trial {trial}: {a} vs {b}");
    }
}
