//! Euler–Maruyama integration of the N-particle system
//!
//! `dX_j = b(X_j, V) dt + ε σ(X_j, V) dW_j + σ(X_j, V) u_j dt`,
//!
//! with `V` the empirical measure of all particles at the start of each step.

mod control;

pub use control::{AffineFeedback, AffineSchedule, ControlSpec, FeedbackMode};
pub(crate) use control::pseudo_inverse;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{CoefficientModel, EmpiricalMeasure, InitialEnsemble, MeasureStats};
use crate::rng::NoiseKey;

/// Abort threshold on `|X|`.
pub const DIVERGENCE_BOUND: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsRule {
    Explicit,
    /// `ε_N = N^{-α}`.
    PowerLaw(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub t_end: f64,
    pub steps: usize,
    /// Noise level under [`EpsRule::Explicit`]; ignored under a power law.
    pub epsilon: f64,
    pub eps_rule: EpsRule,
    pub master_seed: u64,
    pub replica_index: u64,
}

impl SimConfig {
    pub fn new(n: usize, t_end: f64, steps: usize, epsilon: f64) -> Self {
        SimConfig {
            n,
            t_end,
            steps,
            epsilon,
            eps_rule: EpsRule::Explicit,
            master_seed: 0,
            replica_index: 0,
        }
    }

    pub fn with_seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn with_replica(mut self, replica_index: u64) -> Self {
        self.replica_index = replica_index;
        self
    }

    pub fn with_power_law(mut self, alpha: f64) -> Self {
        self.eps_rule = EpsRule::PowerLaw(alpha);
        self
    }

    /// The effective `ε_N`.
    pub fn noise_level(&self) -> f64 {
        match self.eps_rule {
            EpsRule::Explicit => self.epsilon,
            EpsRule::PowerLaw(alpha) => (self.n as f64).powf(-alpha),
        }
    }

    /// Large-deviation speed `a_N = N / ε_N²` (infinite for `ε = 0`).
    pub fn speed(&self) -> f64 {
        let eps = self.noise_level();
        self.n as f64 / (eps * eps)
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("particle count N must be >= 1"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps must be >= 1"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid("horizon T must be positive and finite"));
        }
        if let EpsRule::PowerLaw(alpha) = self.eps_rule {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(Error::invalid("power-law exponent must be positive"));
            }
        }
        let eps = self.noise_level();
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::invalid(format!("noise level must lie in [0, 1], got {eps}")));
        }
        Ok(())
    }

    pub fn noise_key(&self) -> NoiseKey {
        NoiseKey::new(self.master_seed, self.replica_index)
    }
}

/// Particle trajectories together with the noise and controls that drove
/// them. Arrays are row-major: states `(j, i, coordinate)` with `M + 1` time
/// points, increments and controls `(j, i, component)` with `M` steps.
#[derive(Clone, Debug, PartialEq)]
pub struct PathEnsemble {
    pub(crate) d: usize,
    pub(crate) m: usize,
    pub(crate) n: usize,
    pub(crate) steps: usize,
    pub(crate) t_end: f64,
    pub(crate) epsilon: f64,
    pub(crate) states: Vec<f64>,
    pub(crate) noise: Vec<f64>,
    pub(crate) controls: Vec<f64>,
    pub(crate) config: SimConfig,
    pub(crate) model: CoefficientModel,
}

impl PathEnsemble {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn noise_dim(&self) -> usize {
        self.m
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_end * i as f64 / self.steps as f64
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn model(&self) -> &CoefficientModel {
        &self.model
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn noise_increments(&self) -> &[f64] {
        &self.noise
    }

    pub fn controls(&self) -> &[f64] {
        &self.controls
    }

    pub fn state(&self, j: usize, i: usize) -> &[f64] {
        let o = (j * (self.steps + 1) + i) * self.d;
        &self.states[o..o + self.d]
    }

    pub fn control(&self, j: usize, i: usize) -> &[f64] {
        let o = (j * self.steps + i) * self.m;
        &self.controls[o..o + self.m]
    }

    /// Positions of all particles at step `i`, flat `(j, coordinate)`.
    pub fn positions_at(&self, i: usize) -> Vec<f64> {
        (0..self.n).flat_map(|j| self.state(j, i).iter().copied()).collect()
    }

    /// Empirical measure of the particle positions at step `i`.
    pub fn time_marginal(&self, i: usize) -> Result<EmpiricalMeasure> {
        if i > self.steps {
            return Err(Error::invalid(format!(
                "time index {i} out of range 0..={}",
                self.steps
            )));
        }
        Ok(EmpiricalMeasure::uniform(self.d, self.positions_at(i)))
    }

    /// `(1/N) Σ_j Σ_i |u_j(t_i)|² Δt`.
    pub fn control_energy(&self) -> f64 {
        let dt = self.dt();
        self.controls.iter().map(|u| u * u).sum::<f64>() * dt / self.n as f64
    }

    /// Assemble an ensemble from raw arrays (e.g. a loaded dump).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        model: CoefficientModel,
        config: SimConfig,
        epsilon: f64,
        states: Vec<f64>,
        noise: Vec<f64>,
        controls: Vec<f64>,
    ) -> Result<Self> {
        let (d, m, n, steps) = (model.dim(), model.noise_dim(), config.n, config.steps);
        Error::check_dim("path states", n * (steps + 1) * d, states.len())?;
        Error::check_dim("path noise increments", n * steps * m, noise.len())?;
        Error::check_dim("path controls", n * steps * m, controls.len())?;
        Ok(PathEnsemble {
            d,
            m,
            n,
            steps,
            t_end: config.t_end,
            epsilon,
            states,
            noise,
            controls,
            config,
            model,
        })
    }
}

/// Uncontrolled Euler–Maruyama run.
pub fn simulate(
    model: &CoefficientModel,
    init: &InitialEnsemble,
    cfg: &SimConfig,
) -> Result<PathEnsemble> {
    simulate_controlled(model, init, cfg, &ControlSpec::None)
}

/// Euler–Maruyama run with the control term `σ u_j Δt` added to every step.
pub fn simulate_controlled(
    model: &CoefficientModel,
    init: &InitialEnsemble,
    cfg: &SimConfig,
    ctrl: &ControlSpec,
) -> Result<PathEnsemble> {
    cfg.validate()?;
    let (d, m, n, steps) = (model.dim(), model.noise_dim(), cfg.n, cfg.steps);
    Error::check_dim("initial ensemble dimension", d, init.dim())?;
    Error::check_dim("initial ensemble size", n, init.len())?;
    check_control(ctrl, n, steps, d, m)?;

    let eps = cfg.noise_level();
    let dt = cfg.dt();
    let sqrt_dt = dt.sqrt();
    let key = cfg.noise_key();
    let mut streams: Vec<_> = (0..n).map(|j| key.particle_stream(j)).collect();

    let mut states = vec![0.0; n * (steps + 1) * d];
    let mut noise = vec![0.0; n * steps * m];
    let mut controls = vec![0.0; n * steps * m];
    let mut current = init.points().to_vec();
    for j in 0..n {
        let o = j * (steps + 1) * d;
        states[o..o + d].copy_from_slice(init.point(j));
    }

    let mut drift = vec![0.0; d];
    let mut velocity = vec![0.0; d];
    let mut z = vec![0.0; m];
    let mut u = vec![0.0; m];
    for i in 0..steps {
        let stats = MeasureStats::from_points(d, &current);
        let sigma = model.diffusion_at(&stats);
        let sigma_pinv = match ctrl {
            ControlSpec::FeedbackAffine(AffineFeedback {
                mode: FeedbackMode::Velocity,
                ..
            }) => Some(pseudo_inverse(&sigma)?),
            _ => None,
        };
        for j in 0..n {
            let x = &current[j * d..(j + 1) * d];
            model.drift_into(x, &stats, &mut drift);
            if eps != 0.0 {
                streams[j].standard_normals(i, &mut z);
                z.iter_mut().for_each(|v| *v *= sqrt_dt);
            }
            fill_control(ctrl, j, i, steps, x, &drift, sigma_pinv.as_ref(), &mut velocity, &mut u);

            let o = (j * steps + i) * m;
            noise[o..o + m].copy_from_slice(&z);
            controls[o..o + m].copy_from_slice(&u);

            let so = (j * (steps + 1) + i + 1) * d;
            let mut sq = 0.0;
            for r in 0..d {
                let mut diffusion = 0.0;
                let mut push = 0.0;
                for c in 0..m {
                    diffusion += sigma[(r, c)] * z[c];
                    push += sigma[(r, c)] * u[c];
                }
                let next = x[r] + drift[r] * dt + eps * diffusion + push * dt;
                states[so + r] = next;
                sq += next * next;
            }
            let magnitude = sq.sqrt();
            if !(magnitude <= DIVERGENCE_BOUND) {
                return Err(Error::Diverged {
                    step: i + 1,
                    particle: j,
                    magnitude,
                });
            }
        }
        for j in 0..n {
            let so = (j * (steps + 1) + i + 1) * d;
            current[j * d..(j + 1) * d].copy_from_slice(&states[so..so + d]);
        }
    }

    Ok(PathEnsemble {
        d,
        m,
        n,
        steps,
        t_end: cfg.t_end,
        epsilon: eps,
        states,
        noise,
        controls,
        config: *cfg,
        model: model.clone(),
    })
}

fn check_control(ctrl: &ControlSpec, n: usize, steps: usize, d: usize, m: usize) -> Result<()> {
    match ctrl {
        ControlSpec::None => Ok(()),
        ControlSpec::OpenLoop {
            n: cn,
            steps: cs,
            m: cm,
            values,
        } => {
            Error::check_dim("control particle count", n, *cn)?;
            Error::check_dim("control steps", steps, *cs)?;
            Error::check_dim("control dimension", m, *cm)?;
            Error::check_dim("control values", n * steps * m, values.len())
        }
        ControlSpec::FeedbackAffine(f) => {
            let rows = match f.mode {
                FeedbackMode::Velocity => d,
                FeedbackMode::Control => m,
            };
            Error::check_dim("feedback field rows", rows, f.schedule.rows())?;
            Error::check_dim("feedback field columns", d, f.schedule.cols())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn fill_control(
    ctrl: &ControlSpec,
    j: usize,
    i: usize,
    steps: usize,
    x: &[f64],
    drift: &[f64],
    sigma_pinv: Option<&DMatrix<f64>>,
    velocity: &mut [f64],
    u: &mut [f64],
) {
    match ctrl {
        ControlSpec::None => u.fill(0.0),
        ControlSpec::OpenLoop { values, m, .. } => {
            let o = (j * steps + i) * m;
            u.copy_from_slice(&values[o..o + m]);
        }
        ControlSpec::FeedbackAffine(f) => {
            let bin = f.schedule.bin_for_step(i, steps);
            match f.mode {
                FeedbackMode::Control => f.schedule.eval_bin(bin, x, u),
                FeedbackMode::Velocity => {
                    f.schedule.eval_bin(bin, x, velocity);
                    let pinv = sigma_pinv.expect("pseudo-inverse computed for velocity feedback");
                    for (c, uc) in u.iter_mut().enumerate() {
                        *uc = (0..velocity.len())
                            .map(|r| pinv[(c, r)] * (velocity[r] - drift[r]))
                            .sum();
                    }
                }
            }
        }
    }
}

/// Second-moment diagnostics against the a-priori bound
/// `(1/N) Σ_j sup_t |X_j(t)|² <= c (1 + (1/N) Σ_j |x_j|² + energy)` with
/// `c = 24 (L² T + 1) exp(24 L² T²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentReport {
    pub sup_second_moment: f64,
    pub control_energy: f64,
    pub initial_second_moment: f64,
    pub constant: f64,
    pub bound: f64,
    pub violated: bool,
}

pub fn moment_diagnostics(ens: &PathEnsemble) -> Result<MomentReport> {
    if ens.states.iter().chain(&ens.controls).any(|v| !v.is_finite()) {
        return Err(Error::invalid("path ensemble contains non-finite values"));
    }
    let n = ens.n as f64;
    let mut sup_sum = 0.0;
    let mut init_sum = 0.0;
    for j in 0..ens.n {
        let mut sup = 0.0f64;
        for i in 0..=ens.steps {
            let sq: f64 = ens.state(j, i).iter().map(|x| x * x).sum();
            if i == 0 {
                init_sum += sq;
            }
            sup = sup.max(sq);
        }
        sup_sum += sup;
    }
    let l = ens.model.declared_l();
    let t = ens.t_end;
    let constant = 24.0 * (l * l * t + 1.0) * (24.0 * l * l * t * t).exp();
    let energy = ens.control_energy();
    let initial = init_sum / n;
    let bound = constant * (1.0 + initial + energy);
    let sup_second_moment = sup_sum / n;
    Ok(MomentReport {
        sup_second_moment,
        control_energy: energy,
        initial_second_moment: initial,
        constant,
        bound,
        violated: sup_second_moment > bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou(a: f64, b: f64, c: f64) -> CoefficientModel {
        CoefficientModel::linear_1d(a, b, c, 1.0, 2.0).unwrap()
    }

    #[test]
    fn constant_drift_is_exact() {
        let init = InitialEnsemble::from_points(1, vec![0.0, 0.5, -2.0], "t").unwrap();
        for steps in [1, 3, 64] {
            let cfg = SimConfig::new(3, 1.0, steps, 0.0);
            let ens = simulate(&ou(0.0, 0.0, 1.0), &init, &cfg).unwrap();
            for j in 0..3 {
                let expected = init.point(j)[0] + 1.0;
                assert!((ens.state(j, steps)[0] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn euler_converges_at_first_order_on_exponential_decay() {
        let init = InitialEnsemble::dirac(1, &[1.0]).unwrap();
        let mut errors = Vec::new();
        for k in 6..10 {
            let steps = 1usize << k;
            let ens = simulate(&ou(-1.0, 0.0, 0.0), &init, &SimConfig::new(1, 1.0, steps, 0.0)).unwrap();
            errors.push((ens.state(0, steps)[0] - (-1f64).exp()).abs());
        }
        for w in errors.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 1.0).abs() < 0.05, "slope {slope}");
        }
    }

    #[test]
    fn mean_is_conserved_when_interaction_balances() {
        let init = InitialEnsemble::normal_quantiles(32, 0.7, 1.3).unwrap();
        let m0 = init.measure().mean()[0];
        let ens = simulate(&ou(-1.0, 1.0, 0.0), &init, &SimConfig::new(32, 1.0, 100, 0.0)).unwrap();
        let m1 = ens.time_marginal(100).unwrap().mean()[0];
        assert!((m1 - m0).abs() < 1e-12);
    }

    #[test]
    fn constant_control_moves_paths_at_constant_velocity() {
        let model = ou(0.0, 0.0, 0.0);
        let init = InitialEnsemble::from_points(1, vec![0.0, 1.0], "t").unwrap();
        let cfg = SimConfig::new(2, 2.0, 10, 0.0);
        let ens = simulate_controlled(&model, &init, &cfg, &ControlSpec::constant(2, 10, &[0.75])).unwrap();
        assert!((ens.state(0, 10)[0] - 1.5).abs() < 1e-12);
        assert!((ens.state(1, 10)[0] - 2.5).abs() < 1e-12);

        // doubling the control doubles the displacement
        let ens2 = simulate_controlled(&model, &init, &cfg, &ControlSpec::constant(2, 10, &[1.5])).unwrap();
        assert!((ens2.state(0, 10)[0] - 2.0 * ens.state(0, 10)[0]).abs() < 1e-12);
    }

    #[test]
    fn no_control_matches_uncontrolled_run_bit_exactly() {
        let model = ou(-1.0, 0.5, 0.1);
        let init = InitialEnsemble::normal_quantiles(16, 0.0, 1.0).unwrap();
        let cfg = SimConfig::new(16, 1.0, 50, 0.3).with_seed(9);
        let a = simulate(&model, &init, &cfg).unwrap();
        let b = simulate_controlled(&model, &init, &cfg, &ControlSpec::None).unwrap();
        assert_eq!(a, b);
        let zero = ControlSpec::constant(16, 50, &[0.0]);
        let c = simulate_controlled(&model, &init, &cfg, &zero).unwrap();
        assert_eq!(a.states, c.states);
    }

    #[test]
    fn velocity_feedback_shifts_terminal_mean() {
        let model = ou(0.0, 0.0, 0.0);
        let init = InitialEnsemble::normal_quantiles(8, 0.0, 1.0).unwrap();
        let cfg = SimConfig::new(8, 2.0, 40, 0.0);
        let delta = 3.0;
        let field = AffineSchedule::constant(2.0, &[delta / 2.0], 1);
        let ctrl = ControlSpec::FeedbackAffine(AffineFeedback {
            schedule: field,
            mode: FeedbackMode::Velocity,
        });
        let ens = simulate_controlled(&model, &init, &cfg, &ctrl).unwrap();
        let shift = ens.time_marginal(40).unwrap().mean()[0] - init.measure().mean()[0];
        assert!((shift - delta).abs() < 1e-12);
    }

    #[test]
    fn time_marginals() {
        let model = ou(0.0, 0.0, 0.5);
        let init = InitialEnsemble::from_points(1, vec![1.0, -1.0, 4.0], "t").unwrap();
        let ens = simulate(&model, &init, &SimConfig::new(3, 2.0, 8, 0.0)).unwrap();
        assert_eq!(ens.time_marginal(0).unwrap(), init.measure());
        let last = ens.time_marginal(8).unwrap();
        let shifted = init.measure().translated(&[1.0]);
        for (a, b) in last.atoms().iter().zip(shifted.atoms()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(ens.time_marginal(9).is_err());

        let single = InitialEnsemble::dirac(1, &[2.5]).unwrap();
        let ens = simulate(&model, &single, &SimConfig::new(1, 1.0, 4, 0.0)).unwrap();
        assert_eq!(ens.time_marginal(2).unwrap().atoms(), &[2.75]);
    }

    #[test]
    fn divergence_is_reported() {
        let model = CoefficientModel::linear_1d(200.0, 0.0, 0.0, 1.0, 200.0).unwrap();
        let init = InitialEnsemble::dirac(2, &[1.0]).unwrap();
        let err = simulate(&model, &init, &SimConfig::new(2, 1.0, 10, 0.0)).unwrap_err();
        assert!(matches!(err, Error::Diverged { particle: 0, .. }));
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(SimConfig::new(4, 1.0, 0, 0.1).validate().is_err());
        assert!(SimConfig::new(4, 1.0, 10, 1.5).validate().is_err());
        assert!(SimConfig::new(0, 1.0, 10, 0.1).validate().is_err());
        let cfg = SimConfig::new(16, 1.0, 10, 0.0).with_power_law(0.25);
        assert!((cfg.noise_level() - 0.5).abs() < 1e-15);
        assert!((cfg.speed() - 64.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_control_grid_is_fatal() {
        let model = ou(0.0, 0.0, 0.0);
        let init = InitialEnsemble::dirac(2, &[0.0]).unwrap();
        let cfg = SimConfig::new(2, 1.0, 10, 0.0);
        let ctrl = ControlSpec::constant(2, 9, &[1.0]);
        assert!(simulate_controlled(&model, &init, &cfg, &ctrl).is_err());
    }

    #[test]
    fn moment_diagnostics_static_paths() {
        let model = ou(0.0, 0.0, 0.0);
        let init = InitialEnsemble::from_points(1, vec![1.0, 3.0], "t").unwrap();
        let ens = simulate(&model, &init, &SimConfig::new(2, 1.0, 5, 0.0)).unwrap();
        let r = moment_diagnostics(&ens).unwrap();
        assert_eq!(r.sup_second_moment, 5.0);
        assert_eq!(r.initial_second_moment, 5.0);
        assert!(!r.violated);
    }

    #[test]
    fn moment_diagnostics_rejects_nan() {
        let model = ou(-1.0, 0.0, 0.0);
        let init = InitialEnsemble::dirac(2, &[1.0]).unwrap();
        let mut ens = simulate(&model, &init, &SimConfig::new(2, 1.0, 5, 0.1)).unwrap();
        ens.states[3] = f64::NAN;
        assert!(moment_diagnostics(&ens).is_err());
    }
}
