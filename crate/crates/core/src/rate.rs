//! Quadratic control costs of particle-represented controlled limits and a
//! penalty optimizer that evaluates rate functions at target events.

use nalgebra::DVector;

use crate::currents::TestFunctionSpec;
use crate::error::{Error, Result};
use crate::model::{CoefficientModel, InitialEnsemble, MeasureStats};
use crate::par;
use crate::simulator::{
    simulate_controlled, AffineFeedback, AffineSchedule, ControlSpec, FeedbackMode, PathEnsemble,
    SimConfig,
};

/// Particles are treated as coincident when all coordinates agree to this.
pub const COINCIDENCE_TOLERANCE: f64 = 1e-12;
/// Largest condition number of `σ(V)` accepted by [`cost_i0`].
pub const MAX_CONDITION: f64 = 1e12;

/// `K` noiseless characteristics with the Dirac controls `v_j(t_i)` that
/// drive them through `ξ' = b(ξ, V) + σ(V) v`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlledEnsemble {
    paths: PathEnsemble,
}

impl ControlledEnsemble {
    /// Wrap a noiseless run; its recorded controls become the Dirac controls.
    pub fn from_path_ensemble(paths: PathEnsemble) -> Result<Self> {
        if paths.epsilon() != 0.0 {
            return Err(Error::invalid(
                "controlled ensembles are built from noiseless (epsilon = 0) runs",
            ));
        }
        if paths.controls().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("controls must be finite"));
        }
        Ok(ControlledEnsemble { paths })
    }

    /// Integrate the controlled dynamics with the forward Euler rule.
    pub fn integrate(
        model: &CoefficientModel,
        init: &InitialEnsemble,
        t_end: f64,
        steps: usize,
        ctrl: &ControlSpec,
    ) -> Result<Self> {
        let cfg = SimConfig::new(init.len(), t_end, steps, 0.0);
        Self::from_path_ensemble(simulate_controlled(model, init, &cfg, ctrl)?)
    }

    pub fn paths(&self) -> &PathEnsemble {
        &self.paths
    }

    pub fn particles(&self) -> usize {
        self.paths.particles()
    }

    pub fn model(&self) -> &CoefficientModel {
        self.paths.model()
    }

    pub fn terminal_mean(&self) -> Vec<f64> {
        let ens = &self.paths;
        MeasureStats::from_points(ens.dim(), &ens.positions_at(ens.steps())).mean
    }

    /// Largest per-step defect of `ξ_{i+1} - ξ_i - (b + σ v) Δt`.
    pub fn dynamics_residual(&self) -> f64 {
        let ens = &self.paths;
        let (d, m, dt) = (ens.dim(), ens.noise_dim(), ens.dt());
        let model = ens.model();
        let mut drift = vec![0.0; d];
        let mut worst = 0.0f64;
        for i in 0..ens.steps() {
            let stats = MeasureStats::from_points(d, &ens.positions_at(i));
            let sigma = model.diffusion_at(&stats);
            for j in 0..ens.particles() {
                let (x, y, v) = (ens.state(j, i), ens.state(j, i + 1), ens.control(j, i));
                model.drift_into(x, &stats, &mut drift);
                for r in 0..d {
                    let push: f64 = (0..m).map(|c| sigma[(r, c)] * v[c]).sum();
                    worst = worst.max((y[r] - x[r] - (drift[r] + push) * dt).abs());
                }
            }
        }
        worst
    }
}

/// `(1/K) Σ_j ½ Σ_i |v_j(t_i)|² Δt`.
pub fn cost_i(ce: &ControlledEnsemble) -> f64 {
    0.5 * ce.paths.control_energy()
}

/// Velocity-field form: `h` is the average of `σ v + b` over coincident
/// particles and the cost is `½ ∫ ⟨V, |σ⁻¹ (h - b)|²⟩ dt` (same left rule
/// as [`cost_i`]).
pub fn cost_i0(ce: &ControlledEnsemble) -> Result<f64> {
    let ens = &ce.paths;
    let (d, m, k, dt) = (ens.dim(), ens.noise_dim(), ens.particles(), ens.dt());
    if d != m {
        return Err(Error::RateEvaluation(format!(
            "velocity-field cost needs a square diffusion, got {d} x {m}"
        )));
    }
    let model = ens.model();
    let mut drift = vec![0.0; k * d];
    let mut vel = vec![0.0; k * d];
    let mut total = 0.0;
    for i in 0..ens.steps() {
        let pos = ens.positions_at(i);
        let stats = MeasureStats::from_points(d, &pos);
        let sigma = model.diffusion_at(&stats);
        let sv = sigma.clone().svd(false, false).singular_values;
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > 0.0 && smax / smin <= MAX_CONDITION) {
            return Err(Error::RateEvaluation(format!(
                "diffusion matrix singular at step {i} (condition number {:e})",
                smax / smin
            )));
        }
        let inv = sigma
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::RateEvaluation(format!("diffusion not invertible at step {i}")))?;
        for j in 0..k {
            let x = &pos[j * d..(j + 1) * d];
            model.drift_into(x, &stats, &mut drift[j * d..(j + 1) * d]);
            let v = DVector::from_column_slice(ens.control(j, i));
            let y = &sigma * v;
            for r in 0..d {
                vel[j * d + r] = y[r] + drift[j * d + r];
            }
        }
        let groups = coincidence_groups(&pos, d);
        let mut h = vec![0.0; d];
        for group in &groups {
            h.iter_mut().for_each(|v| *v = 0.0);
            for &j in group {
                for r in 0..d {
                    h[r] += vel[j * d + r];
                }
            }
            h.iter_mut().for_each(|v| *v /= group.len() as f64);
            for &j in group {
                let diff = DVector::from_iterator(d, (0..d).map(|r| h[r] - drift[j * d + r]));
                total += 0.5 * (&inv * diff).norm_squared() * dt;
            }
        }
    }
    Ok(total / k as f64)
}

/// Indices grouped by coincident position.
fn coincidence_groups(pos: &[f64], d: usize) -> Vec<Vec<usize>> {
    let k = pos.len() / d;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|a, b| pos[a * d].total_cmp(&pos[b * d]));
    let mut assigned = vec![false; k];
    let mut groups = Vec::new();
    for (idx, &a) in order.iter().enumerate() {
        if assigned[a] {
            continue;
        }
        assigned[a] = true;
        let mut group = vec![a];
        for &b in &order[idx + 1..] {
            if pos[b * d] - pos[a * d] > COINCIDENCE_TOLERANCE {
                break;
            }
            let same = (0..d).all(|r| (pos[a * d + r] - pos[b * d + r]).abs() <= COINCIDENCE_TOLERANCE);
            if !assigned[b] && same {
                assigned[b] = true;
                group.push(b);
            }
        }
        groups.push(group);
    }
    groups
}

/// `(1/K) Σ_j Σ_i φ(t_i, ξ_j) · (b + σ v_j) Δt`.
pub fn pair_g_phi(ce: &ControlledEnsemble, phi: &TestFunctionSpec) -> Result<f64> {
    let ens = &ce.paths;
    let (d, m, dt) = (ens.dim(), ens.noise_dim(), ens.dt());
    phi.validate(d)?;
    let model = ens.model();
    let k = phi.k;
    let mut drift = vec![0.0; d];
    let mut total = 0.0;
    for i in 0..ens.steps() {
        let t = ens.time(i);
        let stats = MeasureStats::from_points(d, &ens.positions_at(i));
        let sigma = model.diffusion_at(&stats);
        for j in 0..ens.particles() {
            let x = ens.state(j, i);
            let p = phi.profile(t, x);
            if p == 0.0 {
                continue;
            }
            model.drift_into(x, &stats, &mut drift);
            let v = ens.control(j, i);
            let push: f64 = (0..m).map(|c| sigma[(k, c)] * v[c]).sum();
            total += p * (drift[k] + push) * dt;
        }
    }
    Ok(total / ens.particles() as f64)
}

/// Constraint on the controlled limit.
#[derive(Clone, Debug, PartialEq)]
pub enum RateTarget {
    /// Terminal mean of the controlled flow equals the given vector.
    TerminalMean(Vec<f64>),
    /// `⟨J, φ₀⟩` along the controlled flow equals `value`.
    TerminalPairing { phi: TestFunctionSpec, value: f64 },
}

impl RateTarget {
    pub fn label(&self) -> String {
        match self {
            RateTarget::TerminalMean(m) => {
                let parts: Vec<String> = m.iter().map(|v| format!("{v}")).collect();
                format!("terminal_mean={}", parts.join(";"))
            }
            RateTarget::TerminalPairing { value, .. } => format!("terminal_pairing={value}"),
        }
    }

    fn residual(&self, ce: &ControlledEnsemble) -> Result<Vec<f64>> {
        match self {
            RateTarget::TerminalMean(target) => Ok(ce
                .terminal_mean()
                .iter()
                .zip(target)
                .map(|(a, b)| a - b)
                .collect()),
            RateTarget::TerminalPairing { phi, value } => Ok(vec![pair_g_phi(ce, phi)? - value]),
        }
    }
}

/// Optimizer settings; the defaults are the documented ones.
#[derive(Clone, Debug, PartialEq)]
pub struct RateOptions {
    pub bins: usize,
    pub lambda0: f64,
    pub lambda_factor: f64,
    pub restarts: usize,
    pub fd_step: f64,
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub residual_tolerance: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        RateOptions {
            bins: 16,
            lambda0: 10.0,
            lambda_factor: 10.0,
            restarts: 3,
            fd_step: 1e-5,
            learning_rate: 0.05,
            max_iterations: 500,
            tolerance: 1e-8,
            residual_tolerance: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateResult {
    pub target: String,
    pub cost_i: f64,
    pub cost_i0: Option<f64>,
    /// Control `v = α(t) + β(t) x`.
    pub control: AffineSchedule,
    pub constraint_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl RateResult {
    pub const CSV_HEADER: &'static str = "target,costI,costI0,residual,iterations,converged";

    pub fn csv_row(&self) -> String {
        let i0 = self.cost_i0.map(|v| format!("{v:e}")).unwrap_or_default();
        format!(
            "{},{:e},{},{:e},{},{}",
            self.target, self.cost_i, i0, self.constraint_residual, self.iterations, self.converged
        )
    }

    /// The optimized control as a feedback spec for particle simulations.
    pub fn control_spec(&self) -> ControlSpec {
        ControlSpec::FeedbackAffine(AffineFeedback {
            schedule: self.control.clone(),
            mode: FeedbackMode::Control,
        })
    }
}

struct Problem<'a> {
    model: &'a CoefficientModel,
    init: &'a InitialEnsemble,
    t_end: f64,
    steps: usize,
    target: &'a RateTarget,
    template: AffineSchedule,
}

impl Problem<'_> {
    fn ensemble(&self, params: &[f64]) -> Result<ControlledEnsemble> {
        let mut sched = self.template.clone();
        sched.set_parameters(params);
        let ctrl = ControlSpec::FeedbackAffine(AffineFeedback {
            schedule: sched,
            mode: FeedbackMode::Control,
        });
        ControlledEnsemble::integrate(self.model, self.init, self.t_end, self.steps, &ctrl)
    }

    /// Cost, constraint residual vector.
    fn evaluate(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        let ce = self.ensemble(params)?;
        Ok((cost_i(&ce), self.target.residual(&ce)?))
    }
}

fn augmented(cost: f64, r: &[f64], mult: &[f64], lambda: f64) -> f64 {
    let lin: f64 = r.iter().zip(mult).map(|(a, b)| a * b).sum();
    let sq: f64 = r.iter().map(|v| v * v).sum();
    cost + lin + 0.5 * lambda * sq
}

/// Minimize `cost_i` over affine feedback controls subject to `target`,
/// using an augmented-Lagrangian penalty with a growing weight.
pub fn optimize_rate(
    model: &CoefficientModel,
    init: &InitialEnsemble,
    t_end: f64,
    steps: usize,
    target: &RateTarget,
    opts: &RateOptions,
) -> Result<RateResult> {
    let d = model.dim();
    if let RateTarget::TerminalMean(m) = target {
        Error::check_dim("target mean", d, m.len())?;
    }
    if opts.bins == 0 || opts.restarts == 0 || steps == 0 {
        return Err(Error::invalid("optimizer needs bins, restarts and steps >= 1"));
    }
    let problem = Problem {
        model,
        init,
        t_end,
        steps,
        target,
        template: AffineSchedule::zeros(opts.bins, t_end, model.noise_dim(), d),
    };
    let np = problem.template.parameter_count();
    let mut params = vec![0.0; np];
    let (_, r0) = problem.evaluate(&params)?;
    let mut mult = vec![0.0; r0.len()];
    let mut lambda = opts.lambda0;
    let mut iterations = 0;

    for _ in 0..opts.restarts {
        let objective = |p: &[f64]| -> Result<f64> {
            let (c, r) = problem.evaluate(p)?;
            Ok(augmented(c, &r, &mult, lambda))
        };
        let mut f = objective(&params)?;
        let mut m1 = vec![0.0; np];
        let mut m2 = vec![0.0; np];
        let mut age = 0;
        let mut lr = opts.learning_rate;
        let (b1, b2) = (0.9f64, 0.999f64);
        for _ in 0..opts.max_iterations {
            iterations += 1;
            let probes = par::map_indexed(np, |q| {
                let mut p = params.clone();
                p[q] += opts.fd_step;
                objective(&p)
            });
            let mut grad = Vec::with_capacity(np);
            for v in probes {
                grad.push((v? - f) / opts.fd_step);
            }
            age += 1;
            for q in 0..np {
                m1[q] = b1 * m1[q] + (1.0 - b1) * grad[q];
                m2[q] = b2 * m2[q] + (1.0 - b2) * grad[q] * grad[q];
            }
            let c1 = 1.0 - b1.powi(age);
            let c2 = 1.0 - b2.powi(age);
            let mut dir: Vec<f64> = (0..np)
                .map(|q| (m1[q] / c1) / ((m2[q] / c2).sqrt() + 1e-12))
                .collect();
            // momentum can point uphill; restart the moments from this gradient
            let slope: f64 = dir.iter().zip(&grad).map(|(a, b)| a * b).sum();
            if slope <= 0.0 {
                for q in 0..np {
                    m1[q] = (1.0 - b1) * grad[q];
                    m2[q] = (1.0 - b2) * grad[q] * grad[q];
                }
                age = 1;
                dir = grad.iter().map(|g| g / (g.abs() + 1e-12)).collect();
            }
            let mut accepted = None;
            let mut step = lr;
            while step > 1e-12 {
                let trial: Vec<f64> = params.iter().zip(&dir).map(|(p, s)| p - step * s).collect();
                let ft = objective(&trial)?;
                if ft <= f {
                    accepted = Some((trial, ft));
                    break;
                }
                step *= 0.5;
            }
            let Some((trial, ft)) = accepted else {
                if age == 1 {
                    break;
                }
                m1.iter_mut().chain(m2.iter_mut()).for_each(|v| *v = 0.0);
                age = 0;
                continue;
            };
            let change = f - ft;
            params = trial;
            f = ft;
            lr = (step * 1.5).min(opts.learning_rate);
            if change < opts.tolerance {
                break;
            }
        }
        let (_, r) = problem.evaluate(&params)?;
        for (mu, rv) in mult.iter_mut().zip(&r) {
            *mu += lambda * rv;
        }
        lambda *= opts.lambda_factor;
    }

    let ce = problem.ensemble(&params)?;
    let residual = target
        .residual(&ce)?
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    let cost_i0 = if model.dim() == model.noise_dim() {
        cost_i0(&ce).ok()
    } else {
        None
    };
    let mut control = problem.template.clone();
    control.set_parameters(&params);
    let converged = residual <= opts.residual_tolerance;
    if !converged {
        log::warn!(
            "rate optimizer stopped with constraint residual {residual:e} above {:e}",
            opts.residual_tolerance
        );
    }
    Ok(RateResult {
        target: target.label(),
        cost_i: cost_i(&ce),
        cost_i0,
        control,
        constraint_residual: residual,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::currents::TimeWindow;

    fn free(d: usize) -> CoefficientModel {
        CoefficientModel::linear_isotropic(d, 0.0, 0.0, 1.0, 2.0).unwrap()
    }

    fn open_loop(model: &CoefficientModel, init: &InitialEnsemble, steps: usize, values: Vec<f64>) -> ControlledEnsemble {
        let ctrl = ControlSpec::open_loop(init.len(), steps, model.noise_dim(), values).unwrap();
        ControlledEnsemble::integrate(model, init, 1.0, steps, &ctrl).unwrap()
    }

    #[test]
    fn cost_examples() {
        let model = free(1);
        let init = InitialEnsemble::dirac(1, &[0.0]).unwrap();
        let zero = open_loop(&model, &init, 10, vec![0.0; 10]);
        assert_eq!(cost_i(&zero), 0.0);
        assert_eq!(cost_i0(&zero).unwrap(), 0.0);
        let w = open_loop(&model, &init, 10, vec![1.5; 10]);
        assert!((cost_i(&w) - 0.5 * 2.25).abs() < 1e-14);

        let two = InitialEnsemble::from_points(1, vec![0.0, 1.0], "two").unwrap();
        let mut v = vec![1.0; 10];
        v.extend(vec![3.0; 10]);
        let ce = open_loop(&model, &two, 10, v);
        assert!((cost_i(&ce) - 2.5).abs() < 1e-14);
        assert!((cost_i0(&ce).unwrap() - 2.5).abs() < 1e-12);
        assert!(ce.dynamics_residual() < 1e-12);
    }

    #[test]
    fn coincident_opposite_controls_cancel() {
        let model = free(1);
        let init = InitialEnsemble::dirac(2, &[0.0]).unwrap();
        let mut v = vec![1.0; 10];
        v.extend(vec![-1.0; 10]);
        let ce = open_loop(&model, &init, 10, v);
        // positions split after the first step; only step 0 averages
        let i0 = cost_i0(&ce).unwrap();
        assert!(i0 < cost_i(&ce));
        let mut v = vec![0.0; 20];
        v[0] = 1.0;
        v[10] = -1.0;
        let ce = open_loop(&model, &init, 10, v);
        assert!(cost_i0(&ce).unwrap() < cost_i(&ce));
    }

    #[test]
    fn fully_coincident_cancellation_gives_zero() {
        let model = free(1);
        let init = InitialEnsemble::dirac(2, &[0.0]).unwrap();
        let mut v = vec![0.0; 2];
        v[0] = 1.0;
        v[1] = -1.0;
        let ce = open_loop(&model, &init, 1, v);
        assert_eq!(cost_i0(&ce).unwrap(), 0.0);
        assert!(cost_i(&ce) > 0.0);
    }

    #[test]
    fn singular_sigma_is_rejected() {
        let model = CoefficientModel::linear_1d(0.0, 0.0, 0.0, 0.0, 1.0).unwrap();
        let init = InitialEnsemble::dirac(1, &[0.0]).unwrap();
        let ce = open_loop(&model, &init, 4, vec![0.0; 4]);
        assert!(matches!(cost_i0(&ce), Err(Error::RateEvaluation(_))));
    }

    #[test]
    fn g_phi_is_zero_without_motion_and_linear() {
        let model = free(1);
        let init = InitialEnsemble::normal_quantiles(4, 0.0, 1.0).unwrap();
        let ce = open_loop(&model, &init, 8, vec![0.0; 32]);
        let phi = TestFunctionSpec::gaussian_bump(0.5, vec![0.0], 0.2, 1.0, 0, None);
        assert_eq!(pair_g_phi(&ce, &phi).unwrap(), 0.0);

        let ou = CoefficientModel::linear_1d(-1.0, 0.5, 0.2, 1.0, 2.0).unwrap();
        let vals: Vec<f64> = (0..32).map(|q| (q as f64 * 0.37).sin()).collect();
        let ce = open_loop(&ou, &init, 8, vals);
        let win = Some(TimeWindow::covering(1.0));
        let p1 = TestFunctionSpec::polynomial(vec![(vec![1], 0.7)], 0, win);
        let p2 = TestFunctionSpec::polynomial(vec![(vec![2], -0.4), (vec![0], 1.0)], 0, win);
        let sum = TestFunctionSpec::polynomial(vec![(vec![1], 0.7), (vec![2], -0.4), (vec![0], 1.0)], 0, win);
        let lhs = pair_g_phi(&ce, &sum).unwrap();
        let rhs = pair_g_phi(&ce, &p1).unwrap() + pair_g_phi(&ce, &p2).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn zero_target_needs_no_control() {
        let model = free(1);
        let init = InitialEnsemble::dirac(1, &[0.0]).unwrap();
        let r = optimize_rate(&model, &init, 1.0, 16, &RateTarget::TerminalMean(vec![0.0]), &RateOptions::default())
            .unwrap();
        assert!(r.converged);
        assert!(r.cost_i <= 1e-12);
        assert!(r.control.parameters().iter().all(|p| p.abs() < 1e-9));
    }

    #[test]
    fn straight_line_optimum() {
        let model = free(1);
        let init = InitialEnsemble::dirac(1, &[0.0]).unwrap();
        let r = optimize_rate(&model, &init, 1.0, 32, &RateTarget::TerminalMean(vec![2.0]), &RateOptions::default())
            .unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.cost_i / 2.0 - 1.0).abs() <= 0.02, "{r:?}");
        let i0 = r.cost_i0.unwrap();
        assert!((i0 - r.cost_i).abs() <= 1e-10 * (1.0 + r.cost_i));
    }
}
