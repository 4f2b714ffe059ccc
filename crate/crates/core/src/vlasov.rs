//! Deterministic limits integrated along characteristics: the mean-field
//! flow, its current, controlled continuity equations and their weak-form
//! residuals.

use std::sync::atomic::{AtomicBool, Ordering};

use crate::currents::{
    accumulate_coefficients, CoefficientInput, CurrentCoefficients, ModeGrid, Provenance,
    TestFunctionSpec, TimeWindow, DEFAULT_MEMORY_CAP,
};
use crate::error::{Error, Result};
use crate::model::{CoefficientModel, EmpiricalMeasure, InitialEnsemble, MeasureStats};
use crate::simulator::{AffineSchedule, PathEnsemble, SimConfig, DIVERGENCE_BOUND};

static EXTRAPOLATION_WARNED: AtomicBool = AtomicBool::new(false);

/// Time–space lattice of `d`-vectors with multilinear interpolation and
/// constant extrapolation outside the box.
#[derive(Clone, Debug, PartialEq)]
pub struct GriddedField {
    pub t_lo: f64,
    pub t_hi: f64,
    pub t_points: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Points per spatial axis.
    pub points: usize,
    /// Flat `(time, space index with last axis fastest, component)`.
    pub values: Vec<f64>,
}

impl GriddedField {
    /// Sample `f(t, x)` on the lattice.
    #[allow(clippy::too_many_arguments)]
    pub fn sample(
        t_lo: f64,
        t_hi: f64,
        t_points: usize,
        lo: Vec<f64>,
        hi: Vec<f64>,
        points: usize,
        f: impl Fn(f64, &[f64], &mut [f64]),
    ) -> Result<Self> {
        let d = lo.len();
        let mut field = GriddedField {
            t_lo,
            t_hi,
            t_points,
            lo,
            hi,
            points,
            values: Vec::new(),
        };
        field.check_shape(d)?;
        let spatial = points.pow(d as u32);
        let mut values = vec![0.0; t_points * spatial * d];
        let mut x = vec![0.0; d];
        for p in 0..t_points {
            let t = field.t_node(p);
            for s in 0..spatial {
                field.x_node(s, &mut x);
                let o = (p * spatial + s) * d;
                f(t, &x, &mut values[o..o + d]);
            }
        }
        field.values = values;
        field.validate(d)?;
        Ok(field)
    }

    fn check_shape(&self, d: usize) -> Result<()> {
        Error::check_dim("gridded field box", d, self.hi.len())?;
        if self.t_points < 2 || self.points < 2 {
            return Err(Error::invalid("gridded field needs at least 2 nodes per axis"));
        }
        if !(self.t_lo < self.t_hi) || self.lo.iter().zip(&self.hi).any(|(a, b)| !(a < b)) {
            return Err(Error::invalid("gridded field box must have lo < hi"));
        }
        Ok(())
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        Error::check_dim("gridded field box", d, self.lo.len())?;
        self.check_shape(d)?;
        Error::check_dim(
            "gridded field values",
            self.t_points * self.points.pow(d as u32) * d,
            self.values.len(),
        )?;
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("gridded field holds non-finite values"));
        }
        Ok(())
    }

    fn t_node(&self, p: usize) -> f64 {
        self.t_lo + (self.t_hi - self.t_lo) * p as f64 / (self.t_points - 1) as f64
    }

    fn x_node(&self, s: usize, x: &mut [f64]) {
        let mut rest = s;
        for axis in (0..x.len()).rev() {
            let l = rest % self.points;
            rest /= self.points;
            x[axis] = self.lo[axis]
                + (self.hi[axis] - self.lo[axis]) * l as f64 / (self.points - 1) as f64;
        }
    }

    /// Cell index and fractional offset along one axis, clamped.
    fn locate(lo: f64, hi: f64, n: usize, v: f64) -> (usize, f64, bool) {
        let u = (v - lo) / (hi - lo) * (n - 1) as f64;
        let outside = !(0.0..=(n - 1) as f64).contains(&u);
        let u = u.clamp(0.0, (n - 1) as f64);
        let i = (u.floor() as usize).min(n - 2);
        (i, u - i as f64, outside)
    }

    pub fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        let (ti, tf, _) = Self::locate(self.t_lo, self.t_hi, self.t_points, t);
        let mut cells = Vec::with_capacity(d);
        let mut outside = false;
        for (axis, v) in x.iter().enumerate() {
            let (i, f, o) = Self::locate(self.lo[axis], self.hi[axis], self.points, *v);
            outside |= o;
            cells.push((i, f));
        }
        if outside && !EXTRAPOLATION_WARNED.swap(true, Ordering::Relaxed) {
            log::warn!("velocity field evaluated outside its lattice box; extrapolating constantly");
        }
        let spatial = self.points.pow(d as u32);
        out.iter_mut().for_each(|o| *o = 0.0);
        for corner in 0..(1usize << (d + 1)) {
            let mut w = if corner & 1 == 1 { tf } else { 1.0 - tf };
            let p = ti + (corner & 1);
            let mut s = 0;
            for (axis, (i, f)) in cells.iter().enumerate() {
                let bit = (corner >> (axis + 1)) & 1;
                w *= if bit == 1 { *f } else { 1.0 - f };
                s = s * self.points + i + bit;
            }
            if w == 0.0 {
                continue;
            }
            let o = (p * spatial + s) * d;
            for (acc, v) in out.iter_mut().zip(&self.values[o..o + d]) {
                *acc += w * v;
            }
        }
    }
}

/// Driver of a controlled characteristic flow.
#[derive(Clone, Debug, PartialEq)]
pub enum VelocityField {
    /// Pure transport `dξ/dt = α(t) + β(t) ξ`.
    ClosedFormAffine(AffineSchedule),
    /// Pure transport by an interpolated lattice field.
    Gridded(GriddedField),
    /// Controlled mean-field dynamics `dξ/dt = b(ξ, V) + σ(V) v(t, ξ)` with
    /// the control `v = α(t) + β(t) ξ`.
    AffineControl(AffineSchedule),
    /// The uncontrolled velocity `b(ξ, V)` of the flow itself.
    MeanField,
}

impl VelocityField {
    pub fn zero(d: usize, t_end: f64) -> Self {
        VelocityField::ClosedFormAffine(AffineSchedule::constant(t_end, &vec![0.0; d], d))
    }

    fn validate(&self, model: &CoefficientModel) -> Result<()> {
        let d = model.dim();
        match self {
            VelocityField::ClosedFormAffine(s) => {
                Error::check_dim("velocity field rows", d, s.rows())?;
                Error::check_dim("velocity field columns", d, s.cols())
            }
            VelocityField::Gridded(g) => g.validate(d),
            VelocityField::AffineControl(s) => {
                if !model.sigma_measure_only() {
                    return Err(Error::invalid(
                        "controlled mean-field flows need a diffusion depending on the measure only",
                    ));
                }
                Error::check_dim("control rows", model.noise_dim(), s.rows())?;
                Error::check_dim("control columns", d, s.cols())
            }
            VelocityField::MeanField => Ok(()),
        }
    }
}

enum Driver<'a> {
    MeanField,
    Field(&'a VelocityField),
}

/// Velocities of all characteristics at `(t, positions)` during `step`.
fn eval_driver(
    driver: &Driver<'_>,
    model: &CoefficientModel,
    t: f64,
    step: usize,
    steps: usize,
    positions: &[f64],
    out: &mut [f64],
) {
    let d = model.dim();
    let needs_stats = !matches!(
        driver,
        Driver::Field(VelocityField::ClosedFormAffine(_) | VelocityField::Gridded(_))
    );
    let stats = if needs_stats {
        Some(MeasureStats::from_points(d, positions))
    } else {
        None
    };
    match driver {
        Driver::MeanField | Driver::Field(VelocityField::MeanField) => {
            let stats = stats.as_ref().unwrap();
            for (x, o) in positions.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
                model.drift_into(x, stats, o);
            }
        }
        Driver::Field(VelocityField::ClosedFormAffine(s)) => {
            let bin = s.bin_for_step(step, steps);
            for (x, o) in positions.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
                s.eval_bin(bin, x, o);
            }
        }
        Driver::Field(VelocityField::Gridded(g)) => {
            for (x, o) in positions.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
                g.eval(t, x, o);
            }
        }
        Driver::Field(VelocityField::AffineControl(s)) => {
            let stats = stats.as_ref().unwrap();
            let sigma = model.diffusion_at(stats);
            let bin = s.bin_for_step(step, steps);
            let mut v = vec![0.0; s.rows()];
            for (x, o) in positions.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
                model.drift_into(x, stats, o);
                s.eval_bin(bin, x, &mut v);
                for (r, orow) in o.iter_mut().enumerate() {
                    *orow += (0..v.len()).map(|c| sigma[(r, c)] * v[c]).sum::<f64>();
                }
            }
        }
    }
}

/// Characteristics `ξ_j(t_i)` of a deterministic flow with the velocities
/// used at both ends of every step.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitFlow {
    d: usize,
    k: usize,
    steps: usize,
    t_end: f64,
    trajectories: Vec<f64>,
    /// `(i, j, coordinate)`: velocity at the start of step `i`.
    start_velocity: Vec<f64>,
    /// `(i, j, coordinate)`: velocity at the end of step `i`.
    end_velocity: Vec<f64>,
    model: CoefficientModel,
    source: String,
    controlled: bool,
}

impl LimitFlow {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn particles(&self) -> usize {
        self.k
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

    pub fn model(&self) -> &CoefficientModel {
        &self.model
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn is_controlled(&self) -> bool {
        self.controlled
    }

    /// Flat `(j, i, coordinate)`.
    pub fn trajectories(&self) -> &[f64] {
        &self.trajectories
    }

    pub fn point(&self, j: usize, i: usize) -> &[f64] {
        let o = (j * (self.steps + 1) + i) * self.d;
        &self.trajectories[o..o + self.d]
    }

    pub fn positions_at(&self, i: usize) -> Vec<f64> {
        (0..self.k).flat_map(|j| self.point(j, i).iter().copied()).collect()
    }

    pub fn marginal(&self, i: usize) -> Result<EmpiricalMeasure> {
        if i > self.steps {
            return Err(Error::invalid(format!(
                "time index {i} beyond {} steps",
                self.steps
            )));
        }
        Ok(EmpiricalMeasure::uniform(self.d, self.positions_at(i)))
    }

    pub fn terminal_mean(&self) -> Vec<f64> {
        MeasureStats::from_points(self.d, &self.positions_at(self.steps)).mean
    }

    fn step_velocities(&self, i: usize, end: bool) -> &[f64] {
        let len = self.k * self.d;
        let v = if end { &self.end_velocity } else { &self.start_velocity };
        &v[i * len..(i + 1) * len]
    }

    /// Velocity of characteristic `j` at the start of step `i`.
    pub fn start_velocity(&self, j: usize, i: usize) -> &[f64] {
        &self.step_velocities(i, false)[j * self.d..(j + 1) * self.d]
    }

    /// View as a noiseless, uncontrolled path ensemble (shared dump format).
    pub fn to_path_ensemble(&self) -> Result<PathEnsemble> {
        let m = self.model.noise_dim();
        let cfg = SimConfig::new(self.k, self.t_end, self.steps, 0.0);
        PathEnsemble::from_parts(
            self.model.clone(),
            cfg,
            0.0,
            self.trajectories.clone(),
            vec![0.0; self.k * self.steps * m],
            vec![0.0; self.k * self.steps * m],
        )
    }
}

fn integrate(
    model: &CoefficientModel,
    init: &InitialEnsemble,
    t_end: f64,
    steps: usize,
    driver: Driver<'_>,
) -> Result<LimitFlow> {
    let d = model.dim();
    Error::check_dim("initial ensemble dimension", d, init.dim())?;
    if init.is_empty() {
        return Err(Error::invalid("initial ensemble is empty"));
    }
    if steps == 0 || !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::invalid("flow needs steps >= 1 and a positive finite horizon"));
    }
    if let Driver::Field(h) = &driver {
        h.validate(model)?;
    }
    let k = init.len();
    let len = k * d;
    let dt = t_end / steps as f64;
    let mut traj = vec![0.0; k * (steps + 1) * d];
    let mut start_v = vec![0.0; steps * len];
    let mut end_v = vec![0.0; steps * len];
    let mut y: Vec<f64> = init.points().to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    let mut stage = vec![0.0; len];
    let store = |traj: &mut [f64], i: usize, y: &[f64]| {
        for j in 0..k {
            let o = (j * (steps + 1) + i) * d;
            traj[o..o + d].copy_from_slice(&y[j * d..(j + 1) * d]);
        }
    };
    store(&mut traj, 0, &y);
    for i in 0..steps {
        let t = i as f64 * dt;
        eval_driver(&driver, model, t, i, steps, &y, &mut k1);
        for (s, (a, b)) in stage.iter_mut().zip(y.iter().zip(&k1)) {
            *s = a + 0.5 * dt * b;
        }
        eval_driver(&driver, model, t + 0.5 * dt, i, steps, &stage, &mut k2);
        for (s, (a, b)) in stage.iter_mut().zip(y.iter().zip(&k2)) {
            *s = a + 0.5 * dt * b;
        }
        eval_driver(&driver, model, t + 0.5 * dt, i, steps, &stage, &mut k3);
        for (s, (a, b)) in stage.iter_mut().zip(y.iter().zip(&k3)) {
            *s = a + dt * b;
        }
        eval_driver(&driver, model, t + dt, i, steps, &stage, &mut k4);
        for (idx, v) in y.iter_mut().enumerate() {
            *v += dt / 6.0 * (k1[idx] + 2.0 * k2[idx] + 2.0 * k3[idx] + k4[idx]);
        }
        for (j, p) in y.chunks_exact(d).enumerate() {
            let magnitude = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(magnitude <= DIVERGENCE_BOUND) {
                return Err(Error::Diverged {
                    step: i + 1,
                    particle: j,
                    magnitude,
                });
            }
        }
        start_v[i * len..(i + 1) * len].copy_from_slice(&k1);
        eval_driver(&driver, model, t + dt, i, steps, &y, &mut end_v[i * len..(i + 1) * len]);
        store(&mut traj, i + 1, &y);
    }
    Ok(LimitFlow {
        d,
        k,
        steps,
        t_end,
        trajectories: traj,
        start_velocity: start_v,
        end_velocity: end_v,
        model: model.clone(),
        source: init.source().to_string(),
        controlled: matches!(driver, Driver::Field(_)),
    })
}

/// RK4 integration of `dξ_j/dt = b(ξ_j, V*(t))`, with `V*` the empirical
/// measure of all characteristics re-evaluated at every stage.
pub fn solve_limit_flow(
    model: &CoefficientModel,
    init: &InitialEnsemble,
    t_end: f64,
    steps: usize,
) -> Result<LimitFlow> {
    integrate(model, init, t_end, steps, Driver::MeanField)
}

/// Fourier coefficients of the flow current `ξ_j'(t) dt`, by the trapezoid
/// rule over each step.
pub fn limit_current_coefficients(flow: &LimitFlow, grid: &ModeGrid) -> Result<CurrentCoefficients> {
    grid.validate(flow.t_end)?;
    Error::check_dim("mode grid dimension", flow.d, grid.d)?;
    let (k, d, steps) = (flow.k, flow.d, flow.steps);
    let dt = flow.dt();
    let nodes = 2 * steps;
    let mut times = Vec::with_capacity(nodes);
    let mut positions = Vec::with_capacity(nodes * k * d);
    let mut vectors = Vec::with_capacity(nodes * k * d);
    for i in 0..steps {
        for (end, node) in [(false, i), (true, i + 1)] {
            times.push(flow.time(node));
            positions.extend(flow.positions_at(node));
            vectors.extend_from_slice(flow.step_velocities(i, end));
        }
    }
    let weights = vec![0.5 * dt; nodes];
    let input = CoefficientInput {
        d,
        particles: k,
        times: &times,
        weights: &weights,
        positions: &positions,
        vectors: &vectors,
    };
    let provenance = if flow.controlled {
        Provenance::Controlled
    } else {
        Provenance::Limit
    };
    accumulate_coefficients(grid, &input, provenance, DEFAULT_MEMORY_CAP)
}

/// Push characteristics along `h` and return the flow with its current
/// `hV` on `grid`.
pub fn solve_controlled_continuity(
    model: &CoefficientModel,
    init: &InitialEnsemble,
    t_end: f64,
    steps: usize,
    h: &VelocityField,
    grid: &ModeGrid,
) -> Result<(LimitFlow, CurrentCoefficients)> {
    let flow = integrate(model, init, t_end, steps, Driver::Field(h))?;
    let cur = limit_current_coefficients(&flow, grid)?;
    Ok((flow, cur))
}

/// Weak-form residuals of `∂_t V + div(hV) = 0` against scalar test
/// functions.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    pub residuals: Vec<f64>,
    pub max_abs: f64,
}

/// `∫ ⟨V(t), ∂_t φ + ∇φ · h⟩ dt` along the flow's characteristics, Simpson
/// per step with Hermite midpoints.
pub fn vlasov_residual(
    flow: &LimitFlow,
    h: &VelocityField,
    phis: &[TestFunctionSpec],
) -> Result<ResidualReport> {
    let (d, k, steps) = (flow.d, flow.k, flow.steps);
    h.validate(&flow.model)?;
    for phi in phis {
        phi.validate(d)?;
    }
    let dt = flow.dt();
    let driver = Driver::Field(h);
    let len = k * d;
    let mut hv = vec![0.0; len];
    let mut mid = vec![0.0; len];
    let integrand = |phi: &TestFunctionSpec, t: f64, pos: &[f64], vel: &[f64]| -> f64 {
        let mut acc = 0.0;
        for (x, v) in pos.chunks_exact(d).zip(vel.chunks_exact(d)) {
            let jet = phi.jet(t, x);
            acc += jet.dt + jet.grad.iter().zip(v).map(|(g, w)| g * w).sum::<f64>();
        }
        acc / k as f64
    };
    let mut residuals = vec![0.0; phis.len()];
    for i in 0..steps {
        let (t0, t1) = (flow.time(i), flow.time(i + 1));
        let tm = 0.5 * (t0 + t1);
        let (x0, x1) = (flow.positions_at(i), flow.positions_at(i + 1));
        let (v0, v1) = (flow.step_velocities(i, false), flow.step_velocities(i, true));
        for idx in 0..len {
            mid[idx] = 0.5 * (x0[idx] + x1[idx]) + dt / 8.0 * (v0[idx] - v1[idx]);
        }
        let mut samples = [(t0, x0.as_slice(), 1.0), (tm, mid.as_slice(), 4.0), (t1, x1.as_slice(), 1.0)];
        for (t, pos, w) in samples.iter_mut() {
            eval_driver(&driver, &flow.model, *t, i, steps, pos, &mut hv);
            for (r, phi) in residuals.iter_mut().zip(phis) {
                *r += *w * dt / 6.0 * integrand(phi, *t, pos, &hv);
            }
        }
    }
    let max_abs = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(ResidualReport { residuals, max_abs })
}

/// Twelve Gaussian bumps on a fixed stencil: centers `t ∈ {0.3, 0.5, 0.7}·T`
/// times `x_1 ∈ {-1, -0.3, 0.3, 1}`, widths `0.1·T` and `0.5`, windowed to
/// the interior of `(0, T)`.
pub fn standard_bump_battery(d: usize, t_end: f64) -> Vec<TestFunctionSpec> {
    let mut out = Vec::with_capacity(12);
    for tc in [0.3, 0.5, 0.7] {
        for xc in [-1.0, -0.3, 0.3, 1.0] {
            let mut x0 = vec![0.0; d];
            x0[0] = xc;
            out.push(TestFunctionSpec::gaussian_bump(
                tc * t_end,
                x0,
                0.1 * t_end,
                0.5,
                0,
                Some(TimeWindow::interior(t_end)),
            ));
        }
    }
    out
}
