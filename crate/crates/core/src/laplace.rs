//! Monte Carlo Laplace functionals `-(1/a_N) log E exp(-a_N F)`, control
//! upper bounds from the variational representation, and scans in `N`.
//!
//! The speed `a_N = N / ε_N²` grows quickly (`N^{3/2}` for `ε_N = N^{-1/4}`),
//! so naive estimates are only meaningful for functionals whose fluctuations
//! are not rare at that speed. Scans therefore test inequalities and trends,
//! never rate constants.

use crate::currents::{current_pairing_stratonovich, TestFunctionSpec};
use crate::error::{Error, Result};
use crate::model::{CoefficientModel, InitialEnsemble, MeasureStats};
use crate::par;
use crate::rate::{optimize_rate, ControlledEnsemble, RateOptions, RateResult, RateTarget};
use crate::simulator::{simulate_controlled, ControlSpec, PathEnsemble, SimConfig};

/// Smallest replica count accepted by the estimators.
pub const MIN_REPLICAS: usize = 16;

/// Bounded continuous functional of `(V^N, J^N)`.
#[derive(Clone, Debug, PartialEq)]
pub enum LaplaceFunctional {
    /// `κ tanh(w · mean(V(T)) - q)`.
    TanhOfMean { w: Vec<f64>, q: f64, kappa: f64 },
    /// `κ tanh(⟨J, φ₀⟩ - q)`.
    TanhOfCurrentPairing {
        phi: TestFunctionSpec,
        q: f64,
        kappa: f64,
    },
    /// `F ≡ c`.
    Constant(f64),
}

impl LaplaceFunctional {
    /// `sup |F|`.
    pub fn bound(&self) -> f64 {
        match self {
            LaplaceFunctional::TanhOfMean { kappa, .. }
            | LaplaceFunctional::TanhOfCurrentPairing { kappa, .. } => kappa.abs(),
            LaplaceFunctional::Constant(c) => c.abs(),
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            LaplaceFunctional::TanhOfMean { w, q, kappa } => {
                Error::check_dim("functional direction", d, w.len())?;
                if !(q.is_finite() && kappa.is_finite()) || w.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("functional parameters must be finite"));
                }
                Ok(())
            }
            LaplaceFunctional::TanhOfCurrentPairing { phi, q, kappa } => {
                phi.validate(d)?;
                if !(q.is_finite() && kappa.is_finite()) {
                    return Err(Error::invalid("functional parameters must be finite"));
                }
                Ok(())
            }
            LaplaceFunctional::Constant(c) => {
                if c.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("constant functional must be finite"))
                }
            }
        }
    }

    /// The scalar fed through `tanh`, or `None` for constants.
    fn statistic(&self, ens: &PathEnsemble) -> Result<Option<f64>> {
        Ok(match self {
            LaplaceFunctional::TanhOfMean { w, .. } => {
                let m = MeasureStats::from_points(ens.dim(), &ens.positions_at(ens.steps())).mean;
                Some(w.iter().zip(&m).map(|(a, b)| a * b).sum())
            }
            LaplaceFunctional::TanhOfCurrentPairing { phi, .. } => {
                Some(current_pairing_stratonovich(ens, phi)?)
            }
            LaplaceFunctional::Constant(_) => None,
        })
    }

    fn apply(&self, z: Option<f64>) -> f64 {
        match (self, z) {
            (LaplaceFunctional::TanhOfMean { q, kappa, .. }, Some(z))
            | (LaplaceFunctional::TanhOfCurrentPairing { q, kappa, .. }, Some(z)) => {
                kappa * (z - q).tanh()
            }
            (LaplaceFunctional::Constant(c), _) => *c,
            _ => unreachable!("statistic matches the functional kind"),
        }
    }

    pub fn evaluate(&self, ens: &PathEnsemble) -> Result<f64> {
        Ok(self.apply(self.statistic(ens)?))
    }
}

/// Replica estimate with its standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Replicas that contributed (diverged ones are dropped).
    pub replicas: usize,
    pub a_n: f64,
    pub master_seed: u64,
    /// Per-replica samples, indexed like the contributing replicas.
    pub samples: Vec<f64>,
}

fn check_replicas(r: usize) -> Result<()> {
    if r < MIN_REPLICAS {
        return Err(Error::invalid(format!(
            "at least {MIN_REPLICAS} replicas are required, got {r}"
        )));
    }
    Ok(())
}

/// Per-replica `(F_r, ½ energy_r)`; diverged replicas are skipped.
fn replica_samples(
    model: &CoefficientModel,
    init: &InitialEnsemble,
    cfg: &SimConfig,
    f: &LaplaceFunctional,
    ctrl: &ControlSpec,
    replicas: usize,
) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    f.validate(model.dim())?;
    let runs = par::map_indexed(replicas, |r| {
        let c = cfg.clone().with_replica(cfg.replica_index + r as u64);
        match simulate_controlled(model, init, &c, ctrl) {
            Ok(ens) => f
                .evaluate(&ens)
                .map(|v| Some((v, 0.5 * ens.control_energy()))),
            Err(Error::Diverged { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    });
    let mut out = Vec::with_capacity(replicas);
    let mut dropped = 0;
    for run in runs {
        match run? {
            Some(s) => out.push(s),
            None => dropped += 1,
        }
    }
    if out.is_empty() {
        return Err(Error::Estimation(format!("all {replicas} replicas diverged")));
    }
    if dropped > 0 {
        log::warn!("{dropped} of {replicas} replicas diverged and were dropped");
    }
    Ok(out)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn lse_pair(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `-(1/a) log((1/R) Σ exp(-a F_r))` with its leave-one-out jackknife error.
pub fn log_mean_exp_estimate(samples: &[f64], a: f64) -> (f64, f64) {
    let r = samples.len();
    let xs: Vec<f64> = samples.iter().map(|f| -a * f).collect();
    let value = -(log_sum_exp(&xs) - (r as f64).ln()) / a;
    if r < 2 {
        return (value, 0.0);
    }
    let mut prefix = vec![f64::NEG_INFINITY; r + 1];
    for i in 0..r {
        prefix[i + 1] = lse_pair(prefix[i], xs[i]);
    }
    let mut suffix = vec![f64::NEG_INFINITY; r + 1];
    for i in (0..r).rev() {
        suffix[i] = lse_pair(suffix[i + 1], xs[i]);
    }
    let loo: Vec<f64> = (0..r)
        .map(|i| -(lse_pair(prefix[i], suffix[i + 1]) - ((r - 1) as f64).ln()) / a)
        .collect();
    let mean = loo.iter().sum::<f64>() / r as f64;
    let var = loo.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() * (r - 1) as f64 / r as f64;
    (value, var.sqrt())
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Naive Monte Carlo Laplace functional over uncontrolled replicas.
pub fn laplace_naive(
    model: &CoefficientModel,
    init: &InitialEnsemble,
    cfg: &SimConfig,
    f: &LaplaceFunctional,
    replicas: usize,
) -> Result<McEstimate> {
    check_replicas(replicas)?;
    let samples: Vec<f64> = replica_samples(model, init, cfg, f, &ControlSpec::None, replicas)?
        .into_iter()
        .map(|(v, _)| v)
        .collect();
    let a = cfg.speed();
    let (value, std_error) = log_mean_exp_estimate(&samples, a);
    Ok(McEstimate {
        value,
        std_error,
        replicas: samples.len(),
        a_n: a,
        master_seed: cfg.master_seed,
        samples,
    })
}

/// `E[(1/2N) Σ_j ∫ |u_j|² dt + F]` over controlled replicas; an upper bound
/// on the Laplace functional for every control.
pub fn variational_bound(
    model: &CoefficientModel,
    init: &InitialEnsemble,
    cfg: &SimConfig,
    f: &LaplaceFunctional,
    ctrl: &ControlSpec,
    replicas: usize,
) -> Result<McEstimate> {
    check_replicas(replicas)?;
    let samples: Vec<f64> = replica_samples(model, init, cfg, f, ctrl, replicas)?
        .into_iter()
        .map(|(v, e)| v + e)
        .collect();
    let (value, std_error) = mean_and_se(&samples);
    Ok(McEstimate {
        value,
        std_error,
        replicas: samples.len(),
        a_n: cfg.speed(),
        master_seed: cfg.master_seed,
        samples,
    })
}

/// Initial ensembles indexed by particle count.
#[derive(Clone, Debug, PartialEq)]
pub enum InitFamily {
    Dirac(Vec<f64>),
    /// One-dimensional normal quantiles.
    NormalQuantiles { mean: f64, std: f64 },
    SampledNormal { mean: Vec<f64>, std: f64, seed: u64 },
}

impl InitFamily {
    pub fn build(&self, n: usize) -> Result<InitialEnsemble> {
        match self {
            InitFamily::Dirac(at) => InitialEnsemble::dirac(n, at),
            InitFamily::NormalQuantiles { mean, std } => InitialEnsemble::normal_quantiles(n, *mean, *std),
            InitFamily::SampledNormal { mean, std, seed } => {
                InitialEnsemble::sampled_normal(n, mean, *std, *seed)
            }
        }
    }
}

/// Golden-section search over the shift `s` of the functional's statistic,
/// minimizing `I(target(s)) + F(target(s))` on the noiseless controlled flow.
pub fn optimize_functional_control(
    model: &CoefficientModel,
    init: &InitialEnsemble,
    t_end: f64,
    steps: usize,
    f: &LaplaceFunctional,
    opts: &RateOptions,
) -> Result<Option<RateResult>> {
    f.validate(model.dim())?;
    let base = ControlledEnsemble::integrate(model, init, t_end, steps, &ControlSpec::None)?;
    let (target_at, kappa): (Box<dyn Fn(f64) -> RateTarget>, f64) = match f {
        LaplaceFunctional::Constant(_) => return Ok(None),
        LaplaceFunctional::TanhOfMean { w, kappa, .. } => {
            let m0 = base.terminal_mean();
            let norm2: f64 = w.iter().map(|v| v * v).sum();
            if norm2 == 0.0 {
                return Ok(None);
            }
            let w = w.clone();
            (
                Box::new(move |s: f64| {
                    RateTarget::TerminalMean(m0.iter().zip(&w).map(|(m, wi)| m + s * wi / norm2).collect())
                }),
                *kappa,
            )
        }
        LaplaceFunctional::TanhOfCurrentPairing { phi, kappa, .. } => {
            let z0 = current_pairing_stratonovich(base.paths(), phi)?;
            let phi = phi.clone();
            (
                Box::new(move |s: f64| RateTarget::TerminalPairing {
                    phi: phi.clone(),
                    value: z0 + s,
                }),
                *kappa,
            )
        }
    };
    if kappa == 0.0 {
        return Ok(None);
    }
    let z0 = f.statistic(base.paths())?.unwrap_or(0.0);
    let objective = |s: f64| -> Result<(f64, RateResult)> {
        let r = optimize_rate(model, init, t_end, steps, &target_at(s), opts)?;
        Ok((r.cost_i + f.apply(Some(z0 + s)), r))
    };
    // F moves by at most 2|κ|, so the optimal shift costs at most that much
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = objective(x1)?;
    let mut f2 = objective(x2)?;
    for _ in 0..30 {
        if f1.0 <= f2.0 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = objective(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = objective(x2)?;
        }
        if hi - lo < 1e-4 {
            break;
        }
    }
    let best = if f1.0 <= f2.0 { f1 } else { f2 };
    Ok(Some(best.1))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanSchedule {
    pub ns: Vec<usize>,
    pub alpha: f64,
    pub replicas: usize,
    pub steps: usize,
    pub t_end: f64,
    pub master_seed: u64,
}

impl ScanSchedule {
    /// `N ∈ {32, 128, 512}`, `α = 1/4`, 256 replicas, 32 steps on `[0, 1]`.
    pub fn default_ou() -> Self {
        ScanSchedule {
            ns: vec![32, 128, 512],
            alpha: 0.25,
            replicas: 256,
            steps: 32,
            t_end: 1.0,
            master_seed: 20_240_601,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.ns.is_empty() || self.ns.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("scan particle counts must be non-empty and increasing"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(Error::invalid(format!("scan exponent {} outside (0, 1/2]", self.alpha)));
        }
        check_replicas(self.replicas)
    }
}

/// One row per `(N, control)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub n: usize,
    pub epsilon: f64,
    pub a_n: f64,
    pub laplace: f64,
    pub laplace_se: f64,
    pub bound: f64,
    pub bound_se: f64,
    pub control: String,
    pub seed: u64,
    /// `laplace ≤ bound + 3 · combined SE`.
    pub holds: bool,
    /// Paired check that this bound does not exceed the zero-control bound
    /// by more than 3 SE of the paired differences; `None` for the zero row.
    pub tightens: Option<bool>,
    /// `F` at the noiseless limit flow.
    pub limit_value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    /// Kendall tau of the Laplace estimate against `N`.
    pub kendall_tau: f64,
    pub optimized: Option<RateResult>,
}

impl ScanReport {
    pub const CSV_HEADER: &'static str =
        "N,epsilon,aN,laplace,laplaceSE,bound,boundSE,control,seed,holds,tightens,limitF";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let tightens = r.tightens.map(|t| t.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{},{},{:e}\n",
                r.n,
                r.epsilon,
                r.a_n,
                r.laplace,
                r.laplace_se,
                r.bound,
                r.bound_se,
                r.control,
                r.seed,
                r.holds,
                tightens,
                r.limit_value
            ));
        }
        out
    }

    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.holds && r.tightens.unwrap_or(true))
    }
}

/// Kendall's tau-a between two equally long sequences.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += ((x[j] - x[i]) * (y[j] - y[i])).signum();
        }
    }
    s / (n * (n - 1) / 2) as f64
}

/// Laplace estimates and variational bounds (zero and rate-optimized
/// controls, paired seeds) along `N` with `ε_N = N^{-α}`.
pub fn ldp_scaling_scan(
    model: &CoefficientModel,
    family: &InitFamily,
    f: &LaplaceFunctional,
    schedule: &ScanSchedule,
    rate_opts: &RateOptions,
    control_particles: usize,
) -> Result<ScanReport> {
    schedule.validate()?;
    f.validate(model.dim())?;
    let limit_init = family.build(control_particles)?;
    let optimized =
        optimize_functional_control(model, &limit_init, schedule.t_end, schedule.steps, f, rate_opts)?;
    let limit = ControlledEnsemble::integrate(model, &limit_init, schedule.t_end, schedule.steps, &ControlSpec::None)?;
    let limit_value = f.evaluate(limit.paths())?;

    let mut rows = Vec::new();
    let mut values = Vec::new();
    for &n in &schedule.ns {
        let init = family.build(n)?;
        let cfg = SimConfig::new(n, schedule.t_end, schedule.steps, 0.0)
            .with_power_law(schedule.alpha)
            .with_seed(schedule.master_seed);
        let eps = cfg.noise_level();
        let a = cfg.speed();
        let zero = replica_samples(model, &init, &cfg, f, &ControlSpec::None, schedule.replicas)?;
        let fs: Vec<f64> = zero.iter().map(|(v, _)| *v).collect();
        let (laplace, laplace_se) = log_mean_exp_estimate(&fs, a);
        let (bound, bound_se) = mean_and_se(&fs);
        let combined = |se: f64| (laplace_se * laplace_se + se * se).sqrt();
        rows.push(ScanRow {
            n,
            epsilon: eps,
            a_n: a,
            laplace,
            laplace_se,
            bound,
            bound_se,
            control: ControlSpec::None.tag().to_string(),
            seed: schedule.master_seed,
            holds: laplace <= bound + 3.0 * combined(bound_se),
            tightens: None,
            limit_value,
        });
        values.push(laplace);
        if let Some(opt) = &optimized {
            let ctrl = opt.control_spec();
            let controlled = replica_samples(model, &init, &cfg, f, &ctrl, schedule.replicas)?;
            let bs: Vec<f64> = controlled.iter().map(|(v, e)| v + e).collect();
            let (b, b_se) = mean_and_se(&bs);
            let tightens = if bs.len() == fs.len() {
                let diffs: Vec<f64> = bs.iter().zip(&fs).map(|(x, y)| x - y).collect();
                let (dm, dse) = mean_and_se(&diffs);
                dm <= 3.0 * dse
            } else {
                b <= bound + 3.0 * (b_se * b_se + bound_se * bound_se).sqrt()
            };
            rows.push(ScanRow {
                n,
                epsilon: eps,
                a_n: a,
                laplace,
                laplace_se,
                bound: b,
                bound_se: b_se,
                control: "rate_optimized".to_string(),
                seed: schedule.master_seed,
                holds: laplace <= b + 3.0 * combined(b_se),
                tightens: Some(tightens),
                limit_value,
            });
        }
    }
    let ns: Vec<f64> = schedule.ns.iter().map(|n| *n as f64).collect();
    Ok(ScanReport {
        rows,
        kendall_tau: kendall_tau(&ns, &values),
        optimized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou() -> CoefficientModel {
        CoefficientModel::linear_1d(-1.0, 1.0, 0.0, 1.0, 2.0).unwrap()
    }

    #[test]
    fn log_mean_exp_matches_direct_sum() {
        let xs = [0.1f64, -0.3, 0.25, 0.0, 0.7];
        let a = 3.0f64;
        let direct = -(xs.iter().map(|f| (-a * f).exp()).sum::<f64>() / 5.0).ln() / a;
        let (v, se) = log_mean_exp_estimate(&xs, a);
        assert!((v - direct).abs() < 1e-14);
        // jackknife by brute force
        let loo: Vec<f64> = (0..5)
            .map(|i| {
                let rest: Vec<f64> = xs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
                -(rest.iter().map(|f| (-a * f).exp()).sum::<f64>() / 4.0).ln() / a
            })
            .collect();
        let m = loo.iter().sum::<f64>() / 5.0;
        let var = loo.iter().map(|v| (v - m) * (v - m)).sum::<f64>() * 4.0 / 5.0;
        assert!((se - var.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn huge_speed_does_not_overflow() {
        let (v, _) = log_mean_exp_estimate(&[1.0, 2.0, 3.0], 1e6);
        assert!((v - (1.0 + 3f64.ln() / 1e6)).abs() < 1e-12);
    }

    #[test]
    fn constant_functional_is_exact() {
        let init = InitialEnsemble::normal_quantiles(8, 0.0, 1.0).unwrap();
        let cfg = SimConfig::new(8, 1.0, 8, 0.3).with_seed(1);
        let est = laplace_naive(&ou(), &init, &cfg, &LaplaceFunctional::Constant(0.37), 16).unwrap();
        assert!((est.value - 0.37).abs() <= 1e-12);
        assert!(est.std_error <= 1e-12);
    }

    #[test]
    fn value_lies_between_extremes() {
        let model = CoefficientModel::linear_1d(0.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        let init = InitialEnsemble::normal_quantiles(16, 0.2, 1.0).unwrap();
        let cfg = SimConfig::new(16, 1.0, 16, 0.5).with_seed(3);
        let f = LaplaceFunctional::TanhOfMean { w: vec![1.0], q: 0.0, kappa: 0.1 };
        let est = laplace_naive(&model, &init, &cfg, &f, 32).unwrap();
        let lo = est.samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = est.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo <= est.value && est.value <= hi);
        let bound = variational_bound(&model, &init, &cfg, &f, &ControlSpec::None, 32).unwrap();
        assert!(est.value <= bound.value);
    }

    #[test]
    fn too_few_replicas_is_an_error() {
        let init = InitialEnsemble::normal_quantiles(4, 0.0, 1.0).unwrap();
        let cfg = SimConfig::new(4, 1.0, 4, 0.3);
        assert!(laplace_naive(&ou(), &init, &cfg, &LaplaceFunctional::Constant(0.0), 8).is_err());
    }

    #[test]
    fn zero_functional_bound_is_half_energy() {
        let model = CoefficientModel::linear_1d(0.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        let init = InitialEnsemble::normal_quantiles(4, 0.0, 1.0).unwrap();
        let cfg = SimConfig::new(4, 1.0, 10, 0.3).with_seed(5);
        let ctrl = ControlSpec::constant(4, 10, &[0.8]);
        let est = variational_bound(&model, &init, &cfg, &LaplaceFunctional::Constant(0.0), &ctrl, 16).unwrap();
        assert!((est.value - 0.32).abs() < 1e-12);
    }

    #[test]
    fn speed_follows_power_law() {
        let a: Vec<f64> = [32usize, 128, 512]
            .iter()
            .map(|n| SimConfig::new(*n, 1.0, 4, 0.0).with_power_law(0.25).speed())
            .collect();
        for (got, want) in a.iter().zip([181.019, 1448.155, 11585.24]) {
            assert!((got - want).abs() / want < 1e-5, "{got}");
        }
    }

    #[test]
    fn kendall_tau_extremes() {
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[0.1, 0.2, 0.3]), 1.0);
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[0.3, 0.2, 0.1]), -1.0);
    }

    #[test]
    fn constant_functional_scan_rows_are_constant() {
        let schedule = ScanSchedule {
            ns: vec![8, 16],
            replicas: 16,
            steps: 8,
            ..ScanSchedule::default_ou()
        };
        let report = ldp_scaling_scan(
            &ou(),
            &InitFamily::NormalQuantiles { mean: 0.5, std: 1.0 },
            &LaplaceFunctional::Constant(-0.2),
            &schedule,
            &RateOptions::default(),
            16,
        )
        .unwrap();
        assert_eq!(report.rows.len(), 2);
        for r in &report.rows {
            assert!((r.laplace + 0.2).abs() < 1e-12 && (r.bound + 0.2).abs() < 1e-12);
        }
    }
}
