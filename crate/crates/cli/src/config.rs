//! Run configuration: JSON text, `--set` overrides, defaults, and the
//! conversion into core types. Every field is concrete after [`resolve`],
//! so the resolved file re-parses to itself.

use std::fmt;
use std::path::Path;

use meanfield_core::currents::{ModeGrid, Phase, SobolevIndex, TestFunctionSpec, TimeWindow};
use meanfield_core::laplace::{InitFamily, LaplaceFunctional, ScanSchedule};
use meanfield_core::model::{CoefficientModel, Family, GradientPotential, InitialEnsemble, LinearInteraction};
use nalgebra::{DMatrix, DVector};
use meanfield_core::rate::{RateOptions, RateTarget};
use meanfield_core::simulator::SimConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SEED_ENV: &str = "MEANFIELD_SEED";

/// A config problem anchored at a field path and, when known, a line.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn at(field: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError {
            field: field.into(),
            line: None,
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: `{}`: {}", self.field, self.message),
            None => write!(f, "`{}`: {}", self.field, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

type Matrix = Vec<Vec<f64>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "camelCase", deny_unknown_fields)]
pub enum ModelBlock {
    #[serde(rename_all = "camelCase")]
    LinearInteraction {
        a: Matrix,
        b: Matrix,
        c: Vec<f64>,
        sigma0: Matrix,
        #[serde(default)]
        sigma1: Option<Matrix>,
        #[serde(default)]
        mean_gain: f64,
        declared_l: f64,
    },
    #[serde(rename_all = "camelCase")]
    GradientPotential {
        potential: [f64; 5],
        kappa: f64,
        sigma0: Matrix,
        declared_l: f64,
    },
}

impl Default for ModelBlock {
    /// Mean-reverting interacting OU: `dX = (-X + mean) dt + ε dW`.
    fn default() -> Self {
        ModelBlock::LinearInteraction {
            a: vec![vec![-1.0]],
            b: vec![vec![1.0]],
            c: vec![0.0],
            sigma0: vec![vec![1.0]],
            sigma1: None,
            mean_gain: 0.0,
            declared_l: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum InitBlock {
    /// Explicit atoms, `dim` coordinates each.
    Points { dim: usize, points: Vec<f64> },
    Dirac { at: Vec<f64> },
    NormalQuantiles { mean: f64, std: f64 },
    SampledNormal { mean: Vec<f64>, std: f64, seed: u64 },
}

impl Default for InitBlock {
    fn default() -> Self {
        InitBlock::NormalQuantiles { mean: 0.5, std: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct SimBlock {
    pub n: usize,
    pub t_end: f64,
    pub steps: usize,
    pub epsilon: f64,
    /// When set, `ε = N^{-alpha}` replaces `epsilon`.
    pub alpha: Option<f64>,
    pub master_seed: u64,
    pub replica_index: u64,
}

impl Default for SimBlock {
    fn default() -> Self {
        SimBlock {
            n: 64,
            t_end: 1.0,
            steps: 32,
            epsilon: 0.3,
            alpha: None,
            master_seed: 20_240_601,
            replica_index: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct CurrentsBlock {
    pub n_max: usize,
    pub xi_max: f64,
    pub xi_points: usize,
    /// Time window of the periodic extension; default `-T/4`.
    pub a: Option<f64>,
    /// Default `5T/4`.
    pub b: Option<f64>,
    pub s1: f64,
    /// Default `d/2 + 1.25`.
    pub s2: Option<f64>,
    pub memory_cap_bytes: usize,
}

impl Default for CurrentsBlock {
    fn default() -> Self {
        CurrentsBlock {
            n_max: 8,
            xi_max: 4.0,
            xi_points: 17,
            a: None,
            b: None,
            s1: 0.75,
            s2: None,
            memory_cap_bytes: meanfield_core::currents::DEFAULT_MEMORY_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct WindowBlock {
    pub start: f64,
    pub plateau_start: f64,
    pub plateau_end: f64,
    pub end: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PhaseBlock {
    Cos,
    Sin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum TestFunctionBlock {
    #[serde(rename_all = "camelCase")]
    GaussianBump {
        t0: f64,
        x0: Vec<f64>,
        width_t: f64,
        width_x: f64,
        k: usize,
        #[serde(default)]
        window: Option<WindowBlock>,
    },
    SingleMode {
        n: i64,
        xi: Vec<f64>,
        k: usize,
        phase: PhaseBlock,
        a: f64,
        b: f64,
    },
    /// Terms `(exponents, coefficient)`.
    Polynomial {
        terms: Vec<(Vec<u32>, f64)>,
        k: usize,
        #[serde(default)]
        window: Option<WindowBlock>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub enum TargetBlock {
    TerminalMean(Vec<f64>),
    TerminalPairing { phi: TestFunctionBlock, value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct RateBlock {
    pub targets: Vec<TargetBlock>,
    /// Particles representing the initial law of the controlled flow.
    pub particles: usize,
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

impl Default for RateBlock {
    fn default() -> Self {
        let o = RateOptions::default();
        RateBlock {
            targets: vec![TargetBlock::TerminalMean(vec![1.0])],
            particles: 64,
            bins: o.bins,
            lambda0: o.lambda0,
            lambda_factor: o.lambda_factor,
            restarts: o.restarts,
            fd_step: o.fd_step,
            learning_rate: o.learning_rate,
            max_iterations: o.max_iterations,
            tolerance: o.tolerance,
            residual_tolerance: o.residual_tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum FunctionalBlock {
    TanhOfMean { w: Vec<f64>, q: f64, kappa: f64 },
    TanhOfCurrentPairing { phi: TestFunctionBlock, q: f64, kappa: f64 },
    Constant { value: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ControlChoice {
    Zero,
    /// Zero control plus the rate-optimized one.
    Optimized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct ScanBlock {
    pub ns: Vec<usize>,
    pub alpha: f64,
    pub replicas: usize,
    pub steps: usize,
    pub t_end: f64,
    pub control_particles: usize,
}

impl Default for ScanBlock {
    fn default() -> Self {
        let s = ScanSchedule::default_ou();
        ScanBlock {
            ns: s.ns,
            alpha: s.alpha,
            replicas: s.replicas,
            steps: s.steps,
            t_end: s.t_end,
            control_particles: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct LaplaceBlock {
    pub functional: FunctionalBlock,
    pub replicas: usize,
    pub control: ControlChoice,
    pub scan: ScanBlock,
}

impl Default for LaplaceBlock {
    fn default() -> Self {
        LaplaceBlock {
            functional: FunctionalBlock::TanhOfMean {
                w: vec![1.0],
                q: 0.0,
                kappa: 0.02,
            },
            replicas: 256,
            control: ControlChoice::Optimized,
            scan: ScanBlock::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct ValidateBlock {
    pub probe_count: usize,
    pub probe_radius: f64,
    pub seed: u64,
}

impl Default for ValidateBlock {
    fn default() -> Self {
        ValidateBlock {
            probe_count: 2000,
            probe_radius: meanfield_core::model::DEFAULT_PROBE_RADIUS,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    pub init: InitBlock,
    pub sim: SimBlock,
    pub currents: CurrentsBlock,
    pub rate: RateBlock,
    pub laplace: LaplaceBlock,
    pub validate: ValidateBlock,
    pub output: String,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelBlock::default(),
            init: InitBlock::default(),
            sim: SimBlock::default(),
            currents: CurrentsBlock::default(),
            rate: RateBlock::default(),
            laplace: LaplaceBlock::default(),
            validate: ValidateBlock::default(),
            output: "out".into(),
            threads: 0,
        }
    }
}

/// Where the master seed came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeedSource {
    Config,
    Environment,
}

impl SeedSource {
    pub fn as_str(self) -> &'static str {
        match self {
            SeedSource::Config => "config",
            SeedSource::Environment => SEED_ENV,
        }
    }
}

/// Apply `path=value` to a JSON tree. `value` is read as JSON when it
/// parses and as a plain string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::at(assignment, "override must look like path=value"))?;
    let path = path.trim();
    if path.is_empty() {
        return Err(ConfigError::at(assignment, "override path is empty"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        let last = depth + 1 == parts.len();
        if let Value::Array(items) = node {
            let idx: usize = part
                .parse()
                .map_err(|_| ConfigError::at(path, format!("`{part}` is not an array index")))?;
            let len = items.len();
            let slot = items
                .get_mut(idx)
                .ok_or_else(|| ConfigError::at(path, format!("index {idx} out of range (length {len})")))?;
            if last {
                *slot = value;
                return Ok(());
            }
            node = slot;
            continue;
        }
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        let map = node.as_object_mut().expect("object");
        if last {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert(Value::Object(Default::default()));
    }
    Ok(())
}

fn path_error(err: serde_path_to_error::Error<serde_json::Error>, line: bool) -> ConfigError {
    let field = err.path().to_string();
    let inner = err.into_inner();
    ConfigError {
        field,
        line: (line && inner.line() > 0).then(|| inner.line()),
        message: strip_location(&inner.to_string()),
    }
}

fn strip_location(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

/// Parse config text, apply overrides and fill defaults. Overrides act on
/// the default-filled document, so `--set model.a=[[2]]` works without a
/// model block in the file. Derived defaults are filled after overrides.
pub fn load_str(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| path_error(e, true))?;
    if !overrides.is_empty() {
        let mut tree = serde_json::to_value(&cfg).expect("config serializes");
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        cfg = serde_path_to_error::deserialize(tree).map_err(|e| path_error(e, false))?;
    }
    Ok(resolve(cfg))
}

pub fn load_file(path: &Path, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::at("<file>", format!("cannot read {}: {e}", path.display())))?;
    load_str(&text, overrides)
}

/// Fill the fields whose defaults depend on other fields.
pub fn resolve(mut cfg: RunConfig) -> RunConfig {
    let t = cfg.sim.t_end;
    cfg.currents.a.get_or_insert(-t / 4.0);
    cfg.currents.b.get_or_insert(5.0 * t / 4.0);
    let d = model_dim(&cfg.model);
    cfg.currents.s2.get_or_insert(d as f64 / 2.0 + 1.25);
    if let ModelBlock::LinearInteraction { sigma0, sigma1, .. } = &mut cfg.model {
        if sigma1.is_none() {
            let cols = sigma0.first().map_or(0, Vec::len);
            *sigma1 = Some(vec![vec![0.0; cols]; sigma0.len()]);
        }
    }
    cfg
}

/// Replace the master seed from the environment value, if any.
pub fn apply_seed_env(cfg: &mut RunConfig, env: Option<&str>) -> Result<SeedSource, ConfigError> {
    match env {
        None => Ok(SeedSource::Config),
        Some(raw) => {
            cfg.sim.master_seed = raw
                .trim()
                .parse()
                .map_err(|_| ConfigError::at(SEED_ENV, format!("`{raw}` is not an unsigned integer")))?;
            Ok(SeedSource::Environment)
        }
    }
}

pub fn to_pretty_json(cfg: &RunConfig) -> String {
    let mut s = serde_json::to_string_pretty(cfg).expect("config serializes");
    s.push('\n');
    s
}

fn model_dim(m: &ModelBlock) -> usize {
    match m {
        ModelBlock::LinearInteraction { a, .. } => a.len(),
        ModelBlock::GradientPotential { sigma0, .. } => sigma0.len(),
    }
}

fn matrix(field: &str, rows: &Matrix) -> Result<DMatrix<f64>, ConfigError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(ConfigError::at(field, "matrix must be a non-empty list of equally long rows"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn core<T>(field: &str, r: meanfield_core::Result<T>) -> Result<T, ConfigError> {
    r.map_err(|e| ConfigError::at(field, e))
}

impl RunConfig {
    pub fn build_model(&self) -> Result<CoefficientModel, ConfigError> {
        let (family, l) = match &self.model {
            ModelBlock::LinearInteraction {
                a,
                b,
                c,
                sigma0,
                sigma1,
                mean_gain,
                declared_l,
            } => {
                let sigma0 = matrix("model.sigma0", sigma0)?;
                let sigma1 = match sigma1 {
                    Some(s) => matrix("model.sigma1", s)?,
                    None => DMatrix::zeros(sigma0.nrows(), sigma0.ncols()),
                };
                (
                    Family::LinearInteraction(LinearInteraction {
                        a: matrix("model.a", a)?,
                        b: matrix("model.b", b)?,
                        c: DVector::from_vec(c.clone()),
                        sigma0,
                        sigma1,
                        mean_gain: *mean_gain,
                    }),
                    *declared_l,
                )
            }
            ModelBlock::GradientPotential {
                potential,
                kappa,
                sigma0,
                declared_l,
            } => (
                Family::GradientPotential(GradientPotential {
                    potential: *potential,
                    kappa: *kappa,
                    sigma0: matrix("model.sigma0", sigma0)?,
                }),
                *declared_l,
            ),
        };
        core("model", CoefficientModel::new(family, l))
    }

    /// `None` for explicit point clouds, which have no size-indexed family.
    pub fn init_family(&self) -> Option<InitFamily> {
        match &self.init {
            InitBlock::Points { .. } => None,
            InitBlock::Dirac { at } => Some(InitFamily::Dirac(at.clone())),
            InitBlock::NormalQuantiles { mean, std } => Some(InitFamily::NormalQuantiles {
                mean: *mean,
                std: *std,
            }),
            InitBlock::SampledNormal { mean, std, seed } => Some(InitFamily::SampledNormal {
                mean: mean.clone(),
                std: *std,
                seed: *seed,
            }),
        }
    }

    /// Initial ensemble with `n` particles; point clouds ignore `n`.
    pub fn build_init(&self, n: usize, d: usize) -> Result<InitialEnsemble, ConfigError> {
        let init = match (&self.init, self.init_family()) {
            (InitBlock::Points { dim, points }, _) => core(
                "init.points",
                InitialEnsemble::from_points(*dim, points.clone(), "config points"),
            )?,
            (_, Some(f)) => core("init", f.build(n))?,
            (_, None) => unreachable!("non-point init has a family"),
        };
        if init.dim() != d {
            return Err(ConfigError::at(
                "init",
                format!("initial points have dimension {}, model has {d}", init.dim()),
            ));
        }
        Ok(init)
    }

    pub fn sim_config(&self) -> Result<SimConfig, ConfigError> {
        let s = &self.sim;
        let mut cfg = SimConfig::new(s.n, s.t_end, s.steps, s.epsilon)
            .with_seed(s.master_seed)
            .with_replica(s.replica_index);
        if let Some(alpha) = s.alpha {
            cfg = cfg.with_power_law(alpha);
        }
        core("sim", cfg.validate())?;
        Ok(cfg)
    }

    pub fn mode_grid(&self, d: usize) -> Result<ModeGrid, ConfigError> {
        let c = &self.currents;
        let t = self.sim.t_end;
        let grid = ModeGrid {
            d,
            n_max: c.n_max,
            xi_max: c.xi_max,
            xi_points: c.xi_points,
            a: c.a.unwrap_or(-t / 4.0),
            b: c.b.unwrap_or(5.0 * t / 4.0),
        };
        core("currents", grid.validate(t))?;
        Ok(grid)
    }

    pub fn sobolev(&self, d: usize) -> Result<SobolevIndex, ConfigError> {
        let s = SobolevIndex {
            s1: self.currents.s1,
            s2: self.currents.s2.unwrap_or(d as f64 / 2.0 + 1.25),
        };
        core("currents.s1", s.validate(d))?;
        Ok(s)
    }

    pub fn rate_options(&self) -> RateOptions {
        let r = &self.rate;
        RateOptions {
            bins: r.bins,
            lambda0: r.lambda0,
            lambda_factor: r.lambda_factor,
            restarts: r.restarts,
            fd_step: r.fd_step,
            learning_rate: r.learning_rate,
            max_iterations: r.max_iterations,
            tolerance: r.tolerance,
            residual_tolerance: r.residual_tolerance,
        }
    }

    pub fn rate_targets(&self, d: usize) -> Result<Vec<RateTarget>, ConfigError> {
        if self.rate.targets.is_empty() {
            return Err(ConfigError::at("rate.targets", "at least one target is required"));
        }
        self.rate
            .targets
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let field = format!("rate.targets.{i}");
                match t {
                    TargetBlock::TerminalMean(m) => {
                        if m.len() != d {
                            return Err(ConfigError::at(
                                field,
                                format!("target mean has {} entries, model dimension is {d}", m.len()),
                            ));
                        }
                        Ok(RateTarget::TerminalMean(m.clone()))
                    }
                    TargetBlock::TerminalPairing { phi, value } => Ok(RateTarget::TerminalPairing {
                        phi: test_function(&format!("{field}.phi"), phi, d)?,
                        value: *value,
                    }),
                }
            })
            .collect()
    }

    pub fn functional(&self, d: usize) -> Result<LaplaceFunctional, ConfigError> {
        let f = match &self.laplace.functional {
            FunctionalBlock::TanhOfMean { w, q, kappa } => LaplaceFunctional::TanhOfMean {
                w: w.clone(),
                q: *q,
                kappa: *kappa,
            },
            FunctionalBlock::TanhOfCurrentPairing { phi, q, kappa } => {
                LaplaceFunctional::TanhOfCurrentPairing {
                    phi: test_function("laplace.functional.phi", phi, d)?,
                    q: *q,
                    kappa: *kappa,
                }
            }
            FunctionalBlock::Constant { value } => LaplaceFunctional::Constant(*value),
        };
        core("laplace.functional", f.validate(d))?;
        Ok(f)
    }

    pub fn scan_schedule(&self) -> ScanSchedule {
        let s = &self.laplace.scan;
        ScanSchedule {
            ns: s.ns.clone(),
            alpha: s.alpha,
            replicas: s.replicas,
            steps: s.steps,
            t_end: s.t_end,
            master_seed: self.sim.master_seed,
        }
    }
}

fn window(field: &str, w: &Option<WindowBlock>) -> Result<Option<TimeWindow>, ConfigError> {
    w.as_ref()
        .map(|w| core(field, TimeWindow::new(w.start, w.plateau_start, w.plateau_end, w.end)))
        .transpose()
}

pub fn test_function(field: &str, b: &TestFunctionBlock, d: usize) -> Result<TestFunctionSpec, ConfigError> {
    let spec = match b {
        TestFunctionBlock::GaussianBump {
            t0,
            x0,
            width_t,
            width_x,
            k,
            window: w,
        } => TestFunctionSpec::gaussian_bump(
            *t0,
            x0.clone(),
            *width_t,
            *width_x,
            *k,
            window(&format!("{field}.window"), w)?,
        ),
        TestFunctionBlock::SingleMode { n, xi, k, phase, a, b } => {
            let phase = match phase {
                PhaseBlock::Cos => Phase::Cos,
                PhaseBlock::Sin => Phase::Sin,
            };
            TestFunctionSpec::single_mode(*n, xi.clone(), *k, phase, *a, *b)
        }
        TestFunctionBlock::Polynomial { terms, k, window: w } => {
            TestFunctionSpec::polynomial(terms.clone(), *k, window(&format!("{field}.window"), w)?)
        }
    };
    core(field, spec.validate(d))?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_resolves_to_defaults() {
        let cfg = load_str("{}", &[]).unwrap();
        assert_eq!(cfg.currents.a, Some(-0.25));
        assert_eq!(cfg.currents.s2, Some(1.75));
        assert_eq!(cfg, resolve(RunConfig::default()));
    }

    #[test]
    fn unknown_field_is_reported_with_path_and_line() {
        let err = load_str("{\n  \"sim\": {\n    \"n\": 8,\n    \"stepz\": 3\n  }\n}", &[]).unwrap_err();
        assert_eq!(err.line, Some(4));
        assert!(err.field.starts_with("sim"), "{err}");
        assert!(err.message.contains("stepz"), "{err}");
    }

    #[test]
    fn wrong_type_carries_field_path() {
        let err = load_str("{\"sim\": {\"steps\": \"many\"}}", &[]).unwrap_err();
        assert_eq!(err.field, "sim.steps");
    }

    #[test]
    fn overrides_set_nested_and_indexed_values() {
        let cfg = load_str(
            "{\"rate\": {\"targets\": [{\"terminalMean\": [1.0]}]}}",
            &[
                "sim.n=16".into(),
                "rate.targets.0={\"terminalMean\":[2.5]}".into(),
                "output=runs/a".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.sim.n, 16);
        assert_eq!(cfg.rate.targets, vec![TargetBlock::TerminalMean(vec![2.5])]);
        assert_eq!(cfg.output, "runs/a");
    }

    #[test]
    fn bad_override_is_rejected() {
        assert!(load_str("{}", &["sim.n".into()]).is_err());
        let err = load_str("{}", &["sim.bogus=1".into()]).unwrap_err();
        assert!(err.message.contains("bogus"));
    }

    #[test]
    fn seed_environment_overrides_config() {
        let mut cfg = RunConfig::default();
        assert_eq!(apply_seed_env(&mut cfg, Some("99")).unwrap(), SeedSource::Environment);
        assert_eq!(cfg.sim.master_seed, 99);
        assert!(apply_seed_env(&mut cfg, Some("x")).is_err());
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let cfg = load_str("{\"currents\": {\"s1\": 1.5}}", &[]).unwrap();
        assert_eq!(cfg.sobolev(1).unwrap_err().field, "currents.s1");
        let cfg = load_str("{\"model\": {\"family\": \"linearInteraction\", \"a\": [[1, 2]], \"b\": [[1]], \"c\": [0], \"sigma0\": [[1]], \"declaredL\": 2}}", &[]).unwrap();
        assert_eq!(cfg.build_model().unwrap_err().field, "model");
    }
}
