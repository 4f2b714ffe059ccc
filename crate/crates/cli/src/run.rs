//! Pipelines behind each subcommand and the artifacts they leave behind.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use meanfield_core::currents::{
    current_distance, current_fourier_coefficients_capped, current_pairing_ito_corrected,
    current_pairing_stratonovich, dual_pseudo_norm, TestKind,
};
use meanfield_core::io::{write_coefficients, write_path_dump};
use meanfield_core::laplace::{
    laplace_naive, ldp_scaling_scan, optimize_functional_control, variational_bound, McEstimate,
};
use meanfield_core::model::{validate_model, wasserstein1, W1Method};
use meanfield_core::rate::{optimize_rate, RateResult};
use meanfield_core::simulator::{moment_diagnostics, simulate, ControlSpec};
use meanfield_core::vlasov::{
    limit_current_coefficients, solve_limit_flow, standard_bump_battery, vlasov_residual, VelocityField,
};
use meanfield_core::Error as CoreError;
use serde_json::json;

use crate::config::{self, apply_seed_env, ConfigError, ControlChoice, RunConfig, SeedSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pipeline {
    Simulate,
    Limit,
    Current,
    Rate,
    Laplace,
    Scan,
    Validate,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Simulate => "simulate",
            Pipeline::Limit => "limit",
            Pipeline::Current => "current",
            Pipeline::Rate => "rate",
            Pipeline::Laplace => "laplace",
            Pipeline::Scan => "scan",
            Pipeline::Validate => "validate",
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

/// Everything one run needs besides the process environment.
#[derive(Clone, Debug, Default)]
pub struct Invocation {
    pub config: Option<PathBuf>,
    pub overrides: Vec<String>,
    /// Replaces `output` from the config.
    pub out_dir: Option<PathBuf>,
    /// Value of the seed environment variable, if set.
    pub seed_env: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub code: i32,
    pub message: String,
    pub out_dir: Option<PathBuf>,
    pub artifacts: Vec<String>,
}

#[derive(Debug)]
enum Failure {
    Config(ConfigError),
    Core { field: &'static str, err: CoreError },
    NotConverged(String),
    Io(std::io::Error),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_VALIDATION,
            Failure::Core { err, .. } => match err {
                CoreError::InvalidInput(_)
                | CoreError::DimensionMismatch { .. }
                | CoreError::ModelValidation(_)
                | CoreError::MemoryCap { .. } => EXIT_VALIDATION,
                CoreError::Diverged { .. } => EXIT_DIVERGED,
                _ => EXIT_FAILURE,
            },
            Failure::NotConverged(_) => EXIT_NOT_CONVERGED,
            Failure::Io(_) => EXIT_FAILURE,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(e) => format!("config error at {e}"),
            Failure::Core { field, err } => format!("`{field}`: {err}"),
            Failure::NotConverged(m) => m.clone(),
            Failure::Io(e) => format!("i/o error: {e}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

fn at<T>(field: &'static str, r: meanfield_core::Result<T>) -> Result<T, Failure> {
    r.map_err(|err| Failure::Core { field, err })
}

struct Artifacts {
    dir: PathBuf,
    names: Vec<String>,
}

impl Artifacts {
    fn path(&mut self, name: &str) -> PathBuf {
        self.names.push(name.to_string());
        self.dir.join(name)
    }

    fn text(&mut self, name: &str, content: &str) -> Result<(), Failure> {
        let p = self.path(name);
        fs::write(p, content)?;
        Ok(())
    }

    fn dump_names(&mut self, name: &str) -> PathBuf {
        let p = self.path(name);
        self.names.push(format!("{name}.hdr"));
        p
    }
}

/// Resolve the config, run `pipeline` on a pool of the configured size and
/// write `resolved-config.json` and `run-manifest.json` next to the outputs.
pub fn execute(pipeline: Pipeline, inv: &Invocation) -> Outcome {
    let started = Instant::now();
    let loaded = match &inv.config {
        Some(p) => config::load_file(p, &inv.overrides),
        None => config::load_str("{}", &inv.overrides),
    };
    let mut cfg = match loaded {
        Ok(c) => c,
        Err(e) => return early(Failure::Config(e)),
    };
    let seed_source = match apply_seed_env(&mut cfg, inv.seed_env.as_deref()) {
        Ok(s) => s,
        Err(e) => return early(Failure::Config(e)),
    };
    if let Some(dir) = &inv.out_dir {
        cfg.output = dir.to_string_lossy().into_owned();
    }
    let dir = PathBuf::from(&cfg.output);
    if let Err(e) = fs::create_dir_all(&dir) {
        return early(Failure::Io(e));
    }
    let mut arts = Artifacts {
        dir: dir.clone(),
        names: Vec::new(),
    };
    if let Err(f) = arts.text("resolved-config.json", &config::to_pretty_json(&cfg)) {
        return early(f);
    }

    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build() {
        Ok(p) => p,
        Err(e) => return early(Failure::Config(ConfigError::at("threads", e))),
    };
    let threads = pool.current_num_threads();
    let result = pool.install(|| match pipeline {
        Pipeline::Simulate => run_simulate(&cfg, &mut arts),
        Pipeline::Limit => run_limit(&cfg, &mut arts),
        Pipeline::Current => run_current(&cfg, &mut arts),
        Pipeline::Rate => run_rate(&cfg, &mut arts),
        Pipeline::Laplace => run_laplace(&cfg, &mut arts),
        Pipeline::Scan => run_scan(&cfg, &mut arts),
        Pipeline::Validate => run_validate(&cfg, &mut arts),
    });
    let (code, message) = match result {
        Ok(msg) => (EXIT_OK, msg),
        Err(f) => (f.code(), f.message()),
    };
    let mut artifacts = arts.names.clone();
    artifacts.push("run-manifest.json".into());
    let manifest = json!({
        "subcommand": pipeline.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": inv.config.as_ref().map(|p| p.display().to_string()),
        "overrides": inv.overrides,
        "masterSeed": cfg.sim.master_seed,
        "seedSource": seed_source.as_str(),
        "replicaIndex": cfg.sim.replica_index,
        "validateSeed": cfg.validate.seed,
        "threads": threads,
        "wallSeconds": started.elapsed().as_secs_f64(),
        "exitCode": code,
        "message": message,
        "artifacts": artifacts,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    if let Err(e) = fs::write(dir.join("run-manifest.json"), text) {
        return early(Failure::Io(e));
    }
    if seed_source == SeedSource::Environment {
        log::info!("master seed {} taken from {}", cfg.sim.master_seed, config::SEED_ENV);
    }
    Outcome {
        code,
        message,
        out_dir: Some(dir),
        artifacts,
    }
}

fn early(f: Failure) -> Outcome {
    Outcome {
        code: f.code(),
        message: f.message(),
        out_dir: None,
        artifacts: Vec::new(),
    }
}

fn marginals_csv(d: usize, times: impl Iterator<Item = (f64, Vec<f64>)>) -> String {
    let mut out = String::from("step,time");
    for k in 0..d {
        write!(out, ",mean_{k}").unwrap();
    }
    out.push_str(",secondMoment\n");
    for (i, (t, pos)) in times.enumerate() {
        let n = (pos.len() / d) as f64;
        write!(out, "{i},{t:e}").unwrap();
        for k in 0..d {
            let m: f64 = pos.iter().skip(k).step_by(d).sum::<f64>() / n;
            write!(out, ",{m:e}").unwrap();
        }
        let sq: f64 = pos.iter().map(|x| x * x).sum::<f64>() / n;
        writeln!(out, ",{sq:e}").unwrap();
    }
    out
}

fn run_simulate(cfg: &RunConfig, arts: &mut Artifacts) -> Result<String, Failure> {
    let model = cfg.build_model()?;
    let sim = cfg.sim_config()?;
    let init = cfg.build_init(sim.n, model.dim())?;
    let ens = at("sim", simulate(&model, &init, &sim))?;
    at("output", write_path_dump(&arts.dump_names("paths.bin"), &ens))?;
    let csv = marginals_csv(
        ens.dim(),
        (0..=ens.steps()).map(|i| (ens.time(i), ens.positions_at(i))),
    );
    arts.text("marginals.csv", &csv)?;
    let m = at("sim", moment_diagnostics(&ens))?;
    arts.text(
        "moments.csv",
        &format!(
            "supSecondMoment,controlEnergy,initialSecondMoment,constant,bound,violated\n{:e},{:e},{:e},{:e},{:e},{}\n",
            m.sup_second_moment, m.control_energy, m.initial_second_moment, m.constant, m.bound, m.violated
        ),
    )?;
    Ok(format!(
        "simulated {} particles over {} steps at epsilon {:e}",
        ens.particles(),
        ens.steps(),
        ens.epsilon()
    ))
}

fn bump_label(kind: &TestKind) -> (f64, f64) {
    match kind {
        TestKind::GaussianBump { t0, x0, .. } => (*t0, x0[0]),
        _ => (f64::NAN, f64::NAN),
    }
}

fn run_limit(cfg: &RunConfig, arts: &mut Artifacts) -> Result<String, Failure> {
    let model = cfg.build_model()?;
    let d = model.dim();
    let (t_end, steps) = (cfg.sim.t_end, cfg.sim.steps);
    let init = cfg.build_init(cfg.sim.n, d)?;
    let grid = cfg.mode_grid(d)?;
    let s = cfg.sobolev(d)?;
    let flow = at("sim", solve_limit_flow(&model, &init, t_end, steps))?;
    let paths = at("sim", flow.to_path_ensemble())?;
    at("output", write_path_dump(&arts.dump_names("limit-paths.bin"), &paths))?;
    let csv = marginals_csv(d, (0..=steps).map(|i| (flow.time(i), flow.positions_at(i))));
    arts.text("limit-marginals.csv", &csv)?;

    let cur = at("currents", limit_current_coefficients(&flow, &grid))?;
    at("output", write_coefficients(&arts.dump_names("limit-coefficients.bin"), &cur, s))?;
    let battery = standard_bump_battery(d, t_end);
    let report = at("sim", vlasov_residual(&flow, &VelocityField::MeanField, &battery))?;
    let mut csv = String::from("test,t0,x0,residual\n");
    for (i, (phi, r)) in battery.iter().zip(&report.residuals).enumerate() {
        let (t0, x0) = bump_label(&phi.kind);
        writeln!(csv, "{i},{t0:e},{x0:e},{r:e}").unwrap();
    }
    arts.text("residual.csv", &csv)?;
    let norm = at("currents", dual_pseudo_norm(&cur, s))?;
    arts.text(
        "limit.csv",
        &format!(
            "particles,steps,dualNorm,maxResidual\n{},{},{norm:e},{:e}\n",
            flow.particles(),
            steps,
            report.max_abs
        ),
    )?;
    Ok(format!("limit flow solved; max residual {:e}", report.max_abs))
}

fn method_label(m: W1Method) -> String {
    match m {
        W1Method::Exact1d => "exact1d".into(),
        W1Method::Assignment => "assignment".into(),
        W1Method::Sliced { projections, seed } => format!("sliced:{projections}:{seed}"),
    }
}

fn run_current(cfg: &RunConfig, arts: &mut Artifacts) -> Result<String, Failure> {
    let model = cfg.build_model()?;
    let d = model.dim();
    let sim = cfg.sim_config()?;
    let init = cfg.build_init(sim.n, d)?;
    let grid = cfg.mode_grid(d)?;
    let s = cfg.sobolev(d)?;
    let ens = at("sim", simulate(&model, &init, &sim))?;
    let cur = at(
        "currents",
        current_fourier_coefficients_capped(&ens, &grid, cfg.currents.memory_cap_bytes),
    )?;
    at("output", write_coefficients(&arts.dump_names("coefficients.bin"), &cur, s))?;
    let flow = at("sim", solve_limit_flow(&model, &init, sim.t_end, sim.steps))?;
    let limit = at("currents", limit_current_coefficients(&flow, &grid))?;
    let norm = at("currents", dual_pseudo_norm(&cur, s))?;
    let limit_norm = at("currents", dual_pseudo_norm(&limit, s))?;
    let dist = at("currents", current_distance(&cur, &limit, s))?;
    let w1 = at(
        "sim",
        wasserstein1(
            &at("sim", ens.time_marginal(ens.steps()))?,
            &at("sim", flow.marginal(sim.steps))?,
        ),
    )?;
    arts.text(
        "current.csv",
        &format!(
            "provenance,dualNorm,limitDualNorm,distance,conjugateDefect,terminalW1,w1Method\n{},{norm:e},{limit_norm:e},{dist:e},{:e},{:e},{}\n",
            cur.provenance.as_str(),
            cur.conjugate_symmetry_defect(),
            w1.value,
            method_label(w1.method)
        ),
    )?;
    let mut csv = String::from("test,t0,x0,stratonovich,itoCorrected\n");
    for (i, phi) in standard_bump_battery(d, sim.t_end).iter().enumerate() {
        let (t0, x0) = bump_label(&phi.kind);
        let strat = at("currents", current_pairing_stratonovich(&ens, phi))?;
        let ito = at("currents", current_pairing_ito_corrected(&ens, phi))?;
        writeln!(csv, "{i},{t0:e},{x0:e},{strat:e},{ito:e}").unwrap();
    }
    arts.text("pairings.csv", &csv)?;
    Ok(format!("current distance to the limit {dist:e}"))
}

fn run_rate(cfg: &RunConfig, arts: &mut Artifacts) -> Result<String, Failure> {
    let model = cfg.build_model()?;
    let d = model.dim();
    let init = cfg.build_init(cfg.rate.particles, d)?;
    let targets = cfg.rate_targets(d)?;
    let opts = cfg.rate_options();
    let mut csv = format!("{}\n", RateResult::CSV_HEADER);
    let mut stalled = Vec::new();
    for target in &targets {
        let r = at("rate", optimize_rate(&model, &init, cfg.sim.t_end, cfg.sim.steps, target, &opts))?;
        csv.push_str(&r.csv_row());
        csv.push('\n');
        if !r.converged {
            stalled.push(format!("{} (residual {:e})", r.target, r.constraint_residual));
        }
    }
    arts.text("rate.csv", &csv)?;
    if stalled.is_empty() {
        Ok(format!("{} rate target(s) converged", targets.len()))
    } else {
        Err(Failure::NotConverged(format!(
            "rate optimizer did not meet the constraint for {}",
            stalled.join(", ")
        )))
    }
}

fn estimate_row(out: &mut String, est: &McEstimate, n: usize, eps: f64, kind: &str, control: &str) {
    writeln!(
        out,
        "{n},{eps:e},{:e},{kind},{control},{:e},{:e},{},{}",
        est.a_n, est.value, est.std_error, est.replicas, est.master_seed
    )
    .unwrap();
}

fn run_laplace(cfg: &RunConfig, arts: &mut Artifacts) -> Result<String, Failure> {
    let model = cfg.build_model()?;
    let d = model.dim();
    let sim = cfg.sim_config()?;
    let init = cfg.build_init(sim.n, d)?;
    let f = cfg.functional(d)?;
    let r = cfg.laplace.replicas;
    let eps = sim.noise_level();
    let mut csv = String::from("N,epsilon,aN,estimator,control,value,stdError,replicas,seed\n");
    let naive = at("laplace", laplace_naive(&model, &init, &sim, &f, r))?;
    estimate_row(&mut csv, &naive, sim.n, eps, "laplace", "none");
    let zero = at("laplace", variational_bound(&model, &init, &sim, &f, &ControlSpec::None, r))?;
    estimate_row(&mut csv, &zero, sim.n, eps, "bound", "zero");
    if cfg.laplace.control == ControlChoice::Optimized {
        let limit_init = cfg.build_init(cfg.rate.particles, d)?;
        let opt = at(
            "rate",
            optimize_functional_control(&model, &limit_init, sim.t_end, sim.steps, &f, &cfg.rate_options()),
        )?;
        if let Some(opt) = opt {
            let b = at("laplace", variational_bound(&model, &init, &sim, &f, &opt.control_spec(), r))?;
            estimate_row(&mut csv, &b, sim.n, eps, "bound", "optimized");
        }
    }
    arts.text("laplace.csv", &csv)?;
    Ok(format!("laplace estimate {:e} +- {:e}", naive.value, naive.std_error))
}

fn run_scan(cfg: &RunConfig, arts: &mut Artifacts) -> Result<String, Failure> {
    let model = cfg.build_model()?;
    let d = model.dim();
    let family = cfg
        .init_family()
        .ok_or_else(|| ConfigError::at("init.kind", "scans need a size-indexed initial family, not explicit points"))?;
    cfg.build_init(cfg.laplace.scan.control_particles, d)?;
    let f = cfg.functional(d)?;
    let report = at(
        "laplace.scan",
        ldp_scaling_scan(
            &model,
            &family,
            &f,
            &cfg.scan_schedule(),
            &cfg.rate_options(),
            cfg.laplace.scan.control_particles,
        ),
    )?;
    arts.text("scan.csv", &report.to_csv())?;
    if let Some(opt) = &report.optimized {
        arts.text(
            "scan-control.csv",
            &format!("{}\n{}\n", RateResult::CSV_HEADER, opt.csv_row()),
        )?;
    }
    if !report.all_hold() {
        log::warn!("some scan rows violate the variational inequalities");
    }
    Ok(format!(
        "{} scan rows, inequalities hold: {}, Kendall tau {:e}",
        report.rows.len(),
        report.all_hold(),
        report.kendall_tau
    ))
}

fn run_validate(cfg: &RunConfig, arts: &mut Artifacts) -> Result<String, Failure> {
    let model = cfg.build_model()?;
    let d = model.dim();
    let sim = cfg.sim_config()?;
    cfg.build_init(sim.n, d)?;
    cfg.mode_grid(d)?;
    cfg.sobolev(d)?;
    cfg.rate_targets(d)?;
    cfg.functional(d)?;
    let v = &cfg.validate;
    let report = match validate_model(&model, v.probe_count, v.seed, v.probe_radius) {
        Ok(r) => r,
        Err(CoreError::ModelValidation(r)) => {
            arts.text("validation-report.txt", &format!("config = ok\n{r}"))?;
            return Err(Failure::Core {
                field: "model.declaredL",
                err: CoreError::ModelValidation(r),
            });
        }
        Err(err) => return Err(Failure::Core { field: "validate", err }),
    };
    arts.text("validation-report.txt", &format!("config = ok\n{report}"))?;
    Ok(format!("model validated: {}", report.summary()))
}

/// Read a CSV artifact of a finished run.
pub fn read_artifact(dir: &Path, name: &str) -> std::io::Result<String> {
    fs::read_to_string(dir.join(name))
}
