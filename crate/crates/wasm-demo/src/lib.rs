//! Browser bindings for three small `meanfield-core` operations on the
//! one-dimensional linear interaction model `b(x, μ) = a x + b m(μ)` with unit
//! noise. The plain functions are usable natively; the `#[wasm_bindgen]`
//! wrappers only convert errors.

use meanfield_core::model::{wasserstein1, CoefficientModel, InitialEnsemble};
use meanfield_core::rate::{optimize_rate, RateOptions, RateTarget};
use meanfield_core::simulator::{simulate, SimConfig};
use meanfield_core::Result;
use wasm_bindgen::prelude::*;

const INIT_MEAN: f64 = 0.5;
const INIT_STD: f64 = 1.0;

fn model(a: f64, b: f64) -> Result<CoefficientModel> {
    CoefficientModel::linear_1d(a, b, 0.0, 1.0, a.abs() + b.abs() + 1.0)
}

/// Particle paths from normal-quantile initial points, flat `(particle, step)`.
pub fn particle_paths(
    a: f64,
    b: f64,
    epsilon: f64,
    particles: usize,
    steps: usize,
    t_end: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let init = InitialEnsemble::normal_quantiles(particles, INIT_MEAN, INIT_STD)?;
    let cfg = SimConfig::new(particles, t_end, steps, epsilon).with_seed(seed);
    Ok(simulate(&model(a, b)?, &init, &cfg)?.states().to_vec())
}

/// W1 between the noisy terminal marginal and the noiseless one.
pub fn distance_to_limit(
    a: f64,
    b: f64,
    epsilon: f64,
    particles: usize,
    steps: usize,
    t_end: f64,
    seed: u64,
) -> Result<f64> {
    let m = model(a, b)?;
    let init = InitialEnsemble::normal_quantiles(particles, INIT_MEAN, INIT_STD)?;
    let noisy = simulate(&m, &init, &SimConfig::new(particles, t_end, steps, epsilon).with_seed(seed))?;
    let limit = simulate(&m, &init, &SimConfig::new(particles, t_end, steps, 0.0))?;
    Ok(wasserstein1(&noisy.time_marginal(steps)?, &limit.time_marginal(steps)?)?.value)
}

/// Minimal control energy steering the terminal mean to `target`:
/// `[costI, iterations, converged]`.
pub fn mean_rate(a: f64, b: f64, target: f64, particles: usize, steps: usize, t_end: f64) -> Result<Vec<f64>> {
    let init = InitialEnsemble::normal_quantiles(particles, INIT_MEAN, INIT_STD)?;
    let r = optimize_rate(
        &model(a, b)?,
        &init,
        t_end,
        steps,
        &RateTarget::TerminalMean(vec![target]),
        &RateOptions::default(),
    )?;
    Ok(vec![r.cost_i, r.iterations as f64, if r.converged { 1.0 } else { 0.0 }])
}

fn js<T>(r: Result<T>) -> std::result::Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = particlePaths)]
pub fn particle_paths_js(
    a: f64,
    b: f64,
    epsilon: f64,
    particles: usize,
    steps: usize,
    t_end: f64,
    seed: u32,
) -> std::result::Result<Vec<f64>, JsError> {
    js(particle_paths(a, b, epsilon, particles, steps, t_end, seed.into()))
}

#[wasm_bindgen(js_name = distanceToLimit)]
pub fn distance_to_limit_js(
    a: f64,
    b: f64,
    epsilon: f64,
    particles: usize,
    steps: usize,
    t_end: f64,
    seed: u32,
) -> std::result::Result<f64, JsError> {
    js(distance_to_limit(a, b, epsilon, particles, steps, t_end, seed.into()))
}

#[wasm_bindgen(js_name = meanRate)]
pub fn mean_rate_js(
    a: f64,
    b: f64,
    target: f64,
    particles: usize,
    steps: usize,
    t_end: f64,
) -> std::result::Result<Vec<f64>, JsError> {
    js(mean_rate(a, b, target, particles, steps, t_end))
}
