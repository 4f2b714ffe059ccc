use std::f64::consts::TAU;

use num_complex::Complex64;

use super::{CurrentCoefficients, ModeGrid, Provenance};
use crate::error::{Error, Result};
use crate::par;
use crate::simulator::PathEnsemble;

/// Default ceiling on the coefficient array plus scratch, in bytes.
pub const DEFAULT_MEMORY_CAP: usize = 256 << 20;

/// Weighted samples `(t_p, x_{p,j}, v_{p,j})` whose current is
/// `Σ_p w_p (1/K) Σ_j e_{n,ξ}(t_p, x_{p,j}) v_{p,j}`.
#[derive(Clone, Debug)]
pub struct CoefficientInput<'a> {
    pub d: usize,
    pub particles: usize,
    pub times: &'a [f64],
    pub weights: &'a [f64],
    /// Flat `(p, j, coordinate)`.
    pub positions: &'a [f64],
    /// Flat `(p, j, coordinate)`.
    pub vectors: &'a [f64],
}

fn required_bytes(grid: &ModeGrid, nodes: usize) -> usize {
    let complex = std::mem::size_of::<Complex64>();
    grid.len() * complex + nodes * grid.d * complex * grid.space_modes().min(64)
}

fn check_cap(grid: &ModeGrid, nodes: usize, cap: usize) -> Result<()> {
    let required = required_bytes(grid, nodes);
    if required > cap {
        return Err(Error::MemoryCap {
            required_bytes: required,
            cap_bytes: cap,
            components: grid.d,
            time_modes: grid.time_modes(),
            space_modes: grid.space_modes(),
        });
    }
    Ok(())
}

pub(crate) fn accumulate_coefficients(
    grid: &ModeGrid,
    input: &CoefficientInput<'_>,
    provenance: Provenance,
    cap: usize,
) -> Result<CurrentCoefficients> {
    let d = grid.d;
    let k_count = input.particles;
    let nodes = input.times.len();
    Error::check_dim("coefficient weights", nodes, input.weights.len())?;
    Error::check_dim("coefficient positions", nodes * k_count * d, input.positions.len())?;
    Error::check_dim("coefficient vectors", nodes * k_count * d, input.vectors.len())?;
    check_cap(grid, nodes, cap)?;
    if input
        .positions
        .iter()
        .chain(input.vectors)
        .chain(input.times)
        .any(|v| !v.is_finite())
    {
        return Err(Error::invalid("non-finite path data in current accumulation"));
    }

    let period = grid.period();
    let scale = 1.0 / (period * k_count.max(1) as f64);
    let n_max = grid.n_max as i64;
    let time_modes = grid.time_modes();

    // one column per ξ point: for each node, Σ_j S_ξ(x) v  (d values)
    let columns: Vec<Vec<Complex64>> = par::map_indexed(grid.space_modes(), |q| {
        let xi = grid.xi(q);
        let mut inner = vec![Complex64::new(0.0, 0.0); nodes * d];
        for p in 0..nodes {
            let acc = &mut inner[p * d..(p + 1) * d];
            for j in 0..k_count {
                let o = (p * k_count + j) * d;
                let x = &input.positions[o..o + d];
                let phase: f64 = xi.iter().zip(x).map(|(a, b)| a * b).sum();
                let s = Complex64::cis(TAU * phase);
                for (a, v) in acc.iter_mut().zip(&input.vectors[o..o + d]) {
                    *a += s * *v;
                }
            }
        }
        let mut col = vec![Complex64::new(0.0, 0.0); d * time_modes];
        for p in 0..nodes {
            let w = input.weights[p] * scale;
            if w == 0.0 {
                continue;
            }
            let t = input.times[p];
            for n in -n_max..=n_max {
                let e = Complex64::cis(TAU * n as f64 * t / period) * w;
                let ni = (n + n_max) as usize;
                for k in 0..d {
                    col[k * time_modes + ni] += e * inner[p * d + k];
                }
            }
        }
        col
    });

    let mut out = CurrentCoefficients::zeros(grid.clone(), provenance);
    for (q, col) in columns.iter().enumerate() {
        for k in 0..d {
            for n in -n_max..=n_max {
                let ni = (n + n_max) as usize;
                out.coeffs[grid.index(k, n, q)] = col[k * time_modes + ni];
            }
        }
    }
    Ok(out)
}

/// Midpoint (Stratonovich) Fourier coefficients of the current of a path
/// ensemble.
pub fn current_fourier_coefficients(
    ens: &PathEnsemble,
    grid: &ModeGrid,
) -> Result<CurrentCoefficients> {
    current_fourier_coefficients_capped(ens, grid, DEFAULT_MEMORY_CAP)
}

pub fn current_fourier_coefficients_capped(
    ens: &PathEnsemble,
    grid: &ModeGrid,
    cap: usize,
) -> Result<CurrentCoefficients> {
    grid.validate(ens.t_end())?;
    Error::check_dim("mode grid dimension", ens.dim(), grid.d)?;
    check_cap(grid, ens.steps(), cap)?;
    let (d, n, steps) = (ens.dim(), ens.particles(), ens.steps());
    let dt = ens.dt();
    let times: Vec<f64> = (0..steps).map(|i| (i as f64 + 0.5) * dt).collect();
    let weights = vec![1.0; steps];
    let mut positions = vec![0.0; steps * n * d];
    let mut vectors = vec![0.0; steps * n * d];
    for i in 0..steps {
        for j in 0..n {
            let (x0, x1) = (ens.state(j, i), ens.state(j, i + 1));
            let o = (i * n + j) * d;
            for l in 0..d {
                positions[o + l] = 0.5 * (x0[l] + x1[l]);
                vectors[o + l] = x1[l] - x0[l];
            }
        }
    }
    let provenance = if ens.controls().iter().any(|u| *u != 0.0) {
        Provenance::Controlled
    } else {
        Provenance::Stochastic
    };
    let input = CoefficientInput {
        d,
        particles: n,
        times: &times,
        weights: &weights,
        positions: &positions,
        vectors: &vectors,
    };
    accumulate_coefficients(grid, &input, provenance, cap)
}
