use std::f64::consts::TAU;

use num_complex::Complex64;

use super::{ModeGrid, SobolevIndex, TestFunctionSpec, TestKind};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormMode {
    /// Weighted `ℓ²` norm of the Fourier coefficients on the mode grid.
    Fourier,
    /// Time Gagliardo seminorm plus `L²` part, spatial norm by Fourier
    /// quadrature; `d = 1` only.
    Gagliardo1d,
}

/// Sampling box and node counts for the quadratures behind
/// [`test_function_sobolev_norm`]. Time always runs over the grid's `(a, b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SobolevQuadrature {
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    pub x_points: usize,
    pub t_points: usize,
}

impl SobolevQuadrature {
    /// Bumps get `center ± 6 width`; other kinds are truncated to `[-4, 4]^d`.
    pub fn for_test_function(phi: &TestFunctionSpec, d: usize) -> Self {
        let (x_lo, x_hi) = match &phi.kind {
            TestKind::GaussianBump { x0, width_x, .. } => (
                x0.iter().map(|c| c - 6.0 * width_x).collect(),
                x0.iter().map(|c| c + 6.0 * width_x).collect(),
            ),
            _ => (vec![-4.0; d], vec![4.0; d]),
        };
        let x_points = match d {
            1 => 257,
            2 => 65,
            _ => 17,
        };
        SobolevQuadrature {
            x_lo,
            x_hi,
            x_points,
            t_points: 257,
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        Error::check_dim("quadrature box", d, self.x_lo.len())?;
        Error::check_dim("quadrature box", d, self.x_hi.len())?;
        if self.x_points < 2 || self.t_points < 3 {
            return Err(Error::invalid("quadrature needs at least 2 space and 3 time nodes"));
        }
        if self.x_lo.iter().zip(&self.x_hi).any(|(a, b)| !(a < b)) {
            return Err(Error::invalid("quadrature box must have lo < hi on every axis"));
        }
        Ok(())
    }

    fn x_node_count(&self) -> usize {
        self.x_points.pow(self.x_lo.len() as u32)
    }

    /// Node and trapezoid weight at flat index `r` (last axis fastest).
    fn x_node(&self, r: usize, x: &mut [f64]) -> f64 {
        let d = x.len();
        let mut rest = r;
        let mut w = 1.0;
        for axis in (0..d).rev() {
            let l = rest % self.x_points;
            rest /= self.x_points;
            let h = (self.x_hi[axis] - self.x_lo[axis]) / (self.x_points - 1) as f64;
            x[axis] = self.x_lo[axis] + l as f64 * h;
            w *= if l == 0 || l == self.x_points - 1 { h / 2.0 } else { h };
        }
        w
    }

    fn t_node(&self, grid: &ModeGrid, p: usize) -> (f64, f64) {
        let h = grid.period() / (self.t_points - 1) as f64;
        let w = if p == 0 || p == self.t_points - 1 { h / 2.0 } else { h };
        (grid.a + p as f64 * h, w)
    }
}

/// Spatial transform `∫ φ(t, x) e^{-2πi ξ·x} dx` on every grid `ξ`, for
/// every time row.
fn spatial_transforms(
    rows: &[Vec<f64>],
    quad: &SobolevQuadrature,
    grid: &ModeGrid,
) -> Vec<Vec<Complex64>> {
    let d = grid.d;
    let mut x = vec![0.0; d];
    let nodes: Vec<(Vec<f64>, f64)> = (0..quad.x_node_count())
        .map(|r| {
            let w = quad.x_node(r, &mut x);
            (x.clone(), w)
        })
        .collect();
    let xis: Vec<Vec<f64>> = (0..grid.space_modes()).map(|q| grid.xi(q)).collect();
    rows.iter()
        .map(|row| {
            xis.iter()
                .map(|xi| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for ((x, w), v) in nodes.iter().zip(row) {
                        if *v == 0.0 {
                            continue;
                        }
                        let ph: f64 = xi.iter().zip(x).map(|(a, b)| a * b).sum();
                        acc += Complex64::cis(-TAU * ph) * (w * v);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// Samples of the profile on the `(time, x)` tensor grid.
fn sample_rows(phi: &TestFunctionSpec, quad: &SobolevQuadrature, grid: &ModeGrid) -> Vec<Vec<f64>> {
    let mut x = vec![0.0; grid.d];
    (0..quad.t_points)
        .map(|p| {
            let (t, _) = quad.t_node(grid, p);
            (0..quad.x_node_count())
                .map(|r| {
                    quad.x_node(r, &mut x);
                    phi.profile(t, &x)
                })
                .collect()
        })
        .collect()
}

fn xi_factors(grid: &ModeGrid, s2: f64) -> Vec<f64> {
    (0..grid.space_modes())
        .map(|q| {
            let r2: f64 = grid.xi(q).iter().map(|v| v * v).sum();
            grid.xi_weight(q) * (1.0 + r2).powf(s2)
        })
        .collect()
}

/// Sobolev norm of a test function, truncated to the mode grid.
pub fn test_function_sobolev_norm(
    phi: &TestFunctionSpec,
    s: SobolevIndex,
    grid: &ModeGrid,
    mode: NormMode,
) -> Result<f64> {
    let quad = SobolevQuadrature::for_test_function(phi, grid.d);
    test_function_sobolev_norm_with(phi, s, grid, mode, &quad)
}

pub fn test_function_sobolev_norm_with(
    phi: &TestFunctionSpec,
    s: SobolevIndex,
    grid: &ModeGrid,
    mode: NormMode,
    quad: &SobolevQuadrature,
) -> Result<f64> {
    let d = grid.d;
    phi.validate(d)?;
    s.validate(d)?;
    quad.validate(d)?;
    if mode == NormMode::Gagliardo1d && d != 1 {
        return Err(Error::invalid(format!(
            "gagliardo1d norm supports d = 1 only, got d = {d}"
        )));
    }
    let rows = sample_rows(phi, quad, grid);
    let spectra = spatial_transforms(&rows, quad, grid);
    let xf = xi_factors(grid, s.s2);
    let period = grid.period();
    let total = match mode {
        NormMode::Fourier => {
            let n_max = grid.n_max as i64;
            let mut total = 0.0;
            for n in -n_max..=n_max {
                let tf = (1.0 + (n * n) as f64).powf(s.s1);
                for (q, f) in xf.iter().enumerate() {
                    let mut c = Complex64::new(0.0, 0.0);
                    for (p, spec) in spectra.iter().enumerate() {
                        let (t, w) = quad.t_node(grid, p);
                        c += Complex64::cis(-TAU * n as f64 * t / period) * spec[q] * w;
                    }
                    c /= period;
                    total += c.norm_sqr() * tf * f;
                }
            }
            total
        }
        NormMode::Gagliardo1d => {
            let sq = |a: &[Complex64], b: Option<&[Complex64]>| -> f64 {
                a.iter()
                    .enumerate()
                    .map(|(q, v)| {
                        let diff = match b {
                            Some(b) => v - b[q],
                            None => *v,
                        };
                        diff.norm_sqr() * xf[q]
                    })
                    .sum()
            };
            let delta = period / (quad.t_points - 1) as f64;
            let mut l2 = 0.0;
            let mut semi = 0.0;
            for p in 0..quad.t_points {
                let (u, wu) = quad.t_node(grid, p);
                l2 += wu * sq(&spectra[p], None);
                for r in 0..quad.t_points {
                    let (v, wv) = quad.t_node(grid, r);
                    let gap = (u - v).abs();
                    if gap < delta * (1.0 - 1e-9) {
                        continue;
                    }
                    semi += wu * wv * sq(&spectra[p], Some(&spectra[r])) / gap.powf(1.0 + 2.0 * s.s1);
                }
            }
            l2 + semi
        }
    };
    Ok(total.sqrt())
}
