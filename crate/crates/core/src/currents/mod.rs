//! Stochastic currents `φ ↦ (1/N) Σ_j ∫ φ(t, X_j) ∘ dX_j`.
//!
//! Currents are represented by their truncated Fourier coefficients on a
//! [`ModeGrid`]: time modes `n ∈ [-n_max, n_max]` on the ambient interval
//! `(a, b) ⊃ [0, T]` and a symmetric tensor grid of frequencies `ξ`. The
//! weighted `ℓ²` norm of the coefficients is a truncated pseudo-norm
//! equivalent (up to support-dependent constants that are never computed)
//! to the negative Sobolev norm; it is only ever compared against itself.

mod coefficients;
mod pairing;
mod sobolev;
mod test_function;

pub use coefficients::{
    current_fourier_coefficients, current_fourier_coefficients_capped, CoefficientInput,
    DEFAULT_MEMORY_CAP,
};
pub(crate) use coefficients::accumulate_coefficients;
pub use pairing::{current_pairing_ito_corrected, current_pairing_stratonovich};
pub use sobolev::{
    test_function_sobolev_norm, test_function_sobolev_norm_with, NormMode, SobolevQuadrature,
};
pub use test_function::{Phase, ProfileJet, TestFunctionSpec, TestKind, TimeWindow};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// `s = (s1, s2)` with `s1 ∈ (1/2, 1)` and `s2 > d/2 + 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SobolevIndex {
    pub s1: f64,
    pub s2: f64,
}

impl SobolevIndex {
    /// `(0.75, d/2 + 1.25)`.
    pub fn default_for(d: usize) -> Self {
        SobolevIndex {
            s1: 0.75,
            s2: d as f64 / 2.0 + 1.25,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let lower = d as f64 / 2.0 + 1.0;
        if !(self.s1 > 0.5 && self.s1 < 1.0) || !(self.s2 > lower) {
            return Err(Error::invalid(format!(
                "Sobolev index ({}, {}) outside (1/2, 1) x ({lower}, inf)",
                self.s1, self.s2
            )));
        }
        Ok(())
    }
}

/// Truncated Fourier mode grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeGrid {
    pub d: usize,
    pub n_max: usize,
    pub xi_max: f64,
    /// Points per axis; odd so that `ξ = 0` is on the grid.
    pub xi_points: usize,
    pub a: f64,
    pub b: f64,
}

impl ModeGrid {
    /// `n_max = 8`, `ξ ∈ [-4, 4]` with 17 points per axis, `(a, b) =
    /// (-T/4, 5T/4)`.
    pub fn default_for(d: usize, t_end: f64) -> Self {
        ModeGrid {
            d,
            n_max: 8,
            xi_max: 4.0,
            xi_points: 17,
            a: -t_end / 4.0,
            b: 5.0 * t_end / 4.0,
        }
    }

    pub fn validate(&self, t_end: f64) -> Result<()> {
        if self.d == 0 {
            return Err(Error::invalid("mode grid dimension must be >= 1"));
        }
        if self.n_max == 0 {
            return Err(Error::invalid("mode grid needs n_max >= 1"));
        }
        if self.xi_points % 2 == 0 || self.xi_points < 3 {
            return Err(Error::invalid("xi_points must be odd and >= 3"));
        }
        if !(self.xi_max > 0.0 && self.xi_max.is_finite()) {
            return Err(Error::invalid("xi_max must be positive"));
        }
        if !(self.a < 0.0 && t_end < self.b) {
            return Err(Error::invalid(format!(
                "ambient interval ({}, {}) must satisfy a < 0 < T = {t_end} < b",
                self.a, self.b
            )));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        self.b - self.a
    }

    pub fn time_modes(&self) -> usize {
        2 * self.n_max + 1
    }

    pub fn xi_step(&self) -> f64 {
        2.0 * self.xi_max / (self.xi_points - 1) as f64
    }

    /// Number of `ξ` points in the tensor grid.
    pub fn space_modes(&self) -> usize {
        self.xi_points.pow(self.d as u32)
    }

    pub fn xi_axis(&self, l: usize) -> f64 {
        // symmetric construction keeps ξ(l) = -ξ(P-1-l) exactly
        let half = (self.xi_points - 1) / 2;
        let h = self.xi_step();
        if l >= half {
            (l - half) as f64 * h
        } else {
            -((half - l) as f64 * h)
        }
    }

    /// Frequency vector at flat index `q` (last axis fastest).
    pub fn xi(&self, q: usize) -> Vec<f64> {
        let mut xi = vec![0.0; self.d];
        let mut rest = q;
        for axis in (0..self.d).rev() {
            xi[axis] = self.xi_axis(rest % self.xi_points);
            rest /= self.xi_points;
        }
        xi
    }

    /// Flat index of `-ξ`.
    pub fn negate_xi(&self, q: usize) -> usize {
        let mut out = 0;
        let mut rest = q;
        let mut stride = 1;
        for _ in 0..self.d {
            let l = rest % self.xi_points;
            out += (self.xi_points - 1 - l) * stride;
            rest /= self.xi_points;
            stride *= self.xi_points;
        }
        out
    }

    /// Flat index of the multi-index `ls` (one entry per axis).
    pub fn xi_index(&self, ls: &[usize]) -> usize {
        ls.iter().fold(0, |acc, l| acc * self.xi_points + l)
    }

    /// Tensor trapezoid weight of the grid point `q`.
    pub fn xi_weight(&self, q: usize) -> f64 {
        let h = self.xi_step();
        let mut w = 1.0;
        let mut rest = q;
        for _ in 0..self.d {
            let l = rest % self.xi_points;
            w *= if l == 0 || l == self.xi_points - 1 { h / 2.0 } else { h };
            rest /= self.xi_points;
        }
        w
    }

    /// Total number of complex coefficients.
    pub fn len(&self) -> usize {
        self.d * self.time_modes() * self.space_modes()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, k: usize, n: i64, q: usize) -> usize {
        let ni = (n + self.n_max as i64) as usize;
        (k * self.time_modes() + ni) * self.space_modes() + q
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// Current of a simulated particle system.
    Stochastic,
    /// Current of the deterministic limit.
    Limit,
    /// Current of a controlled system or controlled limit.
    Controlled,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Stochastic => "stochastic",
            Provenance::Limit => "limit",
            Provenance::Controlled => "controlled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "stochastic" => Some(Provenance::Stochastic),
            "limit" => Some(Provenance::Limit),
            "controlled" => Some(Provenance::Controlled),
            _ => None,
        }
    }
}

/// Fourier coefficients `Ĵ(k, n, ξ)` of a current on a mode grid, laid out
/// `(k, n + n_max, ξ-index)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurrentCoefficients {
    pub grid: ModeGrid,
    pub provenance: Provenance,
    pub coeffs: Vec<Complex64>,
}

impl CurrentCoefficients {
    pub fn zeros(grid: ModeGrid, provenance: Provenance) -> Self {
        let coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
        CurrentCoefficients {
            grid,
            provenance,
            coeffs,
        }
    }

    pub fn get(&self, k: usize, n: i64, q: usize) -> Complex64 {
        self.coeffs[self.grid.index(k, n, q)]
    }

    /// Largest `|Ĵ(k,-n,-ξ) - conj Ĵ(k,n,ξ)|`.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let g = &self.grid;
        let mut worst = 0.0f64;
        for k in 0..g.d {
            for n in -(g.n_max as i64)..=g.n_max as i64 {
                for q in 0..g.space_modes() {
                    let a = self.get(k, n, q);
                    let b = self.get(k, -n, g.negate_xi(q));
                    worst = worst.max((b - a.conj()).norm());
                }
            }
        }
        worst
    }

    pub fn scaled(&self, factor: f64) -> Self {
        CurrentCoefficients {
            grid: self.grid.clone(),
            provenance: self.provenance,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::invalid("current coefficients live on different mode grids"));
        }
        Ok(CurrentCoefficients {
            grid: self.grid.clone(),
            provenance: self.provenance,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }
}

/// `sqrt(Σ_k Σ_n Σ_ξ w_ξ |Ĵ|² (1 + n²)^{-s1} (1 + |ξ|²)^{-s2})` with tensor
/// trapezoid weights `w_ξ`.
pub fn dual_pseudo_norm(cur: &CurrentCoefficients, s: SobolevIndex) -> Result<f64> {
    let g = &cur.grid;
    s.validate(g.d)?;
    let xi_factor: Vec<f64> = (0..g.space_modes())
        .map(|q| {
            let r2: f64 = g.xi(q).iter().map(|v| v * v).sum();
            g.xi_weight(q) * (1.0 + r2).powf(-s.s2)
        })
        .collect();
    let mut total = 0.0;
    for k in 0..g.d {
        for n in -(g.n_max as i64)..=g.n_max as i64 {
            let tf = (1.0 + (n * n) as f64).powf(-s.s1);
            for (q, xf) in xi_factor.iter().enumerate() {
                total += cur.get(k, n, q).norm_sqr() * tf * xf;
            }
        }
    }
    Ok(total.sqrt())
}

/// Pseudo-norm of `a - b`; the grids must be identical.
pub fn current_distance(
    a: &CurrentCoefficients,
    b: &CurrentCoefficients,
    s: SobolevIndex,
) -> Result<f64> {
    dual_pseudo_norm(&a.difference(b)?, s)
}
