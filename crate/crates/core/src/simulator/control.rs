use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Piecewise-constant affine field `t, x ↦ α(t) + β(t) x` on equal time bins
/// over `[0, t_end]`. `α(t)` has `rows` entries and `β(t)` is `rows × cols`
/// (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct AffineSchedule {
    bins: usize,
    t_end: f64,
    rows: usize,
    cols: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl AffineSchedule {
    pub fn zeros(bins: usize, t_end: f64, rows: usize, cols: usize) -> Self {
        AffineSchedule {
            bins,
            t_end,
            rows,
            cols,
            alpha: vec![0.0; bins * rows],
            beta: vec![0.0; bins * rows * cols],
        }
    }

    pub fn new(
        bins: usize,
        t_end: f64,
        rows: usize,
        cols: usize,
        alpha: Vec<f64>,
        beta: Vec<f64>,
    ) -> Result<Self> {
        if bins == 0 || rows == 0 || cols == 0 {
            return Err(Error::invalid("affine schedule needs bins, rows, cols >= 1"));
        }
        if !(t_end > 0.0) {
            return Err(Error::invalid("affine schedule horizon must be positive"));
        }
        Error::check_dim("affine alpha length", bins * rows, alpha.len())?;
        Error::check_dim("affine beta length", bins * rows * cols, beta.len())?;
        if alpha.iter().chain(&beta).any(|v| !v.is_finite()) {
            return Err(Error::invalid("affine schedule coefficients must be finite"));
        }
        Ok(AffineSchedule {
            bins,
            t_end,
            rows,
            cols,
            alpha,
            beta,
        })
    }

    /// Constant-in-time `α`, zero `β`.
    pub fn constant(t_end: f64, alpha: &[f64], cols: usize) -> Self {
        let rows = alpha.len();
        AffineSchedule {
            bins: 1,
            t_end,
            rows,
            cols,
            alpha: alpha.to_vec(),
            beta: vec![0.0; rows * cols],
        }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Number of free parameters, `bins · (rows + rows · cols)`.
    pub fn parameter_count(&self) -> usize {
        self.alpha.len() + self.beta.len()
    }

    /// Flattened `[α..., β...]`.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = self.alpha.clone();
        p.extend_from_slice(&self.beta);
        p
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        let (a, b) = params.split_at(self.alpha.len());
        self.alpha.copy_from_slice(a);
        self.beta.copy_from_slice(b);
    }

    /// Bin active during step `step` of a uniform grid with `steps` steps.
    pub fn bin_for_step(&self, step: usize, steps: usize) -> usize {
        ((step * self.bins) / steps).min(self.bins - 1)
    }

    /// Bin containing time `t` (clamped to the horizon).
    pub fn bin_at(&self, t: f64) -> usize {
        let b = (t / self.t_end * self.bins as f64).floor();
        if b <= 0.0 {
            0
        } else {
            (b as usize).min(self.bins - 1)
        }
    }

    /// `out = α_bin + β_bin x`.
    pub fn eval_bin(&self, bin: usize, x: &[f64], out: &mut [f64]) {
        let a = &self.alpha[bin * self.rows..(bin + 1) * self.rows];
        let b = &self.beta[bin * self.rows * self.cols..(bin + 1) * self.rows * self.cols];
        for (r, o) in out.iter_mut().enumerate() {
            let row = &b[r * self.cols..(r + 1) * self.cols];
            *o = a[r] + row.iter().zip(x).map(|(c, xi)| c * xi).sum::<f64>();
        }
    }
}

/// How a feedback field is turned into the control entering the dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeedbackMode {
    /// The field is a target velocity `h`; the applied control is
    /// `u = σ⁺ (h(t, x) - b(x, V))`.
    Velocity,
    /// The field value is the control `u` itself.
    Control,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffineFeedback {
    pub schedule: AffineSchedule,
    pub mode: FeedbackMode,
}

/// Controls `u_j(t)` entering the dynamics as `σ u_j dt`.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum ControlSpec {
    #[default]
    None,
    /// Values on the time grid, layout `(particle, step, component)`.
    OpenLoop {
        n: usize,
        steps: usize,
        m: usize,
        values: Vec<f64>,
    },
    FeedbackAffine(AffineFeedback),
}

impl ControlSpec {
    pub fn open_loop(n: usize, steps: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        Error::check_dim("open-loop control length", n * steps * m, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("open-loop control must be finite"));
        }
        Ok(ControlSpec::OpenLoop {
            n,
            steps,
            m,
            values,
        })
    }

    /// The same constant control for every particle and step.
    pub fn constant(n: usize, steps: usize, w: &[f64]) -> Self {
        let values = (0..n * steps).flat_map(|_| w.iter().copied()).collect();
        ControlSpec::OpenLoop {
            n,
            steps,
            m: w.len(),
            values,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ControlSpec::None => "none",
            ControlSpec::OpenLoop { .. } => "open_loop",
            ControlSpec::FeedbackAffine(f) => match f.mode {
                FeedbackMode::Velocity => "feedback_affine_velocity",
                FeedbackMode::Control => "feedback_affine",
            },
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, ControlSpec::None)
    }
}

/// Moore–Penrose inverse used to map velocities back to controls.
pub(crate) fn pseudo_inverse(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sigma
        .clone()
        .pseudo_inverse(1e-14)
        .map_err(|e| Error::invalid(format!("pseudo-inverse of sigma failed: {e}")))
}
