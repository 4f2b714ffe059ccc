use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Smooth plateau in time: zero outside `(start, end)`, one on
/// `[plateau_start, plateau_end]`, with `C^∞` transitions in between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeWindow {
    pub start: f64,
    pub plateau_start: f64,
    pub plateau_end: f64,
    pub end: f64,
}

impl TimeWindow {
    pub fn new(start: f64, plateau_start: f64, plateau_end: f64, end: f64) -> Result<Self> {
        if !(start < plateau_start && plateau_start <= plateau_end && plateau_end < end) {
            return Err(Error::invalid(format!(
                "time window needs start < plateau_start <= plateau_end < end, got \
                 ({start}, {plateau_start}, {plateau_end}, {end})"
            )));
        }
        Ok(TimeWindow {
            start,
            plateau_start,
            plateau_end,
            end,
        })
    }

    /// Plateau on `[0, T]`, ramps of width `T/8` on either side.
    pub fn covering(t_end: f64) -> Self {
        TimeWindow {
            start: -t_end / 8.0,
            plateau_start: 0.0,
            plateau_end: t_end,
            end: t_end * 9.0 / 8.0,
        }
    }

    /// Supported strictly inside `(0, T)`.
    pub fn interior(t_end: f64) -> Self {
        TimeWindow {
            start: 0.02 * t_end,
            plateau_start: 0.15 * t_end,
            plateau_end: 0.85 * t_end,
            end: 0.98 * t_end,
        }
    }

    /// `(w(t), w'(t))`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        if t <= self.start || t >= self.end {
            (0.0, 0.0)
        } else if t < self.plateau_start {
            let width = self.plateau_start - self.start;
            let (s, ds) = smooth_step((t - self.start) / width);
            (s, ds / width)
        } else if t <= self.plateau_end {
            (1.0, 0.0)
        } else {
            let width = self.end - self.plateau_end;
            let (s, ds) = smooth_step((self.end - t) / width);
            (s, -ds / width)
        }
    }
}

/// `ψ(s) = f(s) / (f(s) + f(1-s))` with `f(s) = exp(-1/s)`, and `ψ'(s)`.
fn smooth_step(s: f64) -> (f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 0.0);
    }
    let f = |x: f64| (-1.0 / x).exp();
    let (fa, fb) = (f(s), f(1.0 - s));
    let (dfa, dfb) = (fa / (s * s), fb / ((1.0 - s) * (1.0 - s)));
    let den = fa + fb;
    (fa / den, (dfa * fb + fa * dfb) / (den * den))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Cos,
    Sin,
}

/// Spatial/temporal profile of a test function.
#[derive(Clone, Debug, PartialEq)]
pub enum TestKind {
    /// Real or imaginary part of `e^{2πi (n t / (b - a) + ξ·x)} / (b - a)`.
    SingleMode {
        n: i64,
        xi: Vec<f64>,
        phase: Phase,
        a: f64,
        b: f64,
    },
    /// `exp(-(t - t0)² / 2 w_t² - |x - x0|² / 2 w_x²)`.
    GaussianBump {
        t0: f64,
        x0: Vec<f64>,
        width_t: f64,
        width_x: f64,
    },
    /// `Σ c Π_l x_l^{e_l}` from a table of `(exponents, coefficient)` terms.
    PolynomialInX { terms: Vec<(Vec<u32>, f64)> },
}

/// Vector-valued test function `φ(t, x) = w(t) g(t, x) e_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunctionSpec {
    pub kind: TestKind,
    /// Index of the only nonzero component.
    pub k: usize,
    /// `None` leaves the profile untruncated in time.
    pub window: Option<TimeWindow>,
}

/// Profile value with its time derivative and spatial gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileJet {
    pub value: f64,
    pub dt: f64,
    pub grad: Vec<f64>,
}

impl TestFunctionSpec {
    pub fn gaussian_bump(
        t0: f64,
        x0: Vec<f64>,
        width_t: f64,
        width_x: f64,
        k: usize,
        window: Option<TimeWindow>,
    ) -> Self {
        TestFunctionSpec {
            kind: TestKind::GaussianBump {
                t0,
                x0,
                width_t,
                width_x,
            },
            k,
            window,
        }
    }

    pub fn single_mode(n: i64, xi: Vec<f64>, k: usize, phase: Phase, a: f64, b: f64) -> Self {
        TestFunctionSpec {
            kind: TestKind::SingleMode { n, xi, phase, a, b },
            k,
            window: None,
        }
    }

    pub fn polynomial(terms: Vec<(Vec<u32>, f64)>, k: usize, window: Option<TimeWindow>) -> Self {
        TestFunctionSpec {
            kind: TestKind::PolynomialInX { terms },
            k,
            window,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.k >= d {
            return Err(Error::invalid(format!(
                "test function component {} out of range for d = {d}",
                self.k
            )));
        }
        match &self.kind {
            TestKind::SingleMode { xi, a, b, .. } => {
                Error::check_dim("single-mode frequency", d, xi.len())?;
                if !(a < b) {
                    return Err(Error::invalid("single-mode interval needs a < b"));
                }
            }
            TestKind::GaussianBump {
                x0,
                width_t,
                width_x,
                ..
            } => {
                Error::check_dim("bump center", d, x0.len())?;
                if !(*width_t > 0.0 && *width_x > 0.0) {
                    return Err(Error::invalid("bump widths must be positive"));
                }
            }
            TestKind::PolynomialInX { terms } => {
                for (exps, _) in terms {
                    Error::check_dim("polynomial exponents", d, exps.len())?;
                }
            }
        }
        Ok(())
    }

    /// Whether the profile is constant in `x`.
    pub fn is_constant_in_space(&self) -> bool {
        match &self.kind {
            TestKind::SingleMode { xi, .. } => xi.iter().all(|v| *v == 0.0),
            TestKind::GaussianBump { .. } => false,
            TestKind::PolynomialInX { terms } => terms
                .iter()
                .all(|(e, c)| *c == 0.0 || e.iter().all(|p| *p == 0)),
        }
    }

    /// Scalar profile `w(t) g(t, x)`.
    pub fn profile(&self, t: f64, x: &[f64]) -> f64 {
        let w = match &self.window {
            Some(win) => {
                let (w, _) = win.eval(t);
                if w == 0.0 {
                    return 0.0;
                }
                w
            }
            None => 1.0,
        };
        w * self.raw(t, x)
    }

    fn raw(&self, t: f64, x: &[f64]) -> f64 {
        match &self.kind {
            TestKind::SingleMode { n, xi, phase, a, b } => {
                let len = b - a;
                let theta = TAU * (*n as f64 * t / len + dot(xi, x));
                match phase {
                    Phase::Cos => theta.cos() / len,
                    Phase::Sin => theta.sin() / len,
                }
            }
            TestKind::GaussianBump {
                t0,
                x0,
                width_t,
                width_x,
            } => {
                let r2: f64 = x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum();
                (-(t - t0) * (t - t0) / (2.0 * width_t * width_t) - r2 / (2.0 * width_x * width_x)).exp()
            }
            TestKind::PolynomialInX { terms } => terms
                .iter()
                .map(|(exps, c)| c * monomial(x, exps))
                .sum(),
        }
    }

    /// Profile, time derivative and spatial gradient, all analytic.
    pub fn jet(&self, t: f64, x: &[f64]) -> ProfileJet {
        let d = x.len();
        let (w, dw) = match &self.window {
            Some(win) => win.eval(t),
            None => (1.0, 0.0),
        };
        if w == 0.0 && dw == 0.0 {
            return ProfileJet {
                value: 0.0,
                dt: 0.0,
                grad: vec![0.0; d],
            };
        }
        let (g, gt, mut grad) = match &self.kind {
            TestKind::SingleMode { n, xi, phase, a, b } => {
                let len = b - a;
                let omega_t = TAU * *n as f64 / len;
                let theta = omega_t * t + TAU * dot(xi, x);
                let (s, c) = theta.sin_cos();
                let (val, der) = match phase {
                    Phase::Cos => (c / len, -s / len),
                    Phase::Sin => (s / len, c / len),
                };
                (val, der * omega_t, xi.iter().map(|k| der * TAU * k).collect::<Vec<_>>())
            }
            TestKind::GaussianBump {
                t0,
                x0,
                width_t,
                width_x,
            } => {
                let g = self.raw(t, x);
                let gt = -g * (t - t0) / (width_t * width_t);
                let grad = x
                    .iter()
                    .zip(x0)
                    .map(|(xi, ci)| -g * (xi - ci) / (width_x * width_x))
                    .collect();
                (g, gt, grad)
            }
            TestKind::PolynomialInX { terms } => {
                let g = self.raw(t, x);
                let mut grad = vec![0.0; d];
                for (exps, c) in terms {
                    for (l, gl) in grad.iter_mut().enumerate() {
                        if exps[l] == 0 {
                            continue;
                        }
                        let mut e = exps.clone();
                        e[l] -= 1;
                        *gl += c * exps[l] as f64 * monomial(x, &e);
                    }
                }
                (g, 0.0, grad)
            }
        };
        grad.iter_mut().for_each(|v| *v *= w);
        ProfileJet {
            value: w * g,
            dt: dw * g + w * gt,
            grad,
        }
    }
}

fn monomial(x: &[f64], exps: &[u32]) -> f64 {
    x.iter().zip(exps).map(|(v, e)| v.powi(*e as i32)).product()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finite_difference_check(phi: &TestFunctionSpec, t: f64, x: &[f64]) {
        let h = 1e-6;
        let jet = phi.jet(t, x);
        assert!((jet.value - phi.profile(t, x)).abs() < 1e-14);
        let dt = (phi.profile(t + h, x) - phi.profile(t - h, x)) / (2.0 * h);
        assert!((jet.dt - dt).abs() < 1e-6 * (1.0 + dt.abs()), "dt {} vs {}", jet.dt, dt);
        for l in 0..x.len() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[l] += h;
            xm[l] -= h;
            let g = (phi.profile(t, &xp) - phi.profile(t, &xm)) / (2.0 * h);
            assert!((jet.grad[l] - g).abs() < 1e-6 * (1.0 + g.abs()));
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let win = TimeWindow::new(0.0, 0.3, 0.6, 1.0).unwrap();
        let bump = TestFunctionSpec::gaussian_bump(0.4, vec![0.1, -0.2], 0.2, 0.7, 1, Some(win));
        let mode = TestFunctionSpec::single_mode(3, vec![0.5, -1.0], 0, Phase::Sin, -0.25, 1.25);
        let poly = TestFunctionSpec::polynomial(
            vec![(vec![2, 1], 0.5), (vec![0, 3], -1.0), (vec![0, 0], 2.0)],
            0,
            Some(win),
        );
        for phi in [&bump, &mode, &poly] {
            for t in [0.1, 0.25, 0.45, 0.8] {
                finite_difference_check(phi, t, &[0.3, -0.8]);
            }
        }
    }

    #[test]
    fn window_is_flat_and_compact() {
        let w = TimeWindow::covering(2.0);
        assert_eq!(w.eval(0.0), (1.0, 0.0));
        assert_eq!(w.eval(1.3), (1.0, 0.0));
        assert_eq!(w.eval(-0.25).0, 0.0);
        assert_eq!(w.eval(2.25).0, 0.0);
        let (v, _) = w.eval(-0.125);
        assert!((v - 0.5).abs() < 1e-12);
        assert!(TimeWindow::new(0.0, 1.0, 0.5, 2.0).is_err());
    }

    #[test]
    fn constant_in_space_detection() {
        let flat = TestFunctionSpec::polynomial(vec![(vec![0], 1.0)], 0, None);
        assert!(flat.is_constant_in_space());
        let slope = TestFunctionSpec::polynomial(vec![(vec![1], 1.0)], 0, None);
        assert!(!slope.is_constant_in_space());
    }
}
