use crate::error::{Error, Result};

/// Weighted atomic probability measure on `R^d`.
///
/// Atoms are stored flat, `atoms[i * d..(i + 1) * d]`. Every measure produced
/// by the crate carries equal weights `1/K`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    d: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Equal-weight measure on the given flat atom array.
    ///
    /// Panics if `atoms` is empty or not a multiple of `d`.
    pub fn uniform(d: usize, atoms: Vec<f64>) -> Self {
        assert!(d > 0 && !atoms.is_empty() && atoms.len() % d == 0);
        let k = atoms.len() / d;
        EmpiricalMeasure {
            d,
            atoms,
            weights: vec![1.0 / k as f64; k],
        }
    }

    pub fn weighted(d: usize, atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if d == 0 || atoms.is_empty() || atoms.len() % d != 0 {
            return Err(Error::invalid("atom array must be a non-empty multiple of d"));
        }
        Error::check_dim("measure weights", atoms.len() / d, weights.len())?;
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::invalid("measure weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("measure weights sum to {total}, not 1")));
        }
        Ok(EmpiricalMeasure { d, atoms, weights })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.d..(i + 1) * self.d]
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_equal_weight(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|x| *x == w)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.d];
        for (p, w) in self.atoms.chunks_exact(self.d).zip(&self.weights) {
            for (m, x) in mean.iter_mut().zip(p) {
                *m += w * x;
            }
        }
        mean
    }

    /// `∫ |y| μ(dy)`.
    pub fn first_moment(&self) -> f64 {
        self.atoms
            .chunks_exact(self.d)
            .zip(&self.weights)
            .map(|(p, w)| w * norm(p))
            .sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.atoms
            .chunks_exact(self.d)
            .zip(&self.weights)
            .map(|(p, w)| w * p.iter().map(|x| x * x).sum::<f64>())
            .sum()
    }

    /// Translate every atom by `shift`.
    pub fn translated(&self, shift: &[f64]) -> Self {
        let mut atoms = self.atoms.clone();
        for p in atoms.chunks_exact_mut(self.d) {
            for (x, s) in p.iter_mut().zip(shift) {
                *x += s;
            }
        }
        EmpiricalMeasure {
            d: self.d,
            atoms,
            weights: self.weights.clone(),
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
