//! Wasserstein-1 distance between atomic measures.
//!
//! * `d = 1`: exact, `∫ |F_a - F_b|` over the merged support.
//! * `d > 1`, equal-weight measures with the same atom count `K <= 512`:
//!   exact, minimum-cost assignment on the Euclidean cost matrix.
//! * otherwise: sliced approximation averaging exact one-dimensional
//!   distances over seeded random directions (biased low, not corrected).

use rand::Rng;
use rand_distr::StandardNormal;

use super::measure::dist;
use super::EmpiricalMeasure;
use crate::error::{Error, Result};
use crate::rng::seeded_rng;

pub const EXACT_ASSIGNMENT_LIMIT: usize = 512;
pub const SLICED_PROJECTIONS: usize = 64;
const SLICED_SEED: u64 = 0x5eed_51ce;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum W1Method {
    Exact1d,
    Assignment,
    Sliced { projections: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wasserstein1 {
    pub value: f64,
    pub method: W1Method,
}

impl Wasserstein1 {
    pub fn is_approximate(&self) -> bool {
        matches!(self.method, W1Method::Sliced { .. })
    }
}

pub fn wasserstein1(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<Wasserstein1> {
    wasserstein1_with(a, b, SLICED_PROJECTIONS, SLICED_SEED)
}

pub fn wasserstein1_with(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    projections: usize,
    seed: u64,
) -> Result<Wasserstein1> {
    Error::check_dim("wasserstein1 dimension", a.dim(), b.dim())?;
    let d = a.dim();
    if d == 1 {
        return Ok(Wasserstein1 {
            value: w1_line(
                a.atoms().iter().copied().zip(a.weights().iter().copied()),
                b.atoms().iter().copied().zip(b.weights().iter().copied()),
            ),
            method: W1Method::Exact1d,
        });
    }
    let exact = a.len() == b.len()
        && a.len() <= EXACT_ASSIGNMENT_LIMIT
        && a.is_equal_weight()
        && b.is_equal_weight();
    if exact {
        let k = a.len();
        let cost: Vec<f64> = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .map(|(i, j)| dist(a.atom(i), b.atom(j)))
            .collect();
        let assignment = min_cost_assignment(k, &cost);
        // Summing the matched costs in sorted order keeps the value exactly
        // symmetric in (a, b).
        let mut matched: Vec<f64> = assignment
            .iter()
            .enumerate()
            .map(|(i, &j)| cost[i * k + j])
            .collect();
        matched.sort_by(f64::total_cmp);
        let total: f64 = matched.iter().sum();
        return Ok(Wasserstein1 {
            value: total / k as f64,
            method: W1Method::Assignment,
        });
    }
    if projections == 0 {
        return Err(Error::invalid("sliced W1 needs at least one projection"));
    }
    let mut rng = seeded_rng(seed, 0x51ce);
    let mut direction = vec![0.0; d];
    let mut total = 0.0;
    for _ in 0..projections {
        loop {
            for x in direction.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            let n = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-12 {
                direction.iter_mut().for_each(|x| *x /= n);
                break;
            }
        }
        let project = |m: &EmpiricalMeasure| -> Vec<(f64, f64)> {
            (0..m.len())
                .map(|i| {
                    let p: f64 = m.atom(i).iter().zip(&direction).map(|(x, u)| x * u).sum();
                    (p, m.weights()[i])
                })
                .collect()
        };
        total += w1_line(project(a).into_iter(), project(b).into_iter());
    }
    Ok(Wasserstein1 {
        value: total / projections as f64,
        method: W1Method::Sliced { projections, seed },
    })
}

/// Exact W1 on the line: integrate `|F_a - F_b|` between merged breakpoints.
fn w1_line(
    a: impl Iterator<Item = (f64, f64)>,
    b: impl Iterator<Item = (f64, f64)>,
) -> f64 {
    let mut events: Vec<(f64, f64)> = a.collect();
    events.extend(b.map(|(x, w)| (x, -w)));
    events.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut cdf_gap = 0.0;
    let mut total = 0.0;
    for pair in events.windows(2) {
        cdf_gap += pair[0].1;
        total += cdf_gap.abs() * (pair[1].0 - pair[0].0);
    }
    total
}

/// Minimum-cost perfect assignment on a dense `k × k` cost matrix (row-major).
/// Returns `assignment[row] = column`. Shortest augmenting paths with
/// potentials, `O(k³)`.
pub(crate) fn min_cost_assignment(k: usize, cost: &[f64]) -> Vec<usize> {
    // 1-based arrays; index 0 is the virtual source column.
    let mut u = vec![0.0; k + 1];
    let mut v = vec![0.0; k + 1];
    let mut owner = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for row in 1..=k {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=k {
                if used[col] {
                    continue;
                }
                let reduced = cost[(r - 1) * k + (col - 1)] - u[r] - v[col];
                if reduced < minv[col] {
                    minv[col] = reduced;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=k {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; k];
    for col in 1..=k {
        assignment[owner[col] - 1] = col - 1;
    }
    assignment
}
