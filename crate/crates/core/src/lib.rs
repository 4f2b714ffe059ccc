//! Numerical toolkit for mean-field interacting diffusions with vanishing
//! noise.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] – the coefficient catalog, initial ensembles, empirical
//!   measures and the Wasserstein-1 metric.
//! * [`simulator`] – Euler–Maruyama integration of the N-particle system,
//!   with or without controls, on a counter-based random stream.
//! * [`currents`] – stochastic currents: pairings against test functions,
//!   truncated Fourier coefficients and negative Sobolev pseudo-norms.
//! * [`vlasov`] – the deterministic hydrodynamic limit solved along
//!   characteristics, its current, and distributional residual checks.
//! * [`rate`] – control-energy cost functionals of the large-deviation rate
//!   function and a penalty optimiser over affine feedback controls.
//! * [`laplace`] – Monte Carlo Laplace functionals, variational upper bounds
//!   and scaling scans across the particle count.

pub mod currents;
pub mod error;
pub mod io;
pub mod laplace;
pub mod model;
mod par;
pub mod rate;
pub mod rng;
pub mod simulator;
pub mod vlasov;

pub use error::{Error, Result};
