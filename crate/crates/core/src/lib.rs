//! Simulation and numerical verification of passive tracers advected by
//! velocity fields driven by diffusions with jumps.
//!
//! The crate computes the law-of-large-numbers drift and the central-limit
//! covariance of the tracer by two independent routes (a dual-lattice
//! spectral series and quadrature of the carre-du-champ integrand against
//! the invariant measure), simulates the underlying processes with
//! reproducible parallel ensembles, and statistically verifies the limit
//! theorems at desk scale.
//!
//! Module map:
//! * [`symbols`] - driving-process models, symbol evaluation, analytic
//!   condition checks;
//! * [`torus`] - band-limited periodic test functions and Fourier helpers;
//! * [`generator`] - the integro-differential generator and carre du champ;
//! * [`simulate`] - exact and Euler path generation, tracer assembly,
//!   deterministic parallel ensembles;
//! * [`ergodic`] - Birkhoff averages, occupation histograms, the limiting
//!   covariance by series and by quadrature, TV-decay diagnostics;
//! * [`stats`] - LLN/CLT experiments and distributional tests.

pub mod error;
pub mod generator;
pub mod quad;
pub mod simulate;
pub mod stats;
pub mod symbols;
pub mod torus;

pub mod ergodic;

pub use error::{Error, Result};
