//! Symbols of diffusions with jumps.
//!
//! Every conservative model here has a symbol
//!
//! ```text
//! q(x, xi) = -i <xi, b(x)> + 1/2 <xi, c(x) xi>
//!            - int ( e^{i<xi,y>} - 1 - i <xi,y> 1_{|y|<=1} ) nu(x, dy)
//! ```
//!
//! evaluated exactly for atomic measures, in closed form for symmetric
//! stable measures, and by adaptive quadrature for density measures. The
//! killing term is zero by construction: the model type has no killing
//! field, so `q(x, 0) = 0` always holds.

mod checks;
mod model;

pub use checks::{
    check_ergodicity_condition, check_heat_kernel_integrability, check_sector_condition,
    check_strong_ergodicity_hint, check_summability, default_sector_probes, ErgodicityVerdict,
    HeatKernelReport, SectorVerdict, ShellSum, StrongErgodicityHint, SummabilityReport,
    SummabilityVerdict, EPS_SPECTRUM_ZERO,
};
pub(crate) use checks::least_squares_slope;
pub use model::{
    stable_measure_constant, symmetric_sqrt, CoefficientBounds, DrivingModel, GaussianBump,
    Harmonic, JumpAtom, JumpLaw, JumpMeasure, MatrixField, ScalarField,
};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad::{self, Budget};

const TWO_PI: f64 = std::f64::consts::TAU;

/// How lattice points are mapped to dual frequencies in the spectral
/// formulas.
///
/// * `PerAxis` (default): `xi_j = 2 pi k_j / tau_j`, the standard dual
///   lattice of the torus; in one dimension this is also the scalar form.
/// * `ScalarTau`: `xi = 2 pi k / (tau_1 ... tau_d)`, dividing by the cell
///   volume. The conventions coincide when `d = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrequencyConvention {
    #[default]
    PerAxis,
    ScalarTau,
}

impl FrequencyConvention {
    pub fn frequency(&self, k: &[i64], tau: &[f64]) -> Vec<f64> {
        match self {
            FrequencyConvention::PerAxis => k
                .iter()
                .zip(tau)
                .map(|(&kj, &tj)| TWO_PI * kj as f64 / tj)
                .collect(),
            FrequencyConvention::ScalarTau => {
                let vol: f64 = tau.iter().product();
                k.iter().map(|&kj| TWO_PI * kj as f64 / vol).collect()
            }
        }
    }
}

/// Value of the symbol at one `(x, xi)` pair, decomposed into the
/// quadratic, drift and jump contributions.
#[derive(Debug, Clone, Copy)]
pub struct SymbolValue {
    /// `1/2 <xi, c(x) xi>` (real, nonnegative).
    pub quadratic: f64,
    /// `int (1 - cos<xi,y>) nu(x,dy)` (real, nonnegative).
    pub jump_cos: f64,
    /// `-<xi, b(x)>` (imaginary part from the drift).
    pub drift: f64,
    /// `-int (sin<xi,y> - <xi,y> 1_{|y|<=1}) nu(x,dy)` (imaginary part).
    pub jump_sin: f64,
}

impl SymbolValue {
    pub fn re(&self) -> f64 {
        self.quadratic + self.jump_cos
    }

    pub fn im(&self) -> f64 {
        self.drift + self.jump_sin
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re(), self.im())
    }
}

/// Evaluates the symbol `q(x, xi)`.
///
/// Atomic measures are summed exactly, symmetric stable measures use the
/// closed form `gamma(x) |xi|^{alpha(x)}`, and density measures are
/// integrated adaptively (relative tolerance `1e-9`, budget `1e6`
/// evaluations). Sampler-only jump laws are rejected.
pub fn eval_symbol(model: &DrivingModel, x: &[f64], xi: &[f64]) -> Result<SymbolValue> {
    if x.len() != model.dim() || xi.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x.len().max(xi.len()),
        });
    }
    let tau = model.period();
    let mut b = vec![0.0; model.dim()];
    model.drift_at(x, &mut b);
    let drift = -dot(xi, &b);

    let mut c = vec![0.0; model.dim() * model.dim()];
    model.diffusion_at(x, &mut c);
    let quadratic = 0.5 * quadratic_form(xi, &c, model.dim());

    let (jump_cos, jump_sin) = match model.jumps() {
        None => (0.0, 0.0),
        Some(JumpMeasure::Atoms(atoms)) => {
            let mut re = 0.0;
            let mut im = 0.0;
            for a in atoms {
                let theta = dot(xi, &a.location);
                let r2: f64 = a.location.iter().map(|v| v * v).sum();
                re += a.rate * (1.0 - theta.cos());
                let compensated = if r2 <= 1.0 { theta } else { 0.0 };
                im -= a.rate * (theta.sin() - compensated);
            }
            (re, im)
        }
        Some(JumpMeasure::FiniteDensity { rate, law }) => {
            let lambda = rate.eval(x, tau);
            let (re, im) = density_symbol_integral(law, xi)?;
            (lambda * re, lambda * im)
        }
        Some(JumpMeasure::SymmetricStable { alpha, gamma }) => {
            let a = alpha.eval(x, tau);
            let g = gamma.eval(x, tau);
            let norm = dot(xi, xi).sqrt();
            (g * norm.powf(a), 0.0)
        }
    };

    Ok(SymbolValue {
        quadratic,
        jump_cos,
        drift,
        jump_sin,
    })
}

/// `int (1 - cos theta, -(sin theta - theta 1_{|y|<=1})) rho(y) dy` for an
/// evaluable density law.
fn density_symbol_integral(law: &JumpLaw, xi: &[f64]) -> Result<(f64, f64)> {
    if !law.has_density() {
        return Err(Error::SamplerOnlyJumpLaw);
    }
    let dim = xi.len();
    if dim == 1 {
        let segments = density_segments(law, 0)?;
        let mut budget = Budget::new(quad::DEFAULT_BUDGET);
        let f = |y: f64| {
            let rho = law.density(&[y]).unwrap_or(0.0);
            let theta = xi[0] * y;
            let compensated = if y.abs() <= 1.0 { theta } else { 0.0 };
            Complex64::new((1.0 - theta.cos()) * rho, -(theta.sin() - compensated) * rho)
        };
        let v: Complex64 = quad::integrate_segments(&f, &segments, quad::DEFAULT_TOL, &mut budget)?;
        Ok((v.re, v.im))
    } else if dim == 2 {
        let mut budget = Budget::new(quad::DEFAULT_BUDGET);
        let inner_segs = density_segments(law, 1)?;
        let outer = |y0: f64| -> Complex64 {
            let mut inner_budget = Budget::new(8_192);
            quad::integrate_segments(
                &|y1: f64| {
                    let y = [y0, y1];
                    let rho = law.density(&y).unwrap_or(0.0);
                    let theta = xi[0] * y0 + xi[1] * y1;
                    let r2 = y0 * y0 + y1 * y1;
                    let compensated = if r2 <= 1.0 { theta } else { 0.0 };
                    Complex64::new(
                        (1.0 - theta.cos()) * rho,
                        -(theta.sin() - compensated) * rho,
                    )
                },
                &inner_segs,
                1e-10,
                &mut inner_budget,
            )
            .unwrap_or(Complex64::new(f64::NAN, f64::NAN))
        };
        let segs = density_segments(law, 0)?;
        let v: Complex64 = quad::integrate_segments(&outer, &segs, 1e-8, &mut budget)?;
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::QuadratureBudget {
                budget: quad::DEFAULT_BUDGET,
            });
        }
        Ok((v.re, v.im))
    } else {
        Err(Error::InvalidModel(
            "density jump quadrature supports at most two dimensions".into(),
        ))
    }
}

/// Mass-carrying segments of a density law along `axis`, each split at the
/// compensator kink `|y| = 1`.
pub(crate) fn density_segments(law: &JumpLaw, axis: usize) -> Result<Vec<(f64, f64)>> {
    let mut segments = Vec::new();
    for (lo, hi) in law.axis_segments(axis)? {
        segments.extend(split_segments(lo, hi, &[-1.0, 1.0]));
    }
    Ok(segments)
}

/// Splits `[lo, hi]` at the interior cut points (used to isolate the kink of
/// the compensator indicator at |y| = 1).
pub(crate) fn split_segments(lo: f64, hi: f64, cuts: &[f64]) -> Vec<(f64, f64)> {
    let mut points = vec![lo];
    for &c in cuts {
        if c > lo && c < hi {
            points.push(c);
        }
    }
    points.push(hi);
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.windows(2).map(|w| (w[0], w[1])).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn quadratic_form(xi: &[f64], c_flat: &[f64], dim: usize) -> f64 {
    let mut acc = 0.0;
    for p in 0..dim {
        for q in 0..dim {
            acc += xi[p] * c_flat[p * dim + q] * xi[q];
        }
    }
    acc
}
