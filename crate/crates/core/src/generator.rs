//! The integro-differential generator applied to periodic test functions,
//! pointwise and through the symbol, plus the carre-du-champ integrand of
//! the limiting covariance.
//!
//! Pointwise:
//!
//! ```text
//! A w(x) = <b(x), grad w(x)> + 1/2 sum c_pq(x) d_p d_q w(x)
//!          + int ( w(x+y) - w(x) - <y, grad w(x)> 1_{|y|<=1} ) nu(x, dy)
//! ```
//!
//! Spectral (constant coefficients only): multiply each coefficient by
//! `-q(xi_k)`, the negated symbol at the dual frequency of the mode.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad::{self, Budget};
use crate::symbols::{
    self, eval_symbol, stable_measure_constant, DrivingModel, FrequencyConvention, JumpLaw,
    JumpMeasure,
};
use crate::torus::{CompiledSeries, PeriodicFunction};

/// Applies the generator at a single point by direct evaluation of the
/// defining formula. Atomic measures are exact; density measures use
/// adaptive quadrature; symmetric stable measures use the spectral route
/// when the coefficients are constant and a split-at-epsilon quadrature
/// otherwise (one-dimensional only).
pub fn apply_pointwise(model: &DrivingModel, w: &PeriodicFunction, x: &[f64]) -> Result<f64> {
    let dim = model.dim();
    if w.dim() != dim || x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: w.dim().max(x.len()),
        });
    }
    let tau = model.period();
    let grad = w.gradient(x);

    let mut b = vec![0.0; dim];
    model.drift_at(x, &mut b);
    let drift_term = symbols::dot(&b, &grad);

    let mut c = vec![0.0; dim * dim];
    model.diffusion_at(x, &mut c);
    let diffusion_term = w.hessian_trace_form(x, &c);

    let jump_term = match model.jumps() {
        None => 0.0,
        Some(JumpMeasure::Atoms(atoms)) => {
            let wx = w.evaluate(x);
            let mut acc = 0.0;
            let mut shifted = vec![0.0; dim];
            for a in atoms {
                for (s, (xi, yi)) in shifted.iter_mut().zip(x.iter().zip(&a.location)) {
                    *s = xi + yi;
                }
                let r2: f64 = a.location.iter().map(|v| v * v).sum();
                let compensator = if r2 <= 1.0 {
                    symbols::dot(&a.location, &grad)
                } else {
                    0.0
                };
                acc += a.rate * (w.evaluate(&shifted) - wx - compensator);
            }
            acc
        }
        Some(JumpMeasure::FiniteDensity { rate, law }) => {
            let lambda = rate.eval(x, tau);
            lambda * density_generator_integral(law, w, x, &grad)?
        }
        Some(JumpMeasure::SymmetricStable { alpha, gamma }) => {
            let a = alpha.eval(x, tau);
            let g = gamma.eval(x, tau);
            if model.is_levy() && model.period().is_some() {
                // Constant coefficients: the spectral multiplier is exact.
                let aw = apply_fourier(model, w, FrequencyConvention::PerAxis)?;
                return Ok(aw.evaluate(x));
            }
            if dim != 1 {
                return Err(Error::InvalidModel(
                    "pointwise stable generator is implemented in one dimension only".into(),
                ));
            }
            stable_generator_1d(w, x, a, g)?
        }
    };

    Ok(drift_term + diffusion_term + jump_term)
}

/// `int (w(x+y) - w(x) - <y, grad w(x)> 1_{|y|<=1}) rho(y) dy`.
fn density_generator_integral(
    law: &JumpLaw,
    w: &PeriodicFunction,
    x: &[f64],
    grad: &[f64],
) -> Result<f64> {
    if !law.has_density() {
        return Err(Error::SamplerOnlyJumpLaw);
    }
    let dim = x.len();
    let wx = w.evaluate(x);
    if dim == 1 {
        let segments = symbols::density_segments(law, 0)?;
        let mut budget = Budget::new(quad::DEFAULT_BUDGET);
        let f = |y: f64| {
            let rho = law.density(&[y]).unwrap_or(0.0);
            let comp = if y.abs() <= 1.0 { y * grad[0] } else { 0.0 };
            (w.evaluate(&[x[0] + y]) - wx - comp) * rho
        };
        quad::integrate_segments(&f, &segments, quad::DEFAULT_TOL, &mut budget)
    } else if dim == 2 {
        let mut budget = Budget::new(quad::DEFAULT_BUDGET);
        let inner_segs = symbols::density_segments(law, 1)?;
        let outer = |y0: f64| -> f64 {
            let mut inner_budget = Budget::new(8_192);
            quad::integrate_segments(
                &|y1: f64| {
                    let y = [y0, y1];
                    let rho = law.density(&y).unwrap_or(0.0);
                    let r2 = y0 * y0 + y1 * y1;
                    let comp = if r2 <= 1.0 {
                        y0 * grad[0] + y1 * grad[1]
                    } else {
                        0.0
                    };
                    (w.evaluate(&[x[0] + y0, x[1] + y1]) - wx - comp) * rho
                },
                &inner_segs,
                1e-10,
                &mut inner_budget,
            )
            .unwrap_or(f64::NAN)
        };
        let segs = symbols::density_segments(law, 0)?;
        let v: f64 = quad::integrate_segments(&outer, &segs, 1e-8, &mut budget)?;
        if !v.is_finite() {
            return Err(Error::QuadratureBudget {
                budget: quad::DEFAULT_BUDGET,
            });
        }
        Ok(v)
    } else {
        Err(Error::InvalidModel(
            "density jump quadrature supports at most two dimensions".into(),
        ))
    }
}

/// Small-jump cutoff for the stable quadrature; the part below epsilon is
/// replaced by its second-order Taylor value.
const STABLE_EPS: f64 = 1e-3;

/// Quadrature cutoff beyond which the tail of the stable integral is taken
/// from the non-oscillatory mean of the pair integrand (error O(R^{-1-a})).
const STABLE_TAIL_CUTOFF: f64 = 1e4;

/// One-dimensional symmetric stable generator by symmetric-pair quadrature:
/// the compensator cancels between `+y` and `-y`, which leaves the
/// absolutely convergent integrand `w(x+y) + w(x-y) - 2 w(x)`.
///
/// Below [`STABLE_EPS`] the integrand is replaced by its second-order Taylor
/// value; beyond [`STABLE_TAIL_CUTOFF`] the oscillations average out and the
/// remaining mass comes from the constant `-2 (w(x) - w_hat(0))` at an
/// elementary power-law rate.
fn stable_generator_1d(w: &PeriodicFunction, x: &[f64], alpha: f64, gamma: f64) -> Result<f64> {
    let prefactor = gamma * stable_measure_constant(alpha);
    let wxx = w.second_partial(x, 0, 0);
    let mut acc = wxx * prefactor * STABLE_EPS.powf(2.0 - alpha) / (2.0 - alpha);

    let wx = w.evaluate(x);
    let pair = |y: f64| w.evaluate(&[x[0] + y]) + w.evaluate(&[x[0] - y]) - 2.0 * wx;
    // Panel width small enough to resolve the fastest mode of w.
    let xi_max = w
        .coefficients()
        .map(|(k, _)| {
            let f = w.frequency(k);
            f.iter().map(|v| v.abs()).fold(0.0_f64, f64::max)
        })
        .fold(1.0_f64, f64::max);
    let h_target = 0.05 / xi_max;
    let integrand = |y: f64| pair(y) * prefactor * y.powf(-1.0 - alpha);
    let mut lo = STABLE_EPS;
    while lo < STABLE_TAIL_CUTOFF {
        let hi = (lo * 2.0).min(STABLE_TAIL_CUTOFF);
        let n = (((hi - lo) / h_target).ceil() as usize).clamp(32, 2_000_000);
        acc += quad::composite_simpson(&integrand, lo, hi, n);
        lo = hi;
    }
    let mean_level = -2.0 * (wx - w.coefficient(&vec![0; x.len()]).re);
    acc += mean_level * prefactor * STABLE_TAIL_CUTOFF.powf(-alpha) / alpha;
    Ok(acc)
}

/// Applies the generator through the symbol: each Fourier coefficient is
/// multiplied by `-q(xi_k)`. Output support equals the input support, and
/// the `k = 0` coefficient is annihilated because `q(0) = 0`.
pub fn apply_fourier(
    model: &DrivingModel,
    w: &PeriodicFunction,
    convention: FrequencyConvention,
) -> Result<PeriodicFunction> {
    if !model.is_levy() {
        return Err(Error::RequiresConstantCoefficients);
    }
    if w.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: w.dim(),
        });
    }
    let tau = w.period().to_vec();
    if let Some(model_tau) = model.period() {
        if model_tau
            .iter()
            .zip(&tau)
            .any(|(a, b)| (a - b).abs() > 1e-12 * b.abs())
        {
            return Err(Error::PeriodMismatch);
        }
    }
    let origin = vec![0.0; model.dim()];
    let entries: Result<Vec<_>> = w
        .coefficients()
        .map(|(k, c)| {
            let xi = convention.frequency(k, &tau);
            let q = eval_symbol(model, &origin, &xi)?.value();
            Ok((k.to_vec(), -q * c))
        })
        .collect();
    PeriodicFunction::from_coefficients(tau, entries?)
}

/// The velocity field `v(x) = (A w^1(x), ..., A w^d(x))`, spectral for
/// constant coefficients and pointwise otherwise.
pub struct VelocityField {
    inner: VelocityInner,
    dim_in: usize,
    sup_bound: f64,
}

enum VelocityInner {
    Spectral(Vec<CompiledSeries>),
    Pointwise {
        model: DrivingModel,
        w: Vec<PeriodicFunction>,
    },
}

impl VelocityField {
    pub fn dim_out(&self) -> usize {
        match &self.inner {
            VelocityInner::Spectral(s) => s.len(),
            VelocityInner::Pointwise { w, .. } => w.len(),
        }
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    /// Upper bound on `sup_x |v(x)|` component sums (used for growth checks).
    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.inner {
            VelocityInner::Spectral(series) => {
                for (o, s) in out.iter_mut().zip(series) {
                    *o = s.evaluate(x);
                }
                Ok(())
            }
            VelocityInner::Pointwise { model, w } => {
                for (o, wi) in out.iter_mut().zip(w) {
                    *o = apply_pointwise(model, wi, x)?;
                }
                Ok(())
            }
        }
    }
}

/// Builds the velocity field for a family of test functions sharing one
/// period, using the spectral route whenever the model allows it.
pub fn velocity(
    model: &DrivingModel,
    w: &[PeriodicFunction],
    convention: FrequencyConvention,
) -> Result<VelocityField> {
    if w.is_empty() {
        return Err(Error::InvalidModel("velocity needs test functions".into()));
    }
    let tau = w[0].period().to_vec();
    for wi in w {
        if wi.period() != tau.as_slice() {
            return Err(Error::PeriodMismatch);
        }
    }
    if model.is_levy() {
        let mut series = Vec::with_capacity(w.len());
        let mut sup = 0.0_f64;
        for wi in w {
            let aw = apply_fourier(model, wi, convention)?;
            sup = sup.max(aw.sup_bound());
            series.push(aw.compiled());
        }
        Ok(VelocityField {
            inner: VelocityInner::Spectral(series),
            dim_in: model.dim(),
            sup_bound: sup,
        })
    } else {
        // No spectral route off the constant-coefficient case: state
        // dependence mixes Fourier modes.
        Ok(VelocityField {
            inner: VelocityInner::Pointwise {
                model: model.clone(),
                w: w.to_vec(),
            },
            dim_in: model.dim(),
            sup_bound: f64::INFINITY,
        })
    }
}

/// The carre-du-champ integrand of the limiting covariance:
///
/// ```text
/// Gamma(w_i, w_j)(x) = <grad w_i, c(x) grad w_j>
///     + int (w_i(x+y) - w_i(x)) (w_j(x+y) - w_j(x)) nu(x, dy)
/// ```
///
/// Symmetric in `(i, j)` and nonnegative on the diagonal. Stable measures
/// use the exact mode-pair identity
/// `int (e^{i<xi_k,y>}-1)(e^{i<xi_l,y>}-1) nu(dy) = q(xi_k) + q(xi_l) - q(xi_k + xi_l)`
/// valid for symmetric measures with real symbols.
pub fn carre_du_champ(
    model: &DrivingModel,
    w_i: &PeriodicFunction,
    w_j: &PeriodicFunction,
    x: &[f64],
) -> Result<f64> {
    let dim = model.dim();
    if w_i.dim() != dim || w_j.dim() != dim || x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: w_i.dim().max(w_j.dim()).max(x.len()),
        });
    }
    let tau = model.period();
    let gi = w_i.gradient(x);
    let gj = w_j.gradient(x);
    let mut c = vec![0.0; dim * dim];
    model.diffusion_at(x, &mut c);
    let mut diffusion_part = 0.0;
    for p in 0..dim {
        for q in 0..dim {
            diffusion_part += gi[p] * c[p * dim + q] * gj[q];
        }
    }

    let jump_part = match model.jumps() {
        None => 0.0,
        Some(JumpMeasure::Atoms(atoms)) => {
            let wi_x = w_i.evaluate(x);
            let wj_x = w_j.evaluate(x);
            let mut acc = 0.0;
            let mut shifted = vec![0.0; dim];
            for a in atoms {
                for (s, (xv, yv)) in shifted.iter_mut().zip(x.iter().zip(&a.location)) {
                    *s = xv + yv;
                }
                acc += a.rate * (w_i.evaluate(&shifted) - wi_x) * (w_j.evaluate(&shifted) - wj_x);
            }
            acc
        }
        Some(JumpMeasure::FiniteDensity { rate, law }) => {
            if !law.has_density() {
                return Err(Error::SamplerOnlyJumpLaw);
            }
            let lambda = rate.eval(x, tau);
            let wi_x = w_i.evaluate(x);
            let wj_x = w_j.evaluate(x);
            if dim == 1 {
                let segments = law.quad_segments_1d()?;
                let mut budget = Budget::new(quad::DEFAULT_BUDGET);
                let f = |y: f64| {
                    let rho = law.density(&[y]).unwrap_or(0.0);
                    let xs = [x[0] + y];
                    (w_i.evaluate(&xs) - wi_x) * (w_j.evaluate(&xs) - wj_x) * rho
                };
                lambda * quad::integrate_segments(&f, &segments, quad::DEFAULT_TOL, &mut budget)?
            } else if dim == 2 {
                let mut budget = Budget::new(quad::DEFAULT_BUDGET);
                let inner_segs = law.axis_segments(1)?;
                let outer = |y0: f64| -> f64 {
                    let mut inner_budget = Budget::new(8_192);
                    quad::integrate_segments(
                        &|y1: f64| {
                            let y = [y0, y1];
                            let rho = law.density(&y).unwrap_or(0.0);
                            let xs = [x[0] + y0, x[1] + y1];
                            (w_i.evaluate(&xs) - wi_x) * (w_j.evaluate(&xs) - wj_x) * rho
                        },
                        &inner_segs,
                        1e-10,
                        &mut inner_budget,
                    )
                    .unwrap_or(f64::NAN)
                };
                let outer_segs = law.axis_segments(0)?;
                let v = lambda
                    * quad::integrate_segments(&outer, &outer_segs, 1e-8, &mut budget)?;
                if !v.is_finite() {
                    return Err(Error::QuadratureBudget {
                        budget: quad::DEFAULT_BUDGET,
                    });
                }
                v
            } else {
                return Err(Error::InvalidModel(
                    "density jump quadrature supports at most two dimensions".into(),
                ));
            }
        }
        Some(JumpMeasure::SymmetricStable { alpha, gamma }) => {
            let a = alpha.eval(x, tau);
            let g = gamma.eval(x, tau);
            let q_jump = |xi: &[f64]| -> f64 {
                let norm = symbols::dot(xi, xi).sqrt();
                g * norm.powf(a)
            };
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, ck) in w_i.coefficients() {
                let xi_k = w_i.frequency(k);
                for (l, cl) in w_j.coefficients() {
                    let xi_l = w_j.frequency(l);
                    let xi_sum: Vec<f64> = xi_k.iter().zip(&xi_l).map(|(a, b)| a + b).collect();
                    let pair_integral = q_jump(&xi_k) + q_jump(&xi_l) - q_jump(&xi_sum);
                    let mut theta = 0.0;
                    for (f, xv) in xi_sum.iter().zip(x) {
                        theta += f * xv;
                    }
                    acc += ck * cl * Complex64::new(theta.cos(), theta.sin()) * pair_integral;
                }
            }
            acc.re
        }
    };

    Ok(diffusion_part + jump_part)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::{GaussianBump, MatrixField, ScalarField};
    use approx::assert_relative_eq;

    const TAU_2PI: f64 = std::f64::consts::TAU;

    fn unit_two_atom_model() -> DrivingModel {
        DrivingModel::new(
            1,
            vec![ScalarField::constant(0.0)],
            MatrixField::zero(1),
            Some(JumpMeasure::atoms(vec![
                (vec![-1.0], 1.0),
                (vec![1.0], 1.0),
            ])),
            Some(vec![TAU_2PI]),
        )
        .unwrap()
    }

    fn brownian_model(c: f64) -> DrivingModel {
        DrivingModel::new(
            1,
            vec![ScalarField::constant(0.0)],
            MatrixField::scalar(c),
            None,
            Some(vec![TAU_2PI]),
        )
        .unwrap()
    }

    fn stable_model(alpha: f64, gamma: f64) -> DrivingModel {
        DrivingModel::new(
            1,
            vec![ScalarField::constant(0.0)],
            MatrixField::zero(1),
            Some(JumpMeasure::SymmetricStable {
                alpha: ScalarField::constant(alpha),
                gamma: ScalarField::constant(gamma),
            }),
            Some(vec![TAU_2PI]),
        )
        .unwrap()
    }

    fn sin1() -> PeriodicFunction {
        PeriodicFunction::sine(vec![TAU_2PI], 0, 1).unwrap()
    }

    #[test]
    fn atoms_applied_to_sine() {
        // sin(x+1) + sin(x-1) - 2 sin(x) = 2 (cos 1 - 1) sin(x); the
        // compensator terms cancel by symmetry.
        let m = unit_two_atom_model();
        let x = std::f64::consts::FRAC_PI_2;
        let direct = (x + 1.0).sin() + (x - 1.0).sin() - 2.0 * x.sin();
        let got = apply_pointwise(&m, &sin1(), &[x]).unwrap();
        assert_relative_eq!(got, direct, epsilon = 1e-12);
        assert_relative_eq!(got, 2.0 * (1.0_f64.cos() - 1.0), epsilon = 1e-12);
    }

    #[test]
    fn half_laplacian_of_sine() {
        let m = brownian_model(1.0);
        let got = apply_pointwise(&m, &sin1(), &[std::f64::consts::FRAC_PI_2]).unwrap();
        assert_relative_eq!(got, -0.5, epsilon = 1e-12);
    }

    #[test]
    fn generator_kills_constants() {
        let w = PeriodicFunction::constant(vec![TAU_2PI], 7.0).unwrap();
        for m in [unit_two_atom_model(), brownian_model(2.0), stable_model(1.5, 1.0)] {
            let v = apply_pointwise(&m, &w, &[0.3]).unwrap();
            assert!(v.abs() < 1e-12);
            let aw = apply_fourier(&m, &w, FrequencyConvention::PerAxis).unwrap();
            assert!(aw.sup_bound() < 1e-15);
        }
    }

    #[test]
    fn spectral_route_matches_pointwise_on_probe_grid() {
        let w = sin1()
            .add(
                &PeriodicFunction::cosine(vec![TAU_2PI], 0, 2)
                    .unwrap()
                    .scaled(0.5),
            )
            .unwrap();
        for m in [unit_two_atom_model(), brownian_model(1.0)] {
            let aw = apply_fourier(&m, &w, FrequencyConvention::PerAxis).unwrap();
            for i in 0..100 {
                let x = [TAU_2PI * i as f64 / 100.0];
                let spectral = aw.evaluate(&x);
                let pointwise = apply_pointwise(&m, &w, &x).unwrap();
                assert!(
                    (spectral - pointwise).abs() < 1e-8,
                    "x={:?}: {spectral} vs {pointwise}",
                    x
                );
            }
        }
    }

    #[test]
    fn spectral_multiplier_of_sine_under_two_atoms() {
        let m = unit_two_atom_model();
        let aw = apply_fourier(&m, &sin1(), FrequencyConvention::PerAxis).unwrap();
        // A sin = 2 (cos 1 - 1) sin, so the +-1 coefficients scale by that factor.
        let factor = 2.0 * (1.0_f64.cos() - 1.0);
        let c = aw.coefficient(&[1]);
        assert_relative_eq!(c.im, -0.5 * factor, epsilon = 1e-13);
        assert_relative_eq!(c.re, 0.0, epsilon = 1e-13);
        assert_eq!(aw.coefficient(&[0]), num_complex::Complex64::new(0.0, 0.0));
    }

    #[test]
    fn brownian_spectral_multiplier() {
        let sigma2 = 0.7;
        let m = brownian_model(sigma2);
        let aw = apply_fourier(&m, &sin1(), FrequencyConvention::PerAxis).unwrap();
        for i in 0..32 {
            let x = [TAU_2PI * i as f64 / 32.0];
            assert_relative_eq!(
                aw.evaluate(&x),
                -0.5 * sigma2 * x[0].sin(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn stable_pointwise_quadrature_matches_spectral() {
        // The split-at-epsilon quadrature and the closed-form symbol route
        // must agree; this pins the stable measure normalization.
        for (alpha, gamma) in [(0.8, 1.0), (1.0, 0.5), (1.5, 1.0), (1.9, 2.0)] {
            let m = stable_model(alpha, gamma);
            let w = sin1();
            let aw = apply_fourier(&m, &w, FrequencyConvention::PerAxis).unwrap();
            for i in 0..7 {
                let x = [TAU_2PI * i as f64 / 7.0];
                let spectral = aw.evaluate(&x);
                let numeric = stable_generator_1d(&w, &x, alpha, gamma).unwrap();
                assert!(
                    (spectral - numeric).abs() < 1e-6,
                    "alpha={alpha} x={}: {spectral} vs {numeric}",
                    x[0]
                );
            }
        }
    }

    #[test]
    fn density_and_atom_generators_agree_for_narrow_bumps() {
        let atoms = DrivingModel::new(
            1,
            vec![ScalarField::constant(0.0)],
            MatrixField::zero(1),
            Some(JumpMeasure::atoms(vec![(vec![-0.5], 1.0), (vec![0.5], 1.0)])),
            Some(vec![TAU_2PI]),
        )
        .unwrap();
        let bumps = DrivingModel::new(
            1,
            vec![ScalarField::constant(0.0)],
            MatrixField::zero(1),
            Some(JumpMeasure::FiniteDensity {
                rate: ScalarField::constant(2.0),
                law: JumpLaw::GaussianBumps(vec![
                    GaussianBump {
                        weight: 0.5,
                        mean: vec![-0.5],
                        std: 1e-3,
                    },
                    GaussianBump {
                        weight: 0.5,
                        mean: vec![0.5],
                        std: 1e-3,
                    },
                ]),
            }),
            Some(vec![TAU_2PI]),
        )
        .unwrap();
        let w = sin1();
        for x in [0.0, 1.0, 2.5] {
            let a = apply_pointwise(&atoms, &w, &[x]).unwrap();
            let b = apply_pointwise(&bumps, &w, &[x]).unwrap();
            assert!((a - b).abs() < 1e-4, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn velocity_is_spectral_and_mean_zero_for_constant_coefficients() {
        let m = unit_two_atom_model();
        let w = vec![sin1()];
        let v = velocity(&m, &w, FrequencyConvention::PerAxis).unwrap();
        let mut out = [0.0];
        // v(x) = 2 (cos 1 - 1) sin x.
        let factor = 2.0 * (1.0_f64.cos() - 1.0);
        let mut mean = 0.0;
        for i in 0..256 {
            let x = [TAU_2PI * i as f64 / 256.0];
            v.eval(&x, &mut out).unwrap();
            assert_relative_eq!(out[0], factor * x[0].sin(), epsilon = 1e-12);
            mean += out[0];
        }
        assert!((mean / 256.0).abs() < 1e-10);
    }

    #[test]
    fn velocity_of_constants_vanishes() {
        let m = brownian_model(1.0);
        let w = vec![PeriodicFunction::constant(vec![TAU_2PI], 3.0).unwrap()];
        let v = velocity(&m, &w, FrequencyConvention::PerAxis).unwrap();
        let mut out = [0.0];
        v.eval(&[1.0], &mut out).unwrap();
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn velocity_components_for_brownian_pair() {
        let m = brownian_model(1.0);
        let w = vec![sin1(), PeriodicFunction::cosine(vec![TAU_2PI], 0, 1).unwrap()];
        let v = velocity(&m, &w, FrequencyConvention::PerAxis).unwrap();
        let mut out = [0.0, 0.0];
        for i in 0..32 {
            let x = [TAU_2PI * i as f64 / 32.0];
            v.eval(&x, &mut out).unwrap();
            assert_relative_eq!(out[0], -0.5 * x[0].sin(), epsilon = 1e-12);
            assert_relative_eq!(out[1], -0.5 * x[0].cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn dissipativity_of_symmetric_models() {
        // Torus average of w * A w is nonpositive for symmetric generators.
        let w = sin1()
            .add(
                &PeriodicFunction::cosine(vec![TAU_2PI], 0, 3)
                    .unwrap()
                    .scaled(0.25),
            )
            .unwrap();
        for m in [unit_two_atom_model(), brownian_model(1.0), stable_model(1.2, 0.7)] {
            let aw = apply_fourier(&m, &w, FrequencyConvention::PerAxis).unwrap();
            let n = 512;
            let mut mean = 0.0;
            for i in 0..n {
                let x = [TAU_2PI * i as f64 / n as f64];
                mean += w.evaluate(&x) * aw.evaluate(&x);
            }
            mean /= n as f64;
            assert!(mean <= 1e-12, "positive dissipativity average {mean}");
        }
    }

    #[test]
    fn carre_du_champ_of_two_atoms_averages_to_paper_constant() {
        let m = unit_two_atom_model();
        let w = sin1();
        let n = 512;
        let mut mean = 0.0;
        for i in 0..n {
            let x = [TAU_2PI * i as f64 / n as f64];
            let g = carre_du_champ(&m, &w, &w, &x).unwrap();
            assert!(g >= -1e-12);
            mean += g;
        }
        mean /= n as f64;
        assert_relative_eq!(mean, 2.0 * (1.0 - 1.0_f64.cos()), epsilon = 1e-10);
    }

    #[test]
    fn carre_du_champ_brownian_is_squared_cosine() {
        let m = brownian_model(1.0);
        let w = sin1();
        for i in 0..32 {
            let x = [TAU_2PI * i as f64 / 32.0];
            let g = carre_du_champ(&m, &w, &w, &x).unwrap();
            assert_relative_eq!(g, x[0].cos().powi(2), epsilon = 1e-12);
        }
    }

    #[test]
    fn carre_du_champ_constant_functions_vanish() {
        let w = PeriodicFunction::constant(vec![TAU_2PI], 5.0).unwrap();
        for m in [unit_two_atom_model(), brownian_model(1.0), stable_model(1.5, 1.0)] {
            let g = carre_du_champ(&m, &w, &w, &[0.4]).unwrap();
            assert!(g.abs() < 1e-14);
        }
    }

    #[test]
    fn carre_du_champ_is_symmetric_and_psd_for_stable() {
        let m = stable_model(1.5, 1.0);
        let wi = sin1();
        let wj = PeriodicFunction::cosine(vec![TAU_2PI], 0, 2).unwrap();
        // Numeric oracle for the stable jump part at a probe point: direct
        // dyadic quadrature of (w(x+y)-w(x))(w(x+y)-w(x)) nu(dy).
        let alpha = 1.5;
        let gamma = 1.0;
        let pref = gamma * stable_measure_constant(alpha);
        let oracle = |wa: &PeriodicFunction, wb: &PeriodicFunction, x: f64| -> f64 {
            let wax = wa.evaluate(&[x]);
            let wbx = wb.evaluate(&[x]);
            let f = |y: f64| {
                (wa.evaluate(&[x + y]) - wax) * (wb.evaluate(&[x + y]) - wbx)
                    * pref
                    * y.abs().powf(-1.0 - alpha)
            };
            let cutoff = 2e4_f64;
            let eps = 1e-6_f64;
            // Taylor value of the mass below eps: the integrand is
            // wa'(x) wb'(x) y^2 + O(y^4) there.
            let mut acc = wa.gradient(&[x])[0]
                * wb.gradient(&[x])[0]
                * pref
                * 2.0
                * eps.powf(2.0 - alpha)
                / (2.0 - alpha);
            for sign in [-1.0, 1.0] {
                let mut lo: f64 = eps;
                while lo < cutoff {
                    let hi = (lo * 2.0).min(cutoff);
                    // Enough panels to resolve the fastest product mode.
                    let mut n = ((hi - lo) / 0.1).ceil() as usize;
                    n = n.clamp(64, 400_000);
                    if n % 2 == 1 {
                        n += 1;
                    }
                    let h = (hi - lo) / n as f64;
                    let mut s = f(sign * lo) + f(sign * hi);
                    for i in 1..n {
                        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(sign * (lo + i as f64 * h));
                    }
                    acc += s * h / 3.0;
                    lo = hi;
                }
            }
            // Beyond the cutoff only the mean of the periodic product
            // survives; it decays at the elementary power-law rate.
            let grid = 512;
            let mut mean = 0.0;
            for i in 0..grid {
                let y = TAU_2PI * i as f64 / grid as f64;
                mean += (wa.evaluate(&[x + y]) - wax) * (wb.evaluate(&[x + y]) - wbx);
            }
            mean /= grid as f64;
            acc += 2.0 * mean * pref * cutoff.powf(-alpha) / alpha;
            acc
        };
        for x in [0.3, 1.7] {
            let ij = carre_du_champ(&m, &wi, &wj, &[x]).unwrap();
            let ji = carre_du_champ(&m, &wj, &wi, &[x]).unwrap();
            assert_relative_eq!(ij, ji, epsilon = 1e-12);
            let diag = carre_du_champ(&m, &wi, &wi, &[x]).unwrap();
            assert!(diag >= -1e-12);
            // Spectral pair formula against the direct quadrature oracle.
            let o_ij = oracle(&wi, &wj, x);
            assert!((ij - o_ij).abs() < 1e-4, "x={x}: {ij} vs oracle {o_ij}");
            let o_ii = oracle(&wi, &wi, x);
            assert!((diag - o_ii).abs() < 1e-4, "x={x}: {diag} vs oracle {o_ii}");
        }
    }

    #[test]
    fn state_dependent_models_reject_spectral_route() {
        let m = DrivingModel::new(
            1,
            vec![ScalarField::Periodic {
                base: 0.0,
                harmonics: vec![crate::symbols::Harmonic {
                    axis: 0,
                    mode: 1,
                    amplitude: 0.5,
                    phase: 0.0,
                }],
            }],
            MatrixField::scalar(1.0),
            None,
            Some(vec![TAU_2PI]),
        )
        .unwrap();
        assert!(matches!(
            apply_fourier(&m, &sin1(), FrequencyConvention::PerAxis),
            Err(Error::RequiresConstantCoefficients)
        ));
        // Pointwise still works: A w = b(x) cos(x) - 0.5 sin(x).
        let x = 0.9_f64;
        let b = 0.5 * x.cos();
        let expect = b * x.cos() - 0.5 * x.sin();
        let got = apply_pointwise(&m, &sin1(), &[x]).unwrap();
        assert_relative_eq!(got, expect, epsilon = 1e-12);
    }
}
