//! Periodic test functions on the torus `R^d / tau Z^d`.
//!
//! Test functions are band-limited by construction: a function is a finite
//! Fourier series
//!
//! ```text
//! w(x) = sum_k  w_hat(k) exp( i 2 pi sum_j k_j x_j / tau_j ),   k in Z^d
//! ```
//!
//! with conjugate-symmetric coefficients, so every evaluation is exactly
//! real and the function is automatically smooth with bounded derivatives.
//! Derivatives are computed term by term, which keeps gradients and second
//! derivatives exact rather than approximated.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};

const TWO_PI: f64 = std::f64::consts::TAU;

/// A point on the fundamental cell `[0, tau_1) x ... x [0, tau_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusPoint {
    coords: Vec<f64>,
}

impl TorusPoint {
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// Componentwise reduction of `x` modulo the period vector.
pub fn project(x: &[f64], tau: &[f64]) -> TorusPoint {
    let mut coords = vec![0.0; x.len()];
    project_into(x, tau, &mut coords);
    TorusPoint { coords }
}

/// Allocation-free form of [`project`] for hot loops.
pub fn project_into(x: &[f64], tau: &[f64], out: &mut [f64]) {
    for ((o, &xi), &t) in out.iter_mut().zip(x).zip(tau) {
        let mut r = xi.rem_euclid(t);
        // rem_euclid can round up to exactly t for tiny negative inputs.
        if r >= t {
            r = 0.0;
        }
        *o = r;
    }
}

/// A real-valued tau-periodic function with finite Fourier support.
#[derive(Debug, Clone)]
pub struct PeriodicFunction {
    period: Vec<f64>,
    coeffs: BTreeMap<Vec<i64>, Complex64>,
    label: Option<String>,
}

impl PeriodicFunction {
    /// Builds a function from `(k, w_hat(k))` pairs.
    ///
    /// The map must be conjugate-symmetric (`w_hat(-k) = conj(w_hat(k))`)
    /// within `1e-12` of the largest coefficient; it is then symmetrized
    /// exactly so that evaluations are real to machine precision.
    pub fn from_coefficients(
        period: Vec<f64>,
        entries: impl IntoIterator<Item = (Vec<i64>, Complex64)>,
    ) -> Result<Self> {
        if period.is_empty() || period.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidModel(
                "period components must be positive and finite".into(),
            ));
        }
        let dim = period.len();
        let mut raw: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
        for (k, c) in entries {
            if k.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: k.len(),
                });
            }
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::InvalidModel("non-finite Fourier coefficient".into()));
            }
            *raw.entry(k).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        let scale = raw
            .values()
            .map(|c| c.norm())
            .fold(0.0_f64, f64::max)
            .max(1.0);
        for (k, c) in &raw {
            let neg: Vec<i64> = k.iter().map(|v| -v).collect();
            let mirrored = raw.get(&neg).copied().unwrap_or(Complex64::new(0.0, 0.0));
            if (mirrored.conj() - c).norm() > 1e-12 * scale {
                return Err(Error::InvalidModel(format!(
                    "coefficient map is not conjugate-symmetric at k = {k:?}; \
                     the function would not be real-valued"
                )));
            }
        }
        // Exact symmetrization: store c(k) and conj(c(k)) at -k.
        let mut coeffs = BTreeMap::new();
        for (k, c) in &raw {
            let neg: Vec<i64> = k.iter().map(|v| -v).collect();
            let mirrored = raw.get(&neg).copied().unwrap_or(Complex64::new(0.0, 0.0));
            let mut sym = 0.5 * (c + mirrored.conj());
            if k.iter().all(|&v| v == 0) {
                sym = Complex64::new(sym.re, 0.0);
            }
            if sym.norm() > 0.0 {
                coeffs.insert(k.clone(), sym);
            }
        }
        Ok(Self {
            period,
            coeffs,
            label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// `sin(2 pi m x_axis / tau_axis)`.
    pub fn sine(period: Vec<f64>, axis: usize, mode: i64) -> Result<Self> {
        let dim = period.len();
        if axis >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: axis,
            });
        }
        let mut k = vec![0i64; dim];
        k[axis] = mode;
        let mut neg = vec![0i64; dim];
        neg[axis] = -mode;
        Self::from_coefficients(
            period,
            [
                (k, Complex64::new(0.0, -0.5)),
                (neg, Complex64::new(0.0, 0.5)),
            ],
        )
        .map(|f| f.with_label(format!("sin[{axis};{mode}]")))
    }

    /// `cos(2 pi m x_axis / tau_axis)`.
    pub fn cosine(period: Vec<f64>, axis: usize, mode: i64) -> Result<Self> {
        let dim = period.len();
        if axis >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: axis,
            });
        }
        let mut k = vec![0i64; dim];
        k[axis] = mode;
        let mut neg = vec![0i64; dim];
        neg[axis] = -mode;
        Self::from_coefficients(
            period,
            [
                (k, Complex64::new(0.5, 0.0)),
                (neg, Complex64::new(0.5, 0.0)),
            ],
        )
        .map(|f| f.with_label(format!("cos[{axis};{mode}]")))
    }

    pub fn constant(period: Vec<f64>, value: f64) -> Result<Self> {
        let dim = period.len();
        Self::from_coefficients(period, [(vec![0i64; dim], Complex64::new(value, 0.0))])
            .map(|f| f.with_label("const"))
    }

    /// Pointwise sum of two functions over the same period.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.period != other.period {
            return Err(Error::PeriodMismatch);
        }
        let entries = self
            .coeffs
            .iter()
            .chain(other.coeffs.iter())
            .map(|(k, c)| (k.clone(), *c));
        Self::from_coefficients(self.period.clone(), entries)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c *= s;
        }
        out
    }

    pub fn period(&self) -> &[f64] {
        &self.period
    }

    pub fn dim(&self) -> usize {
        self.period.len()
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    /// Coefficient at `k` (zero when absent from the support).
    pub fn coefficient(&self, k: &[i64]) -> Complex64 {
        self.coeffs
            .get(k)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (&[i64], Complex64)> {
        self.coeffs.iter().map(|(k, c)| (k.as_slice(), *c))
    }

    pub fn support_radius(&self) -> i64 {
        self.coeffs
            .keys()
            .map(|k| k.iter().map(|v| v.abs()).max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// Sum over the support of `|k|^2 |w_hat(k)|` (Euclidean `|k|`).
    pub fn smoothness_sum(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(k, c)| {
                let k2: f64 = k.iter().map(|&v| (v * v) as f64).sum();
                k2 * c.norm()
            })
            .sum()
    }

    /// Upper bound on `sup |w|` via the l1 norm of the coefficients.
    pub fn sup_bound(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }

    /// Per-axis dual frequency of a lattice point: `xi_j = 2 pi k_j / tau_j`.
    pub fn frequency(&self, k: &[i64]) -> Vec<f64> {
        k.iter()
            .zip(&self.period)
            .map(|(&kj, &tj)| TWO_PI * kj as f64 / tj)
            .collect()
    }

    fn phase(&self, k: &[i64], x: &[f64]) -> f64 {
        let mut theta = 0.0;
        for ((&kj, &tj), &xj) in k.iter().zip(&self.period).zip(x) {
            theta += TWO_PI * kj as f64 * xj / tj;
        }
        theta
    }

    /// Evaluates the series at `x`. The result is exactly real because the
    /// sum runs over `+-k` pairs.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (k, c) in &self.coeffs {
            if !is_canonical(k) {
                continue;
            }
            let theta = self.phase(k, x);
            if k.iter().all(|&v| v == 0) {
                acc += c.re;
            } else {
                acc += 2.0 * (c.re * theta.cos() - c.im * theta.sin());
            }
        }
        acc
    }

    /// Exact term-by-term gradient.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.dim()];
        for (k, c) in &self.coeffs {
            if !is_canonical(k) || k.iter().all(|&v| v == 0) {
                continue;
            }
            let theta = self.phase(k, x);
            // d/dx_p of 2 Re(c e^{i theta}) = -2 xi_p (c.re sin + c.im cos)
            let s = theta.sin();
            let co = theta.cos();
            for (p, g) in grad.iter_mut().enumerate() {
                let xi_p = TWO_PI * k[p] as f64 / self.period[p];
                *g += -2.0 * xi_p * (c.re * s + c.im * co);
            }
        }
        grad
    }

    /// Exact second partial derivative `d^2 w / dx_p dx_q`.
    pub fn second_partial(&self, x: &[f64], p: usize, q: usize) -> f64 {
        let mut acc = 0.0;
        for (k, c) in &self.coeffs {
            if !is_canonical(k) || k.iter().all(|&v| v == 0) {
                continue;
            }
            let theta = self.phase(k, x);
            let xi_p = TWO_PI * k[p] as f64 / self.period[p];
            let xi_q = TWO_PI * k[q] as f64 / self.period[q];
            acc += -2.0 * xi_p * xi_q * (c.re * theta.cos() - c.im * theta.sin());
        }
        acc
    }

    /// `1/2 sum_{p,q} a_{pq} d^2 w / dx_p dx_q` for a symmetric matrix `a`
    /// in row-major layout.
    pub fn hessian_trace_form(&self, x: &[f64], a: &[f64]) -> f64 {
        let d = self.dim();
        debug_assert_eq!(a.len(), d * d);
        let mut acc = 0.0;
        for (k, c) in &self.coeffs {
            if !is_canonical(k) || k.iter().all(|&v| v == 0) {
                continue;
            }
            let theta = self.phase(k, x);
            let mut quad = 0.0;
            for p in 0..d {
                let xi_p = TWO_PI * k[p] as f64 / self.period[p];
                for q in 0..d {
                    let xi_q = TWO_PI * k[q] as f64 / self.period[q];
                    quad += a[p * d + q] * xi_p * xi_q;
                }
            }
            acc += -quad * (c.re * theta.cos() - c.im * theta.sin());
        }
        acc
    }

    /// Flattens into amplitude/phase modes for fast repeated evaluation.
    pub fn compiled(&self) -> CompiledSeries {
        let mut constant = 0.0;
        let mut modes = Vec::new();
        for (k, c) in &self.coeffs {
            if k.iter().all(|&v| v == 0) {
                constant = c.re;
                continue;
            }
            if !is_canonical(k) {
                continue;
            }
            modes.push(CompiledMode {
                freq: self.frequency(k),
                amplitude: 2.0 * c.norm(),
                phase: c.im.atan2(c.re),
            });
        }
        CompiledSeries { constant, modes }
    }
}

fn is_canonical(k: &[i64]) -> bool {
    for &v in k {
        if v > 0 {
            return true;
        }
        if v < 0 {
            return false;
        }
    }
    true // k = 0
}

/// Real cosine-mode form of a band-limited function: fast to evaluate and
/// free of complex arithmetic in simulation loops.
#[derive(Debug, Clone)]
pub struct CompiledSeries {
    constant: f64,
    modes: Vec<CompiledMode>,
}

#[derive(Debug, Clone)]
struct CompiledMode {
    freq: Vec<f64>,
    amplitude: f64,
    phase: f64,
}

impl CompiledSeries {
    #[inline]
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let mut acc = self.constant;
        for m in &self.modes {
            let mut theta = m.phase;
            for (f, xi) in m.freq.iter().zip(x) {
                theta += f * xi;
            }
            acc += m.amplitude * theta.cos();
        }
        acc
    }
}

/// Discrete Fourier coefficients of a sampled tau-periodic function.
///
/// Samples are taken on the uniform grid `x_j = tau_j * i / n` per axis; the
/// trapezoid rule on a full period reduces to the plain average, which
/// recovers band-limited functions exactly when `n >= 2 k_max + 2`.
pub fn fourier_coefficients<F>(
    f: F,
    period: &[f64],
    grid_per_axis: usize,
    k_max: i64,
) -> Result<PeriodicFunction>
where
    F: Fn(&[f64]) -> f64,
{
    let dim = period.len();
    let need = 2 * k_max.unsigned_abs() as usize + 2;
    if grid_per_axis < need {
        return Err(Error::GridTooCoarse {
            need,
            got: grid_per_axis,
        });
    }
    let total = grid_per_axis.checked_pow(dim as u32).ok_or_else(|| {
        Error::InvalidModel("sample grid too large".into())
    })?;
    if total > (1 << 24) {
        return Err(Error::InvalidModel("sample grid too large".into()));
    }

    // Sample once.
    let mut samples = Vec::with_capacity(total);
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    for _ in 0..total {
        for j in 0..dim {
            x[j] = period[j] * idx[j] as f64 / grid_per_axis as f64;
        }
        samples.push(f(&x));
        for j in (0..dim).rev() {
            idx[j] += 1;
            if idx[j] < grid_per_axis {
                break;
            }
            idx[j] = 0;
        }
    }

    // DFT over the lattice box |k|_inf <= k_max.
    let mut entries = Vec::new();
    let mut k = vec![-k_max; dim];
    loop {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut idx = vec![0usize; dim];
        for s in &samples {
            let mut theta = 0.0;
            for j in 0..dim {
                theta -= TWO_PI * k[j] as f64 * idx[j] as f64 / grid_per_axis as f64;
            }
            acc += s * Complex64::new(theta.cos(), theta.sin());
            for j in (0..dim).rev() {
                idx[j] += 1;
                if idx[j] < grid_per_axis {
                    break;
                }
                idx[j] = 0;
            }
        }
        acc /= total as f64;
        if acc.norm() > 1e-13 {
            entries.push((k.clone(), acc));
        }
        let mut j = dim;
        loop {
            if j == 0 {
                break;
            }
            j -= 1;
            k[j] += 1;
            if k[j] <= k_max {
                break;
            }
            k[j] = -k_max;
        }
        if j == 0 && k[0] == -k_max {
            break;
        }
    }
    PeriodicFunction::from_coefficients(period.to_vec(), entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const TAU_2PI: f64 = std::f64::consts::TAU;

    fn sin1() -> PeriodicFunction {
        PeriodicFunction::sine(vec![TAU_2PI], 0, 1).unwrap()
    }

    #[test]
    fn projection_wraps_into_cell() {
        let p = project(&[7.0], &[TAU_2PI]);
        assert_relative_eq!(p.coords()[0], 7.0 - TAU_2PI, epsilon = 1e-12);

        let p = project(&[-0.5], &[2.0]);
        assert_relative_eq!(p.coords()[0], 1.5, epsilon = 1e-12);

        let p = project(&[3.0, 5.0], &[2.0, 2.0]);
        assert_relative_eq!(p.coords()[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.coords()[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn projection_is_idempotent() {
        let tau = [TAU_2PI, 3.0];
        let x = [-17.25, 41.5];
        let once = project(&x, &tau);
        let twice = project(once.coords(), &tau);
        assert_eq!(once, twice);
        for (c, t) in once.coords().iter().zip(&tau) {
            assert!(*c >= 0.0 && *c < *t);
        }
    }

    /// Independent oracle: Riemann-sum Fourier coefficient of a closure.
    fn coeff_oracle(f: impl Fn(f64) -> f64, k: i64, tau: f64) -> Complex64 {
        let n = 20_000;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let x = tau * i as f64 / n as f64;
            let theta = -TWO_PI * k as f64 * x / tau;
            acc += f(x) * Complex64::new(theta.cos(), theta.sin());
        }
        acc / n as f64
    }

    #[test]
    fn sine_coefficients_match_integral_definition() {
        // Direct integration gives w_hat(+-1) = -+ i/2 for sin.
        let expect = coeff_oracle(f64::sin, 1, TAU_2PI);
        assert!((expect - Complex64::new(0.0, -0.5)).norm() < 1e-9);
        let w = sin1();
        assert!((w.coefficient(&[1]) - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        assert!((w.coefficient(&[-1]) - Complex64::new(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn evaluates_named_primitives() {
        let w = sin1();
        assert_relative_eq!(w.evaluate(&[std::f64::consts::FRAC_PI_2]), 1.0, epsilon = 1e-12);

        let c = PeriodicFunction::cosine(vec![TAU_2PI], 0, 1).unwrap();
        assert_relative_eq!(c.evaluate(&[0.0]), 1.0, epsilon = 1e-12);

        let k = PeriodicFunction::constant(vec![TAU_2PI], 2.5).unwrap();
        assert_relative_eq!(k.evaluate(&[1.234]), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_symmetric_coefficients() {
        let r = PeriodicFunction::from_coefficients(
            vec![TAU_2PI],
            [(vec![1], Complex64::new(0.3, 0.1))],
        );
        assert!(r.is_err());
    }

    #[test]
    fn dft_recovers_sine() {
        let w = fourier_coefficients(|x| x[0].sin(), &[TAU_2PI], 64, 4).unwrap();
        assert!((w.coefficient(&[1]) - Complex64::new(0.0, -0.5)).norm() < 1e-12);
        assert!((w.coefficient(&[-1]) - Complex64::new(0.0, 0.5)).norm() < 1e-12);
        for k in [-4i64, -3, -2, 0, 2, 3, 4] {
            assert!(w.coefficient(&[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn dft_of_zero_function_is_empty() {
        let w = fourier_coefficients(|_| 0.0, &[TAU_2PI], 32, 3).unwrap();
        assert_eq!(w.coefficients().count(), 0);
    }

    #[test]
    fn dft_resolves_squared_sine() {
        // sin^2 = 1/2 - cos(2x)/2, so w_hat(0) = 1/2 and w_hat(+-2) = -1/4.
        let w = fourier_coefficients(|x| x[0].sin().powi(2), &[TAU_2PI], 64, 4).unwrap();
        assert!((w.coefficient(&[0]) - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        assert!((w.coefficient(&[2]) - Complex64::new(-0.25, 0.0)).norm() < 1e-12);
        assert!((w.coefficient(&[-2]) - Complex64::new(-0.25, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn dft_requires_fine_enough_grid() {
        let r = fourier_coefficients(|x| x[0].sin(), &[TAU_2PI], 8, 4);
        assert!(matches!(r, Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn gradient_of_named_functions() {
        let w = sin1();
        let g = w.gradient(&[0.0]);
        assert_relative_eq!(g[0], 1.0, epsilon = 1e-12);

        let k = PeriodicFunction::constant(vec![TAU_2PI], 4.0).unwrap();
        assert_eq!(k.gradient(&[0.7])[0], 0.0);
    }

    #[test]
    fn hessian_form_matches_half_laplacian() {
        let w = sin1();
        // 1/2 * 1 * d^2 sin / dx^2 at 0 is 0; at pi/2 it is -1/2.
        assert_relative_eq!(w.hessian_trace_form(&[0.0], &[1.0]), 0.0, epsilon = 1e-12);
        assert_relative_eq!(
            w.hessian_trace_form(&[std::f64::consts::FRAC_PI_2], &[1.0]),
            -0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn compiled_series_agrees_with_evaluate() {
        let w = sin1()
            .add(&PeriodicFunction::cosine(vec![TAU_2PI], 0, 2).unwrap().scaled(0.5))
            .unwrap();
        let c = w.compiled();
        for i in 0..64 {
            let x = [TAU_2PI * i as f64 / 64.0 - 2.0];
            assert_relative_eq!(c.evaluate(&x), w.evaluate(&x), epsilon = 1e-13);
        }
    }

    fn arbitrary_band_limited() -> impl Strategy<Value = PeriodicFunction> {
        proptest::collection::vec((-4i64..=4, -1.0f64..1.0, -1.0f64..1.0), 1..5).prop_map(
            |entries| {
                let coeffs = entries
                    .into_iter()
                    .flat_map(|(k, re, im)| {
                        [
                            (vec![k], Complex64::new(re, im)),
                            (vec![-k], Complex64::new(re, -im)),
                        ]
                    })
                    .collect::<Vec<_>>();
                PeriodicFunction::from_coefficients(vec![TAU_2PI], coeffs).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn evaluation_is_periodic(w in arbitrary_band_limited(), x in -10.0f64..10.0, n in -3i64..=3) {
            let shifted = x + n as f64 * TAU_2PI;
            prop_assert!((w.evaluate(&[x]) - w.evaluate(&[shifted])).abs() < 1e-10);
        }

        #[test]
        fn parseval_identity(w in arbitrary_band_limited()) {
            // Mean of w^2 over one period equals sum |w_hat(k)|^2.
            let n = 512;
            let mut mean = 0.0;
            for i in 0..n {
                let x = TAU_2PI * i as f64 / n as f64;
                mean += w.evaluate(&[x]).powi(2);
            }
            mean /= n as f64;
            let sum: f64 = w.coefficients().map(|(_, c)| c.norm_sqr()).sum();
            prop_assert!((mean - sum).abs() < 1e-8);
        }

        #[test]
        fn gradient_matches_finite_differences(w in arbitrary_band_limited(), x in -5.0f64..5.0) {
            let h = 1e-4;
            let fd = (w.evaluate(&[x + h]) - w.evaluate(&[x - h])) / (2.0 * h);
            let g = w.gradient(&[x])[0];
            // Central differences are O(h^2) with a curvature constant bounded
            // by the third-derivative series sum.
            let bound: f64 = w
                .coefficients()
                .map(|(k, c)| (k[0].abs() as f64).powi(3) * c.norm())
                .sum::<f64>()
                .max(1.0);
            prop_assert!((fd - g).abs() <= 10.0 * h * h * bound);
        }

        #[test]
        fn dft_round_trip_recovers_band_limited(w in arbitrary_band_limited()) {
            let back = fourier_coefficients(|x| w.evaluate(x), &[TAU_2PI], 32, 4).unwrap();
            for k in -4i64..=4 {
                prop_assert!((back.coefficient(&[k]) - w.coefficient(&[k])).norm() < 1e-10);
            }
        }
    }
}
