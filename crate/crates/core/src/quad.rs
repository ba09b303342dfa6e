//! Adaptive quadrature used for density jump measures and stable tails.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Values an integrand may produce. Implemented for `f64` and `Complex64`.
pub trait IntegrandValue: Copy {
    fn zero() -> Self;
    fn add(self, other: Self) -> Self;
    fn sub(self, other: Self) -> Self;
    fn scale(self, s: f64) -> Self;
    fn norm(self) -> f64;
}

impl IntegrandValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn sub(self, other: Self) -> Self {
        self - other
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn norm(self) -> f64 {
        self.abs()
    }
}

impl IntegrandValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn sub(self, other: Self) -> Self {
        self - other
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn norm(self) -> f64 {
        num_complex::ComplexFloat::abs(self)
    }
}

fn simpson<T: IntegrandValue>(fa: T, fm: T, fb: T, h: f64) -> T {
    fa.add(fm.scale(4.0)).add(fb).scale(h / 6.0)
}

/// Adaptive Simpson integration of `f` over `[a, b]`.
///
/// `tol` is an absolute tolerance for the whole interval; each refinement
/// halves the local budget in the usual way. `budget` counts function
/// evaluations across calls so that composite integrals share one limit.
pub fn adaptive_simpson<T, F>(f: &F, a: f64, b: f64, tol: f64, budget: &mut Budget) -> Result<T>
where
    T: IntegrandValue,
    F: Fn(f64) -> T,
{
    if a == b {
        return Ok(T::zero());
    }
    let m = 0.5 * (a + b);
    budget.spend(3)?;
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);

    struct Frame<T> {
        a: f64,
        b: f64,
        fa: T,
        fm: T,
        fb: T,
        whole: T,
        tol: f64,
        depth: u32,
    }

    let mut acc = T::zero();
    let mut stack = vec![Frame {
        a,
        b,
        fa,
        fm,
        fb,
        whole,
        tol,
        depth: 0,
    }];
    while let Some(fr) = stack.pop() {
        let m = 0.5 * (fr.a + fr.b);
        let lm = 0.5 * (fr.a + m);
        let rm = 0.5 * (m + fr.b);
        budget.spend(2)?;
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fr.fa, flm, fr.fm, m - fr.a);
        let right = simpson(fr.fm, frm, fr.fb, fr.b - m);
        let delta = left.add(right).sub(fr.whole);
        if delta.norm() <= 15.0 * fr.tol || fr.depth >= 48 {
            acc = acc.add(left).add(right).add(delta.scale(1.0 / 15.0));
        } else {
            stack.push(Frame {
                a: fr.a,
                b: m,
                fa: fr.fa,
                fm: flm,
                fb: fr.fm,
                whole: left,
                tol: 0.5 * fr.tol,
                depth: fr.depth + 1,
            });
            stack.push(Frame {
                a: m,
                b: fr.b,
                fa: fr.fm,
                fm: frm,
                fb: fr.fb,
                whole: right,
                tol: 0.5 * fr.tol,
                depth: fr.depth + 1,
            });
        }
    }
    Ok(acc)
}

/// Integrates over a union of segments, splitting the tolerance evenly.
pub fn integrate_segments<T, F>(
    f: &F,
    segments: &[(f64, f64)],
    tol: f64,
    budget: &mut Budget,
) -> Result<T>
where
    T: IntegrandValue,
    F: Fn(f64) -> T,
{
    let n = segments.len().max(1);
    let mut acc = T::zero();
    for &(a, b) in segments {
        acc = acc.add(adaptive_simpson(f, a, b, tol / n as f64, budget)?);
    }
    Ok(acc)
}

/// Composite Simpson rule with a fixed even panel count. Used where the
/// integrand oscillates at a known frequency and the panel width must be
/// chosen up front (adaptive rules can accept spuriously when both estimates
/// alias the same unresolved oscillation).
pub fn composite_simpson<F>(f: &F, lo: f64, hi: f64, mut n: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    if n % 2 == 1 {
        n += 1;
    }
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// Shared evaluation budget for one logical integral.
pub struct Budget {
    remaining: usize,
    total: usize,
}

impl Budget {
    pub fn new(total: usize) -> Self {
        Self {
            remaining: total,
            total,
        }
    }

    fn spend(&mut self, n: usize) -> Result<()> {
        if self.remaining < n {
            return Err(Error::QuadratureBudget { budget: self.total });
        }
        self.remaining -= n;
        Ok(())
    }
}

/// Default evaluation budget for one symbol or generator quadrature.
pub const DEFAULT_BUDGET: usize = 1_000_000;

/// Default absolute tolerance target; callers scale it by the expected
/// magnitude when a relative target is wanted.
pub const DEFAULT_TOL: f64 = 1e-9;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomial_exactly() {
        let mut budget = Budget::new(10_000);
        let v: f64 = adaptive_simpson(&|x: f64| x * x * x, 0.0, 2.0, 1e-12, &mut budget).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn integrates_oscillatory_kernel() {
        let mut budget = Budget::new(200_000);
        let v: Complex64 = adaptive_simpson(
            &|x: f64| Complex64::new(0.0, 3.0 * x).exp(),
            0.0,
            std::f64::consts::PI,
            1e-11,
            &mut budget,
        )
        .unwrap();
        // int_0^pi e^{3ix} dx = (e^{3i pi} - 1) / (3i) = (-2)/(3i) = 2i/3
        assert!((v - Complex64::new(0.0, 2.0 / 3.0)).norm() < 1e-9);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let mut budget = Budget::new(16);
        let r: Result<f64> =
            adaptive_simpson(&|x: f64| (50.0 * x).sin().abs(), 0.0, 10.0, 1e-14, &mut budget);
        assert!(matches!(r, Err(Error::QuadratureBudget { .. })));
    }
}
