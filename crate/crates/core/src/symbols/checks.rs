//! Numeric checkers for the analytic conditions a driving model must (or
//! should) satisfy: spectral positivity on the dual lattice, summability of
//! weighted Fourier coefficients, the sector condition, and heat-kernel
//! integrability diagnostics.

use crate::error::{Error, Result};
use crate::symbols::{eval_symbol, DrivingModel, FrequencyConvention, JumpMeasure};
use crate::torus::PeriodicFunction;

/// Absolute tolerance below which a real part of the symbol counts as
/// "suspiciously close to zero". Exact zeros fail, near-zeros are reported
/// as inconclusive.
pub const EPS_SPECTRUM_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum ErgodicityVerdict {
    /// `Re q > 0` strictly on every checked nonzero lattice point.
    Pass,
    /// First lattice point with an exactly vanishing real part.
    Fail { k0: Vec<i64> },
    /// No exact zero, but some value within [`EPS_SPECTRUM_ZERO`] of zero.
    Inconclusive { k_near: Vec<i64>, re_q: f64 },
}

/// Checks strict positivity of `Re q` on the nonzero dual lattice up to
/// `|k|_inf <= k_max` (the spectral ergodicity criterion for the projected
/// process).
pub fn check_ergodicity_condition(
    model: &DrivingModel,
    k_max: i64,
    convention: FrequencyConvention,
) -> Result<ErgodicityVerdict> {
    if !model.is_levy() {
        return Err(Error::RequiresConstantCoefficients);
    }
    let tau = model.period().ok_or(Error::RequiresPeriod)?.to_vec();
    let origin = vec![0.0; model.dim()];
    let mut near: Option<(Vec<i64>, f64)> = None;
    for k in lattice_points(model.dim(), k_max) {
        let xi = convention.frequency(&k, &tau);
        let re_q = eval_symbol(model, &origin, &xi)?.re();
        if re_q == 0.0 {
            return Ok(ErgodicityVerdict::Fail { k0: k });
        }
        if re_q.abs() <= EPS_SPECTRUM_ZERO && near.is_none() {
            near = Some((k, re_q));
        }
    }
    Ok(match near {
        Some((k_near, re_q)) => ErgodicityVerdict::Inconclusive { k_near, re_q },
        None => ErgodicityVerdict::Pass,
    })
}

/// Nonzero lattice points of `Z^d` with `|k|_inf <= k_max`, enumerated shell
/// by shell; within a shell points are ordered by absolute value first and
/// positive components before negative ones, so the "first" failure in one
/// dimension is `k = 1` rather than `k = -1`.
pub fn lattice_points(dim: usize, k_max: i64) -> Vec<Vec<i64>> {
    let mut shells: Vec<Vec<Vec<i64>>> = vec![Vec::new(); k_max as usize + 1];
    let mut k = vec![-k_max; dim];
    loop {
        let norm = k.iter().map(|v| v.abs()).max().unwrap_or(0);
        if norm > 0 {
            shells[norm as usize].push(k.clone());
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
    let mut out = Vec::new();
    for shell in shells.into_iter().skip(1) {
        let mut shell = shell;
        shell.sort_by_key(|k| {
            (
                k.iter().map(|v| v.abs()).collect::<Vec<_>>(),
                k.iter().map(|v| *v < 0).collect::<Vec<_>>(),
            )
        });
        out.extend(shell);
    }
    out
}

/// One shell of the weighted coefficient sum.
#[derive(Debug, Clone)]
pub struct ShellSum {
    pub radius: i64,
    pub sum: f64,
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SummabilityVerdict {
    /// Single occupied shell; the sum is trivially finite.
    FiniteSupport,
    /// Successive shell sums decay; the ratio of the last two is reported.
    Converging { shell_ratio: f64 },
    /// Shell sums decay slowly or not at all over the occupied range.
    SlowDecay { shell_ratio: f64 },
}

#[derive(Debug, Clone)]
pub struct SummabilityReport {
    pub total: f64,
    pub shells: Vec<ShellSum>,
    pub verdict: SummabilityVerdict,
}

/// Partial sums of `|k|^2 |w_hat(k)| (1 + Re q(xi_k)^{-2})` over lattice
/// shells. Finite by construction for band-limited functions; the verdict is
/// a heuristic on the shell-to-shell decay.
pub fn check_summability(
    w: &PeriodicFunction,
    model: &DrivingModel,
    convention: FrequencyConvention,
) -> Result<SummabilityReport> {
    if !model.is_levy() {
        return Err(Error::RequiresConstantCoefficients);
    }
    let tau = model.period().ok_or(Error::RequiresPeriod)?.to_vec();
    let origin = vec![0.0; model.dim()];

    let radius = w.support_radius();
    let mut support: Vec<Vec<i64>> = w.coefficients().map(|(k, _)| k.to_vec()).collect();
    support.sort_by_key(|k| {
        (
            k.iter().map(|v| v.abs()).max().unwrap_or(0),
            k.iter().map(|v| v.abs()).collect::<Vec<_>>(),
            k.iter().map(|v| *v < 0).collect::<Vec<_>>(),
        )
    });
    let mut shells = Vec::new();
    let mut cumulative = 0.0;
    for r in 1..=radius {
        let mut sum = 0.0;
        for k in support
            .iter()
            .filter(|k| k.iter().map(|v| v.abs()).max().unwrap_or(0) == r)
        {
            let xi = convention.frequency(k, &tau);
            let re_q = eval_symbol(model, &origin, &xi)?.re();
            if re_q == 0.0 {
                return Err(Error::SpectrumZero { k: k.to_vec() });
            }
            let k2: f64 = k.iter().map(|&v| (v * v) as f64).sum();
            sum += k2 * w.coefficient(k).norm() * (1.0 + re_q.powi(-2));
        }
        cumulative += sum;
        shells.push(ShellSum {
            radius: r,
            sum,
            cumulative,
        });
    }

    let occupied: Vec<&ShellSum> = shells.iter().filter(|s| s.sum > 0.0).collect();
    let verdict = if occupied.len() <= 1 {
        SummabilityVerdict::FiniteSupport
    } else {
        let last = occupied[occupied.len() - 1].sum;
        let prev = occupied[occupied.len() - 2].sum;
        let ratio = last / prev;
        if ratio >= 0.9 {
            SummabilityVerdict::SlowDecay { shell_ratio: ratio }
        } else {
            SummabilityVerdict::Converging { shell_ratio: ratio }
        }
    };
    Ok(SummabilityReport {
        total: cumulative,
        shells,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum SectorVerdict {
    /// `sup_x |Im q| <= c inf_x Re q` on the probes with the reported `c < 1`.
    Pass { c: f64 },
    /// Either the real part vanishes where the imaginary part does not, or
    /// the best constant is >= 1.
    Fail { c: f64, xi: Vec<f64> },
}

/// Estimates the sector constant on a probe grid of `(x, xi)` pairs.
pub fn check_sector_condition(
    model: &DrivingModel,
    xs: &[Vec<f64>],
    xis: &[Vec<f64>],
) -> Result<SectorVerdict> {
    let mut worst_c = 0.0_f64;
    let mut worst_xi: Option<Vec<f64>> = None;
    for xi in xis {
        if xi.iter().all(|&v| v == 0.0) {
            continue;
        }
        let mut sup_im = 0.0_f64;
        let mut inf_re = f64::INFINITY;
        for x in xs {
            let q = eval_symbol(model, x, xi)?;
            sup_im = sup_im.max(q.im().abs());
            inf_re = inf_re.min(q.re());
        }
        if inf_re <= 1e-14 {
            if sup_im > 1e-12 {
                return Ok(SectorVerdict::Fail {
                    c: f64::INFINITY,
                    xi: xi.clone(),
                });
            }
            continue; // 0/0: symbol vanishes identically at this probe
        }
        let c = sup_im / inf_re;
        if c > worst_c {
            worst_c = c;
            worst_xi = Some(xi.clone());
        }
    }
    if worst_c < 1.0 {
        Ok(SectorVerdict::Pass { c: worst_c })
    } else {
        Ok(SectorVerdict::Fail {
            c: worst_c,
            xi: worst_xi.unwrap_or_default(),
        })
    }
}

/// Default probe frequencies for the sector check: dual-lattice multiples
/// when a period is available, otherwise a fixed dyadic ladder.
pub fn default_sector_probes(model: &DrivingModel) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let xs = model.probe_points();
    let mut xis = Vec::new();
    match model.period() {
        Some(tau) => {
            for k in lattice_points(model.dim(), 4) {
                xis.push(FrequencyConvention::PerAxis.frequency(&k, tau));
            }
        }
        None => {
            for mag in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
                for axis in 0..model.dim() {
                    let mut v = vec![0.0; model.dim()];
                    v[axis] = mag;
                    xis.push(v.clone());
                    v[axis] = -mag;
                    xis.push(v);
                }
            }
        }
    }
    (xs, xis)
}

/// Diagnostic report on `int exp(-t inf_x Re q(x, xi)) d xi`.
#[derive(Debug, Clone)]
pub struct HeatKernelReport {
    pub radii: Vec<f64>,
    pub integrand: Vec<f64>,
    /// Trapezoid value of the integral over `|xi| <= R`.
    pub integral: f64,
    /// `g(R) / g(R/2)`; close to 1 means the integrand has stopped decaying.
    pub tail_ratio: f64,
    /// Fitted `p` in `-log g ~ r^p` over the outer half of the grid, when
    /// the integrand still decays there.
    pub decay_exponent: Option<f64>,
    /// Bounded-symbol signature: the integrand plateaus at a positive level,
    /// so the integral over all of `R^d` cannot be finite.
    pub flat_tail: bool,
}

/// Integrates `exp[-t inf_x Re q(x, xi)]` radially up to `|xi| = r_max`.
/// Diagnostic only: no hard verdict is attached.
pub fn check_heat_kernel_integrability(
    model: &DrivingModel,
    t: f64,
    r_max: f64,
    n_grid: usize,
) -> Result<HeatKernelReport> {
    let dim = model.dim();
    let xs = model.probe_points();
    // Axis directions plus the main diagonal.
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for axis in 0..dim {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        dirs.push(v);
    }
    if dim > 1 {
        let norm = (dim as f64).sqrt();
        dirs.push(vec![1.0 / norm; dim]);
    }

    let mut radii = Vec::with_capacity(n_grid + 1);
    let mut integrand = Vec::with_capacity(n_grid + 1);
    for i in 0..=n_grid {
        let r = r_max * i as f64 / n_grid as f64;
        let mut inf_re = f64::INFINITY;
        for dir in &dirs {
            let xi: Vec<f64> = dir.iter().map(|d| d * r).collect();
            for x in &xs {
                inf_re = inf_re.min(eval_symbol(model, x, &xi)?.re());
            }
        }
        radii.push(r);
        integrand.push((-t * inf_re).exp());
    }

    // Surface measure factor: 2 in 1-d, 2 pi r in 2-d, etc.
    let surface = |r: f64| -> f64 {
        match dim {
            1 => 2.0,
            2 => std::f64::consts::TAU * r,
            _ => {
                let d = dim as f64;
                d * std::f64::consts::PI.powf(d / 2.0)
                    / statrs::function::gamma::gamma(d / 2.0 + 1.0)
                    * r.powf(d - 1.0)
            }
        }
    };
    let mut integral = 0.0;
    for i in 1..radii.len() {
        let h = radii[i] - radii[i - 1];
        integral += 0.5
            * h
            * (integrand[i] * surface(radii[i]) + integrand[i - 1] * surface(radii[i - 1]));
    }

    let g_end = integrand[n_grid];
    let g_half = integrand[n_grid / 2];
    let tail_ratio = if g_half > 0.0 { g_end / g_half } else { 1.0 };

    // Bounded symbols saturate: the deepest decay level reached on the outer
    // half of the grid is no deeper than on the inner half. (A plain
    // endpoint ratio would be fooled by oscillating bounded symbols, whose
    // integrand climbs back toward 1 near dual-lattice radii.)
    let neg_log = |g: f64| if g > 0.0 { -g.ln() } else { f64::INFINITY };
    let inner_max = integrand[..=n_grid / 2]
        .iter()
        .map(|&g| neg_log(g))
        .fold(0.0_f64, f64::max);
    let outer_max = integrand[n_grid / 2..]
        .iter()
        .map(|&g| neg_log(g))
        .fold(0.0_f64, f64::max);
    let flat_tail = outer_max.is_finite() && outer_max <= 1.05 * inner_max + 1e-12;

    // Fit -log g ~ a r^p over the outer half, where g is still resolvable.
    let mut xs_fit = Vec::new();
    let mut ys_fit = Vec::new();
    for i in (n_grid / 2)..=n_grid {
        let g = integrand[i];
        if g > 0.0 && g < 1.0 && radii[i] > 0.0 {
            xs_fit.push(radii[i].ln());
            ys_fit.push((-g.ln()).ln());
        }
    }
    let decay_exponent = if !flat_tail && xs_fit.len() >= 2 {
        Some(least_squares_slope(&xs_fit, &ys_fit))
    } else {
        None
    };

    Ok(HeatKernelReport {
        radii,
        integrand,
        integral,
        tail_ratio,
        decay_exponent,
        flat_tail,
    })
}

pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx: f64 = xs.iter().sum::<f64>() / n;
    let my: f64 = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Cheap structural screen for strong ergodicity of the projected process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StrongErgodicityHint {
    /// Zero diffusion and purely atomic jumps: marginals stay supported on a
    /// countable coset, so total-variation convergence to the uniform
    /// measure is impossible even when the process is ergodic.
    LatticeJumps,
    /// Deterministic motion (no diffusion, no jumps).
    Deterministic,
    /// No structural obstruction found (not a proof of strong ergodicity).
    NoObstruction,
}

pub fn check_strong_ergodicity_hint(model: &DrivingModel) -> StrongErgodicityHint {
    if !model.diffusion().is_zero() {
        return StrongErgodicityHint::NoObstruction;
    }
    match model.jumps() {
        None => StrongErgodicityHint::Deterministic,
        Some(JumpMeasure::Atoms(_)) => StrongErgodicityHint::LatticeJumps,
        Some(_) => StrongErgodicityHint::NoObstruction,
    }
}
