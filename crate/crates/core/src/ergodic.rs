//! Limit objects: Birkhoff averages, occupation measures on the torus, the
//! limiting covariance by two independent routes, modified semimartingale
//! characteristics along paths, and total-variation decay diagnostics.
//!
//! The covariance of the tracer's Gaussian limit splits as `C = Sigma + Ct`
//! where `Sigma` is the molecular noise and `Ct` the ergodic part. Two
//! routes compute `Ct`:
//!
//! * series: `Ct_ij = 2 sum_{k != 0} Re q(xi_k) w_hat_i(k) w_hat_j(-k)`,
//!   exact for band-limited test functions (constant coefficients only);
//! * quadrature: the carre-du-champ integrand averaged against the
//!   invariant measure of the projected process (uniform for constant
//!   coefficients, an occupation histogram otherwise).
//!
//! Bookkeeping note: under this normalization the torus average of
//! `w_i A w_j` equals `-Ct_ij / 2`; the sign/factor is pinned against the
//! two-atom model, whose limit variance is `2 (1 - cos 1)`, and asserted in
//! the tests below.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generator::carre_du_champ;
use crate::simulate::{ensemble_map, path_rng, PathSample, RunSpec, Stepper, StreamRole};
use crate::symbols::{eval_symbol, DrivingModel, FrequencyConvention};
use crate::torus::PeriodicFunction;

/// Time average `(1/T) int_0^T f(F_s) ds` by the trapezoid rule.
pub fn birkhoff_average<F>(path: &PathSample, f: F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let n = path.n_steps();
    if n == 0 {
        return f(path.state(0));
    }
    let mut acc = 0.5 * (f(path.state(0)) + f(path.state(n)));
    for m in 1..n {
        acc += f(path.state(m));
    }
    acc / n as f64
}

/// Time-weighted histogram of the torus projection of a path.
#[derive(Debug, Clone, Serialize)]
pub struct OccupationHistogram {
    pub bins_per_axis: usize,
    pub period: Vec<f64>,
    /// Normalized mass per bin (row-major over axes), summing to 1.
    pub mass: Vec<f64>,
    pub total_time: f64,
}

impl OccupationHistogram {
    pub fn dim(&self) -> usize {
        self.period.len()
    }

    pub fn n_bins(&self) -> usize {
        self.mass.len()
    }

    /// Center of a flat-indexed bin.
    pub fn bin_center(&self, flat: usize) -> Vec<f64> {
        let d = self.dim();
        let b = self.bins_per_axis;
        let mut idx = vec![0usize; d];
        let mut rest = flat;
        for j in (0..d).rev() {
            idx[j] = rest % b;
            rest /= b;
        }
        (0..d)
            .map(|j| self.period[j] * (idx[j] as f64 + 0.5) / b as f64)
            .collect()
    }

    /// Total-variation distance to the uniform measure on the torus.
    pub fn tv_to_uniform(&self) -> f64 {
        let u = 1.0 / self.n_bins() as f64;
        0.5 * self.mass.iter().map(|&m| (m - u).abs()).sum::<f64>()
    }
}

/// Bins the torus states of a path, weighting each grid point by its
/// trapezoid time mass. Estimates the invariant measure of the projection.
pub fn occupation_histogram(path: &PathSample, bins_per_axis: usize) -> Result<OccupationHistogram> {
    let torus = path.torus_states.as_ref().ok_or(Error::RequiresPeriod)?;
    let period = path.period.as_ref().ok_or(Error::RequiresPeriod)?;
    let dim = path.dim;
    if bins_per_axis == 0 || bins_per_axis.pow(dim as u32) > (1 << 24) {
        return Err(Error::InvalidModel("bad bin count".into()));
    }
    let n = path.n_steps();
    let mut mass = vec![0.0; bins_per_axis.pow(dim as u32)];
    let mut total = 0.0;
    for m in 0..=n {
        let weight = if m == 0 || m == n { 0.5 } else { 1.0 };
        let x = &torus[m * dim..(m + 1) * dim];
        let mut flat = 0usize;
        for j in 0..dim {
            let frac = (x[j] / period[j]).clamp(0.0, 1.0 - 1e-15);
            flat = flat * bins_per_axis + (frac * bins_per_axis as f64) as usize;
        }
        mass[flat] += weight;
        total += weight;
    }
    for v in &mut mass {
        *v /= total;
    }
    Ok(OccupationHistogram {
        bins_per_axis,
        period: period.clone(),
        mass,
        total_time: total * path.dt,
    })
}

/// How the ergodic part of the covariance was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CovarianceMethod {
    Series,
    Quadrature,
    MonteCarlo,
}

/// Which invariant measure entered a quadrature covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InvariantProvenance {
    Uniform,
    EmpiricalHistogram,
    NotApplicable,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CovarianceDiagnostics {
    /// Lattice points in the support where `Re q` vanishes (invalid regime).
    pub spectrum_zero_modes: Vec<Vec<i64>>,
    /// Smallest eigenvalue of the ergodic part (PSD check).
    pub min_eigenvalue: f64,
    /// Largest imaginary residue dropped when realizing the series.
    pub imag_residual: f64,
    /// Quadrature grid size, when applicable.
    pub grid_points: Option<usize>,
}

/// The limiting covariance `C = Sigma + Ct` with provenance and diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct CovarianceReport {
    pub dim: usize,
    /// Row-major `d x d` matrices.
    pub sigma: Vec<f64>,
    pub c_tilde: Vec<f64>,
    pub c: Vec<f64>,
    pub method: CovarianceMethod,
    pub invariant: InvariantProvenance,
    pub diagnostics: CovarianceDiagnostics,
}

impl CovarianceReport {
    fn assemble(
        sigma: &[f64],
        mut c_tilde: Vec<f64>,
        dim: usize,
        method: CovarianceMethod,
        invariant: InvariantProvenance,
        mut diagnostics: CovarianceDiagnostics,
    ) -> Result<Self> {
        // The formulas are symmetric up to rounding; make it exact.
        for i in 0..dim {
            for j in 0..i {
                let s = 0.5 * (c_tilde[i * dim + j] + c_tilde[j * dim + i]);
                c_tilde[i * dim + j] = s;
                c_tilde[j * dim + i] = s;
            }
        }
        let m = DMatrix::from_row_slice(dim, dim, &c_tilde);
        let eigs = m.symmetric_eigen().eigenvalues;
        let min_eig = eigs.iter().copied().fold(f64::INFINITY, f64::min);
        let scale = c_tilde.iter().fold(1.0_f64, |a, &v| a.max(v.abs()));
        if min_eig < -1e-10 * scale {
            return Err(Error::NotPositiveSemidefinite(min_eig));
        }
        diagnostics.min_eigenvalue = min_eig;
        let c: Vec<f64> = sigma.iter().zip(&c_tilde).map(|(s, t)| s + t).collect();
        Ok(Self {
            dim,
            sigma: sigma.to_vec(),
            c_tilde,
            c,
            method,
            invariant,
            diagnostics,
        })
    }

    pub fn max_abs_difference(&self, other: &CovarianceReport) -> f64 {
        self.c
            .iter()
            .zip(&other.c)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Series form of the ergodic covariance:
/// `Ct_ij = 2 sum_{k != 0} Re q(xi_k) w_hat_i(k) w_hat_j(-k)`.
///
/// Exact for band-limited test functions (no truncation error). Lattice
/// points in the support where `Re q` vanishes are flagged in the
/// diagnostics: the sum itself is division-free, but the spectral
/// hypothesis of the limit theorem fails there and the value is then not a
/// limit covariance.
pub fn covariance_series(
    model: &DrivingModel,
    w: &[PeriodicFunction],
    sigma: &[f64],
    convention: FrequencyConvention,
) -> Result<CovarianceReport> {
    if !model.is_levy() {
        return Err(Error::RequiresConstantCoefficients);
    }
    let d = w.len();
    if d == 0 || sigma.len() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            got: sigma.len(),
        });
    }
    let tau = w[0].period().to_vec();
    for wi in w {
        if wi.period() != tau.as_slice() {
            return Err(Error::PeriodMismatch);
        }
    }
    let origin = vec![0.0; model.dim()];

    // Union support over the test functions.
    let mut support: Vec<Vec<i64>> = Vec::new();
    for wi in w {
        for (k, _) in wi.coefficients() {
            if k.iter().any(|&v| v != 0) && !support.iter().any(|s| s == k) {
                support.push(k.to_vec());
            }
        }
    }
    support.sort();

    let mut zero_modes = Vec::new();
    let mut re_q = Vec::with_capacity(support.len());
    for k in &support {
        let xi = convention.frequency(k, &tau);
        let q = eval_symbol(model, &origin, &xi)?.re();
        if q == 0.0 {
            zero_modes.push(k.clone());
        }
        re_q.push(q);
    }

    let mut c_tilde = vec![0.0; d * d];
    let mut imag_residual = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            let mut acc = num_complex::Complex64::new(0.0, 0.0);
            for (k, &q) in support.iter().zip(&re_q) {
                let neg: Vec<i64> = k.iter().map(|v| -v).collect();
                acc += 2.0 * q * w[i].coefficient(k) * w[j].coefficient(&neg);
            }
            imag_residual = imag_residual.max(acc.im.abs());
            c_tilde[i * d + j] = acc.re;
        }
    }
    if imag_residual > 1e-10 {
        return Err(Error::Numeric(format!(
            "series covariance has imaginary residue {imag_residual:.3e}"
        )));
    }
    CovarianceReport::assemble(
        sigma,
        c_tilde,
        d,
        CovarianceMethod::Series,
        InvariantProvenance::Uniform,
        CovarianceDiagnostics {
            spectrum_zero_modes: zero_modes,
            imag_residual,
            ..Default::default()
        },
    )
}

/// The invariant measure a quadrature covariance integrates against.
pub enum InvariantMeasure<'a> {
    /// Normalized Lebesgue measure on the fundamental cell (the invariant
    /// measure of every constant-coefficient projection).
    Uniform,
    /// Empirical occupation histogram from a pilot run.
    Histogram(&'a OccupationHistogram),
}

/// Quadrature form of the covariance: the carre-du-champ integrand averaged
/// against the invariant measure.
pub fn covariance_quadrature(
    model: &DrivingModel,
    w: &[PeriodicFunction],
    sigma: &[f64],
    invariant: &InvariantMeasure,
    grid_per_axis: usize,
) -> Result<CovarianceReport> {
    let d = w.len();
    if d == 0 || sigma.len() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            got: sigma.len(),
        });
    }
    let tau = w[0].period().to_vec();
    for wi in w {
        if wi.period() != tau.as_slice() {
            return Err(Error::PeriodMismatch);
        }
    }
    let dim = model.dim();
    if tau.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: tau.len(),
        });
    }

    let (points, weights, provenance): (Vec<Vec<f64>>, Vec<f64>, _) = match invariant {
        InvariantMeasure::Uniform => {
            if grid_per_axis == 0 || grid_per_axis.pow(dim as u32) > (1 << 24) {
                return Err(Error::InvalidModel("bad quadrature grid".into()));
            }
            let total = grid_per_axis.pow(dim as u32);
            let mut pts = Vec::with_capacity(total);
            let mut idx = vec![0usize; dim];
            for _ in 0..total {
                pts.push(
                    (0..dim)
                        .map(|j| tau[j] * idx[j] as f64 / grid_per_axis as f64)
                        .collect(),
                );
                for j in (0..dim).rev() {
                    idx[j] += 1;
                    if idx[j] < grid_per_axis {
                        break;
                    }
                    idx[j] = 0;
                }
            }
            let wgt = vec![1.0 / total as f64; total];
            (pts, wgt, InvariantProvenance::Uniform)
        }
        InvariantMeasure::Histogram(h) => {
            if h.period != tau {
                return Err(Error::PeriodMismatch);
            }
            let pts: Vec<Vec<f64>> = (0..h.n_bins()).map(|b| h.bin_center(b)).collect();
            (pts, h.mass.clone(), InvariantProvenance::EmpiricalHistogram)
        }
    };

    let n_points = points.len();
    let mut c_tilde = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut acc = 0.0;
            for (x, wt) in points.iter().zip(&weights) {
                if *wt == 0.0 {
                    continue;
                }
                acc += wt * carre_du_champ(model, &w[i], &w[j], x)?;
            }
            c_tilde[i * d + j] = acc;
            c_tilde[j * d + i] = acc;
        }
    }
    CovarianceReport::assemble(
        sigma,
        c_tilde,
        d,
        CovarianceMethod::Quadrature,
        provenance,
        CovarianceDiagnostics {
            grid_points: Some(n_points),
            ..Default::default()
        },
    )
}

/// Sampled modified characteristics `Ct^{n}_t` (row-major `d x d` per time).
#[derive(Debug, Clone)]
pub struct ModifiedCharacteristics {
    pub dim: usize,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// Modified characteristics of the rescaled integral process along a path:
/// `Ct^{n}_t = n^{-1} int_0^{nt} Gamma(w_i, w_j)(F_s) ds`, sampled at the
/// requested times. Converges to `t * Ct` as `n` grows.
pub fn modified_characteristics(
    path: &PathSample,
    model: &DrivingModel,
    w: &[PeriodicFunction],
    n_scale: f64,
    times: &[f64],
) -> Result<ModifiedCharacteristics> {
    let d = w.len();
    let t_max = times.iter().copied().fold(0.0_f64, f64::max);
    if path.horizon() < n_scale * t_max - 1e-9 {
        return Err(Error::HorizonTooShort {
            horizon: path.horizon(),
            required: n_scale * t_max,
        });
    }
    let n_steps = path.n_steps();
    let dt = path.dt;
    let mut values = vec![vec![0.0; d * d]; times.len()];
    let mut cum = vec![0.0; d * d];
    let mut prev = vec![0.0; d * d];
    let mut cur = vec![0.0; d * d];
    let mut targets: Vec<(usize, usize)> = times
        .iter()
        .enumerate()
        .map(|(ti, &t)| {
            let step = ((n_scale * t) / dt).round() as usize;
            (step.min(n_steps), ti)
        })
        .collect();
    targets.sort();

    let gamma_at = |x: &[f64], out: &mut [f64]| -> Result<()> {
        for i in 0..d {
            for j in 0..=i {
                let g = carre_du_champ(model, &w[i], &w[j], x)?;
                out[i * d + j] = g;
                out[j * d + i] = g;
            }
        }
        Ok(())
    };

    gamma_at(path.state(0), &mut prev)?;
    let mut next_target = 0usize;
    while next_target < targets.len() && targets[next_target].0 == 0 {
        let ti = targets[next_target].1;
        values[ti].copy_from_slice(&cum);
        next_target += 1;
    }
    for m in 1..=n_steps {
        if next_target == targets.len() {
            break;
        }
        gamma_at(path.state(m), &mut cur)?;
        for e in 0..d * d {
            cum[e] += 0.5 * dt * (prev[e] + cur[e]);
        }
        prev.copy_from_slice(&cur);
        while next_target < targets.len() && targets[next_target].0 == m {
            let ti = targets[next_target].1;
            values[ti].copy_from_slice(&cum);
            next_target += 1;
        }
    }
    for v in &mut values {
        for e in v.iter_mut() {
            *e /= n_scale;
        }
    }
    Ok(ModifiedCharacteristics {
        dim: d,
        times: times.to_vec(),
        values,
    })
}

/// Empirical total-variation decay of the projected marginals.
#[derive(Debug, Clone, Serialize)]
pub struct TvDecayReport {
    pub times: Vec<f64>,
    /// Worst TV over the starting points at each rung.
    pub tv: Vec<f64>,
    pub per_start: Vec<Vec<f64>>,
    /// Fitted rate in `TV ~ Lambda exp(-lambda t)` (positive = decay).
    pub lambda_hat: f64,
    pub big_lambda_hat: f64,
    /// Positive fitted rate and final TV below 0.1.
    pub decaying: bool,
    /// Set when the per-start ensembles are too small for a stable
    /// histogram (< 1000 paths).
    pub low_sample_warning: bool,
}

/// Estimates the worst-case TV distance between the projected marginal at
/// each ladder time and the reference measure (uniform for constant
/// coefficients, otherwise the pooled ensemble across starting points),
/// then fits an exponential decay rate. Diagnostic for strong ergodicity.
pub fn tv_decay_estimate(
    model: &DrivingModel,
    starts: &[Vec<f64>],
    ladder: &[f64],
    paths_per_start: usize,
    bins: usize,
    dt: f64,
    seed: u64,
) -> Result<TvDecayReport> {
    let tau = model.period().ok_or(Error::RequiresPeriod)?.to_vec();
    let dim = model.dim();
    if starts.is_empty() || ladder.is_empty() {
        return Err(Error::InvalidModel("need starts and ladder times".into()));
    }
    let t_max = ladder.iter().copied().fold(0.0_f64, f64::max);
    let snapshot_steps: Vec<usize> = ladder.iter().map(|&t| (t / dt).round() as usize).collect();
    let n_bins = bins.pow(dim as u32);

    // counts[start][rung][bin]
    let mut counts = vec![vec![vec![0.0_f64; n_bins]; ladder.len()]; starts.len()];
    for (si, x0) in starts.iter().enumerate() {
        let spec =
            RunSpec::new(paths_per_start, dt, t_max.max(dt), seed).with_phase(1 + si as u64);
        let snapshots = ensemble_map(model, &spec, x0, |_, path| {
            let torus = path.torus_states.as_ref().ok_or(Error::RequiresPeriod)?;
            let mut bins_hit = Vec::with_capacity(snapshot_steps.len());
            for &step in &snapshot_steps {
                let x = &torus[step * dim..(step + 1) * dim];
                let mut flat = 0usize;
                for j in 0..dim {
                    let frac = (x[j] / tau[j]).clamp(0.0, 1.0 - 1e-15);
                    flat = flat * bins + (frac * bins as f64) as usize;
                }
                bins_hit.push(flat);
            }
            Ok(bins_hit)
        })?;
        for hit in snapshots {
            for (ri, b) in hit.into_iter().enumerate() {
                counts[si][ri][b] += 1.0;
            }
        }
    }

    let uniform_reference = model.is_levy();
    let mut tv = Vec::with_capacity(ladder.len());
    let mut per_start = vec![Vec::with_capacity(ladder.len()); starts.len()];
    for ri in 0..ladder.len() {
        let reference: Vec<f64> = if uniform_reference {
            vec![1.0 / n_bins as f64; n_bins]
        } else {
            let mut pooled = vec![0.0; n_bins];
            for sc in counts.iter() {
                for (p, c) in pooled.iter_mut().zip(&sc[ri]) {
                    *p += c;
                }
            }
            let total: f64 = pooled.iter().sum();
            pooled.iter().map(|c| c / total).collect()
        };
        let mut worst = 0.0_f64;
        for (si, sc) in counts.iter().enumerate() {
            let total: f64 = sc[ri].iter().sum();
            let d: f64 = 0.5
                * sc[ri]
                    .iter()
                    .zip(&reference)
                    .map(|(c, r)| (c / total - r).abs())
                    .sum::<f64>();
            per_start[si].push(d);
            worst = worst.max(d);
        }
        tv.push(worst);
    }

    // Fit log TV = log Lambda - lambda t over the positive rungs.
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t, &v) in ladder.iter().zip(&tv) {
        if v > 1e-12 {
            xs.push(*t);
            ys.push(v.ln());
        }
    }
    let (lambda_hat, big_lambda_hat) = if xs.len() >= 2 {
        let slope = crate::symbols::least_squares_slope(&xs, &ys);
        let mean_x: f64 = xs.iter().sum::<f64>() / xs.len() as f64;
        let mean_y: f64 = ys.iter().sum::<f64>() / ys.len() as f64;
        (-slope, (mean_y - slope * mean_x).exp())
    } else {
        (0.0, tv.first().copied().unwrap_or(0.0))
    };
    let decaying = lambda_hat > 0.0 && tv.last().copied().unwrap_or(1.0) < 0.1;
    Ok(TvDecayReport {
        times: ladder.to_vec(),
        tv,
        per_start,
        lambda_hat,
        big_lambda_hat,
        decaying,
        low_sample_warning: paths_per_start < 1000,
    })
}

/// One long pilot path reduced to its occupation histogram, with the
/// leading burn-in fraction dropped. Estimates the invariant measure of
/// state-dependent periodic models.
pub fn pilot_occupation(
    model: &DrivingModel,
    x0: &[f64],
    horizon: f64,
    dt: f64,
    bins: usize,
    burn_in_fraction: f64,
    seed: u64,
) -> Result<OccupationHistogram> {
    if model.period().is_none() {
        return Err(Error::RequiresPeriod);
    }
    let rng = path_rng(seed, 0, 0, StreamRole::Driving);
    let stepper = if model.is_levy() {
        Stepper::new_exact(model, x0, dt, rng)?
    } else {
        Stepper::new_euler(model, x0, dt, rng)?
    };
    let n_steps = crate::simulate::steps_for(horizon, dt)?;
    let path = stepper.run(n_steps)?;
    let skip = ((n_steps as f64) * burn_in_fraction) as usize;
    let dim = path.dim;
    let tail = PathSample {
        dim,
        dt,
        states: path.states[skip * dim..].to_vec(),
        torus_states: path.torus_states.as_ref().map(|t| t[skip * dim..].to_vec()),
        period: path.period.clone(),
        jumps: Vec::new(),
        stream: path.stream,
    };
    occupation_histogram(&tail, bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::apply_fourier;
    use crate::simulate::{levy_path, JumpEvent};
    use crate::symbols::{JumpMeasure, MatrixField, ScalarField};
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

    fn brownian_model() -> DrivingModel {
        DrivingModel::new(
            1,
            vec![ScalarField::constant(0.0)],
            MatrixField::scalar(1.0),
            None,
            Some(vec![TAU_2PI]),
        )
        .unwrap()
    }

    fn stable_model() -> DrivingModel {
        DrivingModel::new(
            1,
            vec![ScalarField::constant(0.0)],
            MatrixField::zero(1),
            Some(JumpMeasure::SymmetricStable {
                alpha: ScalarField::constant(1.5),
                gamma: ScalarField::constant(1.0),
            }),
            Some(vec![TAU_2PI]),
        )
        .unwrap()
    }

    fn sin1() -> PeriodicFunction {
        PeriodicFunction::sine(vec![TAU_2PI], 0, 1).unwrap()
    }

    #[test]
    fn birkhoff_average_of_one_is_one() {
        let m = unit_two_atom_model();
        let rng = path_rng(3, 0, 0, StreamRole::Driving);
        let path = levy_path(&m, &[0.0], 0.01, 5.0, rng).unwrap();
        assert_relative_eq!(birkhoff_average(&path, |_| 1.0), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn series_covariance_of_two_atom_model() {
        let m = unit_two_atom_model();
        let report =
            covariance_series(&m, &[sin1()], &[0.0], FrequencyConvention::PerAxis).unwrap();
        let expect = 2.0 * (1.0 - 1.0_f64.cos());
        assert!((report.c_tilde[0] - expect).abs() < 1e-12);
        assert_eq!(report.c[0], report.c_tilde[0]);
        assert!(report.diagnostics.spectrum_zero_modes.is_empty());
    }

    #[test]
    fn series_covariance_brownian_is_half() {
        let m = brownian_model();
        let report =
            covariance_series(&m, &[sin1()], &[0.0], FrequencyConvention::PerAxis).unwrap();
        assert_eq!(report.c_tilde[0], 0.5);
    }

    #[test]
    fn series_covariance_of_constants_vanishes() {
        let m = unit_two_atom_model();
        let w = PeriodicFunction::constant(vec![TAU_2PI], 4.0).unwrap();
        let report = covariance_series(&m, &[w], &[0.0], FrequencyConvention::PerAxis).unwrap();
        assert_eq!(report.c_tilde[0], 0.0);
    }

    #[test]
    fn quadrature_matches_series_for_shipped_models() {
        let w_cases = [
            vec![sin1()],
            vec![PeriodicFunction::cosine(vec![TAU_2PI], 0, 1).unwrap()],
            vec![sin1()
                .add(
                    &PeriodicFunction::cosine(vec![TAU_2PI], 0, 2)
                        .unwrap()
                        .scaled(0.5),
                )
                .unwrap()],
        ];
        for model in [unit_two_atom_model(), brownian_model()] {
            for w in &w_cases {
                let s =
                    covariance_series(&model, w, &[0.0], FrequencyConvention::PerAxis).unwrap();
                let q = covariance_quadrature(
                    &model,
                    w,
                    &[0.0],
                    &InvariantMeasure::Uniform,
                    512,
                )
                .unwrap();
                assert!(
                    s.max_abs_difference(&q) < 1e-8,
                    "{:?}: series {:?} vs quadrature {:?}",
                    w[0].label(),
                    s.c,
                    q.c
                );
            }
        }
        // Stable case with the spectral carre du champ: 1e-6 agreement.
        for w in &w_cases {
            let s =
                covariance_series(&stable_model(), w, &[0.0], FrequencyConvention::PerAxis)
                    .unwrap();
            let q = covariance_quadrature(
                &stable_model(),
                w,
                &[0.0],
                &InvariantMeasure::Uniform,
                512,
            )
            .unwrap();
            assert!(s.max_abs_difference(&q) < 1e-6);
        }
    }

    #[test]
    fn torus_average_of_w_times_generator_is_minus_half_c_tilde() {
        // The k-space identity fixes the factor: avg(w A w) = -Ct/2.
        for model in [unit_two_atom_model(), brownian_model(), stable_model()] {
            let w = sin1();
            let aw = apply_fourier(&model, &w, FrequencyConvention::PerAxis).unwrap();
            let n = 1024;
            let mut avg = 0.0;
            for i in 0..n {
                let x = [TAU_2PI * i as f64 / n as f64];
                avg += w.evaluate(&x) * aw.evaluate(&x);
            }
            avg /= n as f64;
            let series =
                covariance_series(&model, &[w], &[0.0], FrequencyConvention::PerAxis).unwrap();
            assert!(
                (avg + 0.5 * series.c_tilde[0]).abs() < 1e-8,
                "avg {avg} vs -Ct/2 {}",
                -0.5 * series.c_tilde[0]
            );
        }
    }

    #[test]
    fn covariance_zero_iff_generator_annihilates() {
        // Constants: A w = 0 and Ct = 0.
        let m = unit_two_atom_model();
        let konst = PeriodicFunction::constant(vec![TAU_2PI], 2.0).unwrap();
        let r = covariance_series(&m, &[konst], &[0.0], FrequencyConvention::PerAxis).unwrap();
        assert_eq!(r.c_tilde[0], 0.0);

        // Nonconstant w whose modes the symbol does not see: atoms at the
        // period itself leave sin invariant, so A w = 0 and Ct = 0 while
        // the spectrum-zero diagnostic flags the degenerate regime.
        let lattice = DrivingModel::new(
            1,
            vec![ScalarField::constant(0.0)],
            MatrixField::zero(1),
            Some(JumpMeasure::atoms(vec![
                (vec![-TAU_2PI], 1.0),
                (vec![TAU_2PI], 1.0),
            ])),
            Some(vec![TAU_2PI]),
        )
        .unwrap();
        let w = sin1();
        let aw = apply_fourier(&lattice, &w, FrequencyConvention::PerAxis).unwrap();
        assert!(aw.sup_bound() < 1e-12);
        let r =
            covariance_series(&lattice, &[w], &[0.0], FrequencyConvention::PerAxis).unwrap();
        assert!(r.c_tilde[0].abs() < 1e-12);
        assert!(!r.diagnostics.spectrum_zero_modes.is_empty());

        // Conversely a model that does see the modes gives Ct > 0.
        let r = covariance_series(
            &unit_two_atom_model(),
            &[sin1()],
            &[0.0],
            FrequencyConvention::PerAxis,
        )
        .unwrap();
        assert!(r.c_tilde[0] > 0.9);
    }

    #[test]
    fn sigma_adds_to_the_ergodic_part() {
        let m = brownian_model();
        let sigma = [0.7];
        let r = covariance_series(&m, &[sin1()], &sigma, FrequencyConvention::PerAxis).unwrap();
        assert_relative_eq!(r.c[0], 0.7 + 0.5, epsilon = 1e-14);
        assert_relative_eq!(r.c[0] - r.sigma[0], r.c_tilde[0], epsilon = 1e-15);
    }

    #[test]
    fn two_dimensional_covariance_series_vs_quadrature() {
        let tau = vec![TAU_2PI, TAU_2PI];
        let m = DrivingModel::new(
            2,
            vec![ScalarField::constant(0.0), ScalarField::constant(0.0)],
            MatrixField::constant(2, &[1.0, 0.3, 0.3, 1.0]).unwrap(),
            None,
            Some(tau.clone()),
        )
        .unwrap();
        let w = vec![
            PeriodicFunction::sine(tau.clone(), 0, 1).unwrap(),
            PeriodicFunction::cosine(tau.clone(), 1, 1).unwrap(),
        ];
        let sigma = [0.0, 0.0, 0.0, 0.0];
        let s = covariance_series(&m, &w, &sigma, FrequencyConvention::PerAxis).unwrap();
        let q =
            covariance_quadrature(&m, &w, &sigma, &InvariantMeasure::Uniform, 64).unwrap();
        assert!(s.max_abs_difference(&q) < 1e-8, "{:?} vs {:?}", s.c, q.c);
        // Diagonal entries are 1/2 each (unit diffusion per axis).
        assert_relative_eq!(s.c[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(s.c[3], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn occupation_histogram_of_frozen_path_is_a_point_mass() {
        let zero = DrivingModel::new(
            1,
            vec![ScalarField::constant(0.0)],
            MatrixField::zero(1),
            None,
            Some(vec![TAU_2PI]),
        )
        .unwrap();
        let rng = path_rng(5, 0, 0, StreamRole::Driving);
        let path = levy_path(&zero, &[1.0], 0.01, 2.0, rng).unwrap();
        let h = occupation_histogram(&path, 32).unwrap();
        assert_relative_eq!(h.mass.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let occupied: Vec<usize> = h
            .mass
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(occupied.len(), 1);
        // x0 = 1.0 lands in bin floor(1.0 / (2 pi / 32)) = 5.
        assert_eq!(occupied[0], 5);
    }

    #[test]
    fn drifting_path_equidistributes() {
        let drift = DrivingModel::new(
            1,
            vec![ScalarField::constant(1.0)],
            MatrixField::zero(1),
            None,
            Some(vec![TAU_2PI]),
        )
        .unwrap();
        let rng = path_rng(6, 0, 0, StreamRole::Driving);
        let path = levy_path(&drift, &[0.3], 0.01, 5000.0, rng).unwrap();
        let h = occupation_histogram(&path, 32).unwrap();
        assert!(h.tv_to_uniform() < 0.05, "tv {}", h.tv_to_uniform());
    }

    #[test]
    fn modified_characteristics_trivial_cases() {
        let m = unit_two_atom_model();
        let rng = path_rng(8, 0, 0, StreamRole::Driving);
        let path = levy_path(&m, &[0.0], 0.01, 10.0, rng).unwrap();

        let konst = PeriodicFunction::constant(vec![TAU_2PI], 1.0).unwrap();
        let mc = modified_characteristics(&path, &m, &[konst], 10.0, &[0.0, 1.0]).unwrap();
        assert_eq!(mc.values[0][0], 0.0);
        assert_eq!(mc.values[1][0], 0.0);

        let mc = modified_characteristics(&path, &m, &[sin1()], 10.0, &[0.0]).unwrap();
        assert_eq!(mc.values[0][0], 0.0);

        assert!(matches!(
            modified_characteristics(&path, &m, &[sin1()], 10.0, &[2.0]),
            Err(Error::HorizonTooShort { .. })
        ));
    }

    #[test]
    fn pure_drift_birkhoff_average_telescopes() {
        // For drift-only motion the running integral of A w telescopes to
        // (w(L_0 + b T) - w(L_0)) / T.
        let b = 1.0;
        let drift = DrivingModel::new(
            1,
            vec![ScalarField::constant(b)],
            MatrixField::zero(1),
            None,
            Some(vec![TAU_2PI]),
        )
        .unwrap();
        let w = sin1();
        let aw = apply_fourier(&drift, &w, FrequencyConvention::PerAxis).unwrap();
        let big_t = 50.0;
        let x0 = 0.7;
        let rng = path_rng(9, 0, 0, StreamRole::Driving);
        let path = levy_path(&drift, &[x0], 1e-3, big_t, rng).unwrap();
        let avg = birkhoff_average(&path, |x| aw.evaluate(x));
        let expect = ((x0 + b * big_t).sin() - x0.sin()) / big_t;
        assert!((avg - expect).abs() < 1e-6, "{avg} vs {expect}");
        assert!(avg.abs() <= 2.0 * w.sup_bound() / big_t + 1e-9);
    }

    #[test]
    fn jump_log_times_strictly_increase() {
        let m = unit_two_atom_model();
        let rng = path_rng(10, 0, 0, StreamRole::Driving);
        let path = levy_path(&m, &[0.0], 0.01, 50.0, rng).unwrap();
        assert!(!path.jumps.is_empty());
        for pair in path.jumps.windows(2) {
            let [a, b]: &[JumpEvent; 2] = pair.try_into().unwrap();
            assert!(a.time < b.time);
        }
        assert!(path.jumps.iter().all(|j| j.size[0] != 0.0));
    }
}
