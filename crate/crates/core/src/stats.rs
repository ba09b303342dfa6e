//! Statistical verification harness: LLN ladders, CLT ensembles against a
//! theoretical covariance, Kolmogorov-Smirnov tests, and the rescaled
//! jump-size cap check.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::simulate::{ensemble_tracer_map, RunSpec, TracerModel, TracerPath};
use crate::torus::PeriodicFunction;

/// One-sample Kolmogorov-Smirnov test against a continuous cdf, with the
/// asymptotic p-value.
pub fn ks_test<F>(mut samples: Vec<f64>, cdf: F) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    if samples.len() < 8 {
        return Err(Error::TooFewSamples {
            min: 8,
            got: samples.len(),
        });
    }
    samples.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));
    let n = samples.len() as f64;
    let mut d = 0.0_f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    Ok((d, kolmogorov_pvalue(d, samples.len())))
}

/// Two-sample Kolmogorov-Smirnov test (asymptotic p-value).
pub fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<(f64, f64)> {
    if a.len() < 8 || b.len() < 8 {
        return Err(Error::TooFewSamples {
            min: 8,
            got: a.len().min(b.len()),
        });
    }
    a.sort_by(|x, y| x.partial_cmp(y).expect("non-finite sample"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("non-finite sample"));
    let (na, nb) = (a.len(), b.len());
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d = 0.0_f64;
    while i < na && j < nb {
        let xa = a[i];
        let xb = b[j];
        if xa <= xb {
            i += 1;
        }
        if xb <= xa {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let n_eff = (na as f64 * nb as f64) / (na + nb) as f64;
    Ok((d, kolmogorov_pvalue(d, n_eff.round() as usize)))
}

/// Asymptotic Kolmogorov survival function with Stephens' small-sample
/// correction: `Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2)`.
pub fn kolmogorov_pvalue(d: f64, n: usize) -> f64 {
    let sqrt_n = (n as f64).sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    let mut acc = 0.0;
    for j in 1..=100 {
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        acc += sign * (-2.0 * (j as f64 * lambda).powi(2)).exp();
    }
    (2.0 * acc).clamp(0.0, 1.0)
}

/// Sample covariance with `1/(N-1)` normalization (row-major).
pub fn empirical_covariance(samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples { min: 2, got: n });
    }
    let d = samples[0].len();
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![0.0; d * d];
    for s in samples {
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += (s[i] - mean[i]) * (s[j] - mean[j]);
            }
        }
    }
    for c in &mut cov {
        *c /= (n - 1) as f64;
    }
    Ok(cov)
}

pub fn sample_mean(samples: &[Vec<f64>]) -> Vec<f64> {
    let n = samples.len() as f64;
    let d = samples.first().map(Vec::len).unwrap_or(0);
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    mean
}

/// Monte Carlo summary of one ensemble of vector samples.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleStats {
    pub n: usize,
    pub mean: Vec<f64>,
    pub covariance: Vec<f64>,
    /// Standard error of each mean component.
    pub std_errors: Vec<f64>,
    /// Per-marginal KS statistic and p-value (when a reference was tested).
    pub ks: Vec<(f64, f64)>,
}

impl EnsembleStats {
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let n = samples.len();
        let mean = sample_mean(samples);
        let covariance = empirical_covariance(samples)?;
        let d = mean.len();
        let std_errors = (0..d)
            .map(|i| (covariance[i * d + i] / n as f64).sqrt())
            .collect();
        Ok(Self {
            n,
            mean,
            covariance,
            std_errors,
            ks: Vec::new(),
        })
    }
}

/// One rung of the LLN ladder.
#[derive(Debug, Clone, Serialize)]
pub struct LlnRung {
    pub n: u64,
    /// Ensemble mean of `|X_{nt}/n - reference|`.
    pub mean_abs_deviation: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LlnReport {
    pub t: f64,
    pub rungs: Vec<LlnRung>,
    /// Log-log slope of the deviation against n (about -1/2 when the CLT
    /// scaling holds).
    pub slope: f64,
    /// Whether deviations were measured against `D t` per path (general
    /// drift laws) or against the drift-law mean (point mass).
    pub conditional_centering: bool,
}

/// Law-of-large-numbers experiment: for each ladder scale `n`, simulates an
/// ensemble of `X_{nt}/n` and reports the deviation from the drift-law
/// reference.
pub fn lln_experiment(
    tm: &TracerModel,
    ladder: &[u64],
    t: f64,
    paths_per_rung: usize,
    dt: f64,
    seed: u64,
) -> Result<LlnReport> {
    if ladder.is_empty() {
        return Err(Error::InvalidModel("empty LLN ladder".into()));
    }
    let d = tm.dim_out();
    let conditional = !tm.drift_law.is_point_mass();
    let v_bar = tm.drift_law.mean();
    let mut rungs = Vec::with_capacity(ladder.len());
    for (ri, &n) in ladder.iter().enumerate() {
        let horizon = n as f64 * t;
        let spec = RunSpec::new(paths_per_rung, dt, horizon, seed).with_phase(100 + ri as u64);
        let deviations = ensemble_tracer_map(tm, &spec, |_, tp: TracerPath| {
            let m = tp.driving.n_steps();
            let x = tp.x_at(m);
            let reference: &[f64] = if conditional { &tp.drift } else { &v_bar };
            let mut dev = 0.0;
            for i in 0..d {
                let delta = x[i] / n as f64 - reference[i] * t;
                dev += delta * delta;
            }
            Ok(dev.sqrt())
        })?;
        let n_paths = deviations.len() as f64;
        let mean: f64 = deviations.iter().sum::<f64>() / n_paths;
        let var: f64 = deviations
            .iter()
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / (n_paths - 1.0);
        rungs.push(LlnRung {
            n,
            mean_abs_deviation: mean,
            std_error: (var / n_paths).sqrt(),
        });
    }
    // Slope fit on the nonzero rungs.
    let xs: Vec<f64> = rungs
        .iter()
        .filter(|r| r.mean_abs_deviation > 0.0)
        .map(|r| (r.n as f64).ln())
        .collect();
    let ys: Vec<f64> = rungs
        .iter()
        .filter(|r| r.mean_abs_deviation > 0.0)
        .map(|r| r.mean_abs_deviation.ln())
        .collect();
    let slope = if xs.len() >= 2 {
        crate::symbols::least_squares_slope(&xs, &ys)
    } else {
        0.0
    };
    Ok(LlnReport {
        t,
        rungs,
        slope,
        conditional_centering: conditional,
    })
}

/// CLT verdict at one observation time.
#[derive(Debug, Clone, Serialize)]
pub struct CltAtTime {
    pub t: f64,
    pub empirical_cov: Vec<f64>,
    pub theoretical_cov: Vec<f64>,
    /// Max elementwise error relative to the largest theoretical entry.
    pub rel_error: f64,
    /// Per-marginal KS statistic and p-value against `N(0, t C_ii)`.
    pub ks: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CltReport {
    pub n: u64,
    pub n_paths: usize,
    pub per_time: Vec<CltAtTime>,
    /// Spread of `Var/t` across the observation times (maximum over
    /// diagonal entries of max/min - 1).
    pub linearity_spread: f64,
    pub stats: EnsembleStats,
    pub tol_cov: f64,
    pub p_min: f64,
    pub verdict: bool,
    /// Present when the drift law is not a point mass: covariance of the
    /// unconditionally centered samples at the final time.
    pub unconditional_cov: Option<Vec<f64>>,
}

/// Central-limit experiment: samples `S_n(t) = n^{-1/2} (X_{nt} - n Vbar t)`
/// and compares the ensemble covariance to `t C` with per-marginal KS tests.
///
/// The verdict passes iff every time's covariance is within `tol_cov`
/// (relative) of `t C` and every KS p-value exceeds `p_min`.
#[allow(clippy::too_many_arguments)]
pub fn clt_experiment(
    tm: &TracerModel,
    n: u64,
    t_grid: &[f64],
    n_paths: usize,
    dt: f64,
    seed: u64,
    theoretical_c: &[f64],
    tol_cov: f64,
    p_min: f64,
) -> Result<CltReport> {
    if t_grid.is_empty() {
        return Err(Error::InvalidModel("empty observation grid".into()));
    }
    let d = tm.dim_out();
    if theoretical_c.len() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            got: theoretical_c.len(),
        });
    }
    let t_max = t_grid.iter().copied().fold(0.0_f64, f64::max);
    let horizon = n as f64 * t_max;
    let v_bar = tm.drift_law.mean();
    let conditional = !tm.drift_law.is_point_mass();
    let sqrt_n = (n as f64).sqrt();

    let spec = RunSpec::new(n_paths, dt, horizon, seed).with_phase(7);
    // Per path: S_n at each observation time, conditionally centered, plus
    // the unconditional version at the final time when it differs.
    let per_path = ensemble_tracer_map(tm, &spec, |_, tp: TracerPath| {
        let steps_per_unit = 1.0 / tp.driving.dt;
        let mut rows = Vec::with_capacity(t_grid.len());
        for &t in t_grid {
            let m = ((n as f64 * t) * steps_per_unit).round() as usize;
            let m = m.min(tp.driving.n_steps());
            let x = tp.x_at(m);
            let mut s = Vec::with_capacity(d);
            for i in 0..d {
                let center = if conditional { tp.drift[i] } else { v_bar[i] };
                s.push((x[i] - n as f64 * center * t - tm.x0[i]) / sqrt_n);
            }
            rows.push(s);
        }
        let unconditional = if conditional {
            let m = tp.driving.n_steps();
            let x = tp.x_at(m);
            Some(
                (0..d)
                    .map(|i| (x[i] - n as f64 * v_bar[i] * t_max - tm.x0[i]) / sqrt_n)
                    .collect::<Vec<f64>>(),
            )
        } else {
            None
        };
        Ok((rows, unconditional))
    })?;

    let c_scale = theoretical_c
        .iter()
        .fold(0.0_f64, |a, &v| a.max(v.abs()));
    let mut per_time = Vec::with_capacity(t_grid.len());
    let mut verdict = true;
    let mut diag_ratios: Vec<f64> = Vec::new();
    for (ti, &t) in t_grid.iter().enumerate() {
        let samples: Vec<Vec<f64>> = per_path.iter().map(|(rows, _)| rows[ti].clone()).collect();
        let cov = empirical_covariance(&samples)?;
        let theo: Vec<f64> = theoretical_c.iter().map(|&c| c * t).collect();
        let mut rel = 0.0_f64;
        for (e, th) in cov.iter().zip(&theo) {
            rel = rel.max((e - th).abs());
        }
        let rel_error = if c_scale * t > 0.0 { rel / (c_scale * t) } else { rel };
        let mut ks = Vec::with_capacity(d);
        for i in 0..d {
            let var = theo[i * d + i];
            let marginal: Vec<f64> = samples.iter().map(|s| s[i]).collect();
            if var <= 0.0 {
                if marginal.iter().any(|&v| v.abs() > 1e-9) {
                    return Err(Error::DegenerateCovariance { index: i });
                }
                ks.push((0.0, 1.0));
                continue;
            }
            let normal = Normal::new(0.0, var.sqrt())
                .map_err(|e| Error::Numeric(format!("normal: {e}")))?;
            let (stat, p) = ks_test(marginal, |x| normal.cdf(x))?;
            ks.push((stat, p));
            if p <= p_min {
                verdict = false;
            }
        }
        if rel_error >= tol_cov {
            verdict = false;
        }
        for i in 0..d {
            if t > 0.0 {
                diag_ratios.push(cov[i * d + i] / t);
            }
        }
        per_time.push(CltAtTime {
            t,
            empirical_cov: cov,
            theoretical_cov: theo,
            rel_error,
            ks,
        });
    }

    let linearity_spread = if diag_ratios.len() >= 2 {
        let max = diag_ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = diag_ratios.iter().copied().fold(f64::INFINITY, f64::min);
        if min > 0.0 {
            max / min - 1.0
        } else {
            f64::INFINITY
        }
    } else {
        0.0
    };

    let final_samples: Vec<Vec<f64>> = per_path
        .iter()
        .map(|(rows, _)| rows.last().expect("nonempty grid").clone())
        .collect();
    let mut stats = EnsembleStats::from_samples(&final_samples)?;
    stats.ks = per_time.last().expect("nonempty").ks.clone();

    let unconditional_cov = if conditional {
        let samples: Vec<Vec<f64>> = per_path
            .iter()
            .map(|(_, u)| u.clone().expect("conditional run"))
            .collect();
        Some(empirical_covariance(&samples)?)
    } else {
        None
    };

    Ok(CltReport {
        n,
        n_paths,
        per_time,
        linearity_spread,
        stats,
        tol_cov,
        p_min,
        verdict,
        unconditional_cov,
    })
}

/// Rescaled jump-size cap: every jump of the rescaled tracer functional is
/// bounded by `2 max_i sup|w_i| / sqrt(n)` up to grid effects.
#[derive(Debug, Clone, Serialize)]
pub struct JumpCapReport {
    pub max_rescaled_jump: f64,
    pub bound: f64,
    /// Slack allowed for drift/noise motion inside one step.
    pub grid_tolerance: f64,
    pub pass: bool,
    pub jumps_seen: usize,
}

/// Checks the jump-size cap over an ensemble of driving paths. Uses the
/// logged jump events when present (finite activity), otherwise falls back
/// to the largest grid increment of `w` along the path.
pub fn jump_cap_check(
    paths: &[&crate::simulate::PathSample],
    w: &[PeriodicFunction],
    n: u64,
) -> JumpCapReport {
    let sup: f64 = w
        .iter()
        .map(PeriodicFunction::sup_bound)
        .fold(0.0_f64, f64::max);
    let sqrt_n = (n as f64).sqrt();
    let bound = 2.0 * sup / sqrt_n;
    let mut max_jump = 0.0_f64;
    let mut jumps_seen = 0usize;
    for path in paths {
        let dim = path.dim;
        if path.jumps.is_empty() {
            continue;
        }
        // Reconstruct the pre-jump state: grid state at the step start plus
        // the same-step jumps already applied (application order is the log
        // order). Drift and noise inside the step are covered by the grid
        // tolerance.
        let mut idx = 0usize;
        while idx < path.jumps.len() {
            let step = (path.jumps[idx].time / path.dt).floor() as usize;
            let mut pre = path.state(step.min(path.n_steps())).to_vec();
            while idx < path.jumps.len()
                && (path.jumps[idx].time / path.dt).floor() as usize == step
            {
                let ev = &path.jumps[idx];
                let mut post = pre.clone();
                for (p, y) in post.iter_mut().zip(&ev.size) {
                    *p += y;
                }
                for wi in w {
                    let delta = (wi.evaluate(&post) - wi.evaluate(&pre)).abs() / sqrt_n;
                    max_jump = max_jump.max(delta);
                }
                pre = post;
                jumps_seen += 1;
                idx += 1;
            }
        }
        let _ = dim;
    }
    // Allow for the sup bound being attained only up to rounding.
    let grid_tolerance = 1e-9 * (1.0 + bound);
    JumpCapReport {
        max_rescaled_jump: max_jump,
        bound,
        grid_tolerance,
        pass: max_jump <= bound + grid_tolerance,
        jumps_seen,
    }
}
