//! Driving-process models: state-(in)dependent coefficient fields, jump
//! measures and the validated [`DrivingModel`].

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quad::{self, Budget};

/// A scalar coefficient, either constant or a periodic harmonic sum.
///
/// Periodic fields are periodic by construction, which is what condition
/// (C4)-style models need; the model validator additionally spot-checks
/// periodicity numerically.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarField {
    Constant(f64),
    Periodic { base: f64, harmonics: Vec<Harmonic> },
}

/// One cosine mode `amplitude * cos(2 pi mode x_axis / tau_axis + phase)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Harmonic {
    pub axis: usize,
    pub mode: i64,
    pub amplitude: f64,
    pub phase: f64,
}

impl ScalarField {
    pub fn constant(v: f64) -> Self {
        ScalarField::Constant(v)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, ScalarField::Constant(_))
    }

    pub fn eval(&self, x: &[f64], period: Option<&[f64]>) -> f64 {
        match self {
            ScalarField::Constant(v) => *v,
            ScalarField::Periodic { base, harmonics } => {
                let tau = period.expect("periodic field requires a period");
                let mut acc = *base;
                for h in harmonics {
                    let theta = std::f64::consts::TAU * h.mode as f64 * x[h.axis] / tau[h.axis]
                        + h.phase;
                    acc += h.amplitude * theta.cos();
                }
                acc
            }
        }
    }

    fn validate(&self, dim: usize, has_period: bool, what: &str) -> Result<()> {
        match self {
            ScalarField::Constant(v) => {
                if !v.is_finite() {
                    return Err(Error::InvalidModel(format!("{what}: non-finite constant")));
                }
            }
            ScalarField::Periodic { base, harmonics } => {
                if !has_period {
                    return Err(Error::InvalidModel(format!(
                        "{what}: periodic coefficient on a model without a period"
                    )));
                }
                if !base.is_finite() {
                    return Err(Error::InvalidModel(format!("{what}: non-finite base")));
                }
                for h in harmonics {
                    if h.axis >= dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            got: h.axis,
                        });
                    }
                    if !h.amplitude.is_finite() || !h.phase.is_finite() {
                        return Err(Error::InvalidModel(format!("{what}: non-finite harmonic")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Symmetric matrix of scalar fields (row-major).
#[derive(Debug, Clone)]
pub struct MatrixField {
    dim: usize,
    entries: Vec<ScalarField>,
}

impl MatrixField {
    pub fn new(dim: usize, entries: Vec<ScalarField>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        for i in 0..dim {
            for j in 0..i {
                if entries[i * dim + j] != entries[j * dim + i] {
                    return Err(Error::InvalidModel(format!(
                        "diffusion matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![ScalarField::Constant(0.0); dim * dim],
        }
    }

    pub fn constant(dim: usize, row_major: &[f64]) -> Result<Self> {
        Self::new(
            dim,
            row_major.iter().map(|&v| ScalarField::Constant(v)).collect(),
        )
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            dim: 1,
            entries: vec![ScalarField::Constant(value)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_constant(&self) -> bool {
        self.entries.iter().all(ScalarField::is_constant)
    }

    pub fn is_zero(&self) -> bool {
        self.entries
            .iter()
            .all(|e| matches!(e, ScalarField::Constant(v) if *v == 0.0))
    }

    /// Row-major evaluation into `out` (`dim * dim` slots).
    pub fn eval_into(&self, x: &[f64], period: Option<&[f64]>, out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.entries) {
            *o = e.eval(x, period);
        }
    }

    pub fn eval(&self, x: &[f64], period: Option<&[f64]>) -> Vec<f64> {
        let mut out = vec![0.0; self.dim * self.dim];
        self.eval_into(x, period, &mut out);
        out
    }
}

/// Symmetric square root of a PSD matrix (row-major), via eigendecomposition.
/// Small negative eigenvalues within `psd_tol` are clamped to zero.
pub fn symmetric_sqrt(flat: &[f64], dim: usize, psd_tol: f64) -> Result<Vec<f64>> {
    let m = DMatrix::from_row_slice(dim, dim, flat);
    let scale = flat.iter().fold(0.0_f64, |a, &v| a.max(v.abs())).max(1.0);
    let eig = m.symmetric_eigen();
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < -psd_tol * scale {
            return Err(Error::NotPositiveSemidefinite(*v));
        }
        *v = v.max(0.0).sqrt();
    }
    let sqrt = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    Ok(sqrt.transpose().iter().copied().collect()) // row-major
}

/// One atom of a purely atomic jump measure.
#[derive(Debug, Clone)]
pub struct JumpAtom {
    pub location: Vec<f64>,
    pub rate: f64,
}

/// Normalized jump-size law of a finite-activity measure.
#[derive(Debug, Clone)]
pub enum JumpLaw {
    /// Mixture of isotropic Gaussian bumps; evaluable density.
    GaussianBumps(Vec<GaussianBump>),
    /// Uniform law on an axis-aligned box; evaluable density.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Resampling from a fixed point cloud; sampler-only (no density).
    Empirical(Vec<Vec<f64>>),
}

#[derive(Debug, Clone)]
pub struct GaussianBump {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub std: f64,
}

impl JumpLaw {
    pub fn dim(&self) -> usize {
        match self {
            JumpLaw::GaussianBumps(c) => c.first().map(|b| b.mean.len()).unwrap_or(0),
            JumpLaw::UniformBox { lo, .. } => lo.len(),
            JumpLaw::Empirical(p) => p.first().map(Vec::len).unwrap_or(0),
        }
    }

    pub fn has_density(&self) -> bool {
        !matches!(self, JumpLaw::Empirical(_))
    }

    /// Probability density at `y`, when one exists.
    pub fn density(&self, y: &[f64]) -> Option<f64> {
        match self {
            JumpLaw::GaussianBumps(comps) => {
                let d = y.len() as f64;
                let mut acc = 0.0;
                for c in comps {
                    let r2: f64 = y
                        .iter()
                        .zip(&c.mean)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    let norm = (std::f64::consts::TAU * c.std * c.std).powf(-0.5 * d);
                    acc += c.weight * norm * (-0.5 * r2 / (c.std * c.std)).exp();
                }
                Some(acc)
            }
            JumpLaw::UniformBox { lo, hi } => {
                let mut vol = 1.0;
                for (a, b) in lo.iter().zip(hi) {
                    vol *= b - a;
                }
                let inside = y.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| v >= a && v <= b);
                Some(if inside { 1.0 / vol } else { 0.0 })
            }
            JumpLaw::Empirical(_) => None,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        loop {
            match self {
                JumpLaw::GaussianBumps(comps) => {
                    let mut u: f64 = rng.random();
                    let mut chosen = comps.len() - 1;
                    for (i, c) in comps.iter().enumerate() {
                        if u < c.weight {
                            chosen = i;
                            break;
                        }
                        u -= c.weight;
                    }
                    let c = &comps[chosen];
                    for (o, m) in out.iter_mut().zip(&c.mean) {
                        let z: f64 = StandardNormal.sample(rng);
                        *o = m + c.std * z;
                    }
                }
                JumpLaw::UniformBox { lo, hi } => {
                    for (o, (a, b)) in out.iter_mut().zip(lo.iter().zip(hi)) {
                        *o = rng.random_range(*a..*b);
                    }
                }
                JumpLaw::Empirical(points) => {
                    let i = rng.random_range(0..points.len());
                    out.copy_from_slice(&points[i]);
                }
            }
            // nu({0}) = 0: never emit the zero vector.
            if out.iter().any(|&v| v != 0.0) {
                return;
            }
        }
    }

    /// 1-d support segments for quadrature, widest first merged.
    pub fn support_1d(&self) -> Result<(f64, f64)> {
        match self {
            JumpLaw::GaussianBumps(comps) => {
                let lo = comps
                    .iter()
                    .map(|c| c.mean[0] - 10.0 * c.std)
                    .fold(f64::INFINITY, f64::min);
                let hi = comps
                    .iter()
                    .map(|c| c.mean[0] + 10.0 * c.std)
                    .fold(f64::NEG_INFINITY, f64::max);
                Ok((lo, hi))
            }
            JumpLaw::UniformBox { lo, hi } => Ok((lo[0], hi[0])),
            JumpLaw::Empirical(_) => Err(Error::SamplerOnlyJumpLaw),
        }
    }

    /// 1-d quadrature segments that actually carry density mass. Narrow
    /// mixture components would be invisible to an adaptive rule probing a
    /// wide interval, so each component contributes its own segment.
    pub fn quad_segments_1d(&self) -> Result<Vec<(f64, f64)>> {
        match self {
            JumpLaw::GaussianBumps(comps) => {
                let mut segs: Vec<(f64, f64)> = comps
                    .iter()
                    .map(|c| (c.mean[0] - 10.0 * c.std, c.mean[0] + 10.0 * c.std))
                    .collect();
                segs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                let mut merged: Vec<(f64, f64)> = Vec::new();
                for s in segs {
                    match merged.last_mut() {
                        Some(last) if s.0 <= last.1 => last.1 = last.1.max(s.1),
                        _ => merged.push(s),
                    }
                }
                Ok(merged)
            }
            JumpLaw::UniformBox { lo, hi } => Ok(vec![(lo[0], hi[0])]),
            JumpLaw::Empirical(_) => Err(Error::SamplerOnlyJumpLaw),
        }
    }

    /// Mean of `y 1_{|y| <= 1}` under the law; used to convert the
    /// compensated drift into the uncompensated simulation drift.
    pub fn mean_within_unit_ball(&self) -> Result<Vec<f64>> {
        let d = self.dim();
        match self {
            JumpLaw::Empirical(points) => {
                // The empirical cloud *is* the simulated law, so its in-ball
                // mean is exact for simulation purposes.
                let mut acc = vec![0.0; d];
                for p in points {
                    let r2: f64 = p.iter().map(|v| v * v).sum();
                    if r2 <= 1.0 {
                        for (a, v) in acc.iter_mut().zip(p) {
                            *a += v;
                        }
                    }
                }
                for a in &mut acc {
                    *a /= points.len() as f64;
                }
                Ok(acc)
            }
            _ if d == 1 => {
                let (lo, hi) = self.support_1d()?;
                let a = lo.max(-1.0);
                let b = hi.min(1.0);
                if a >= b {
                    return Ok(vec![0.0]);
                }
                let mut budget = Budget::new(quad::DEFAULT_BUDGET);
                let v: f64 = quad::adaptive_simpson(
                    &|y: f64| y * self.density(&[y]).unwrap_or(0.0),
                    a,
                    b,
                    1e-12,
                    &mut budget,
                )?;
                Ok(vec![v])
            }
            _ => {
                // Tensor grid over the bounding box intersected with the ball.
                let (lo, hi) = self.bounding_box();
                let n = 96usize;
                let mut acc = vec![0.0; d];
                let mut idx = vec![0usize; d];
                let total = n.pow(d as u32);
                if total > (1 << 24) {
                    return Err(Error::InvalidModel("jump-law dimension too large".into()));
                }
                let mut y = vec![0.0; d];
                let mut cell = 1.0;
                for j in 0..d {
                    cell *= (hi[j] - lo[j]) / n as f64;
                }
                for _ in 0..total {
                    for j in 0..d {
                        y[j] = lo[j] + (hi[j] - lo[j]) * (idx[j] as f64 + 0.5) / n as f64;
                    }
                    let r2: f64 = y.iter().map(|v| v * v).sum();
                    if r2 <= 1.0 {
                        let rho = self.density(&y).unwrap_or(0.0);
                        for (a, v) in acc.iter_mut().zip(&y) {
                            *a += v * rho * cell;
                        }
                    }
                    for j in (0..d).rev() {
                        idx[j] += 1;
                        if idx[j] < n {
                            break;
                        }
                        idx[j] = 0;
                    }
                }
                Ok(acc)
            }
        }
    }

    /// Mass-carrying ranges along one axis (merged across components).
    pub fn axis_segments(&self, axis: usize) -> Result<Vec<(f64, f64)>> {
        match self {
            JumpLaw::GaussianBumps(comps) => {
                let mut segs: Vec<(f64, f64)> = comps
                    .iter()
                    .map(|c| (c.mean[axis] - 10.0 * c.std, c.mean[axis] + 10.0 * c.std))
                    .collect();
                segs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                let mut merged: Vec<(f64, f64)> = Vec::new();
                for s in segs {
                    match merged.last_mut() {
                        Some(last) if s.0 <= last.1 => last.1 = last.1.max(s.1),
                        _ => merged.push(s),
                    }
                }
                Ok(merged)
            }
            JumpLaw::UniformBox { lo, hi } => Ok(vec![(lo[axis], hi[axis])]),
            JumpLaw::Empirical(_) => Err(Error::SamplerOnlyJumpLaw),
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        match self {
            JumpLaw::GaussianBumps(comps) => {
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for c in comps {
                    for j in 0..d {
                        lo[j] = lo[j].min(c.mean[j] - 10.0 * c.std);
                        hi[j] = hi[j].max(c.mean[j] + 10.0 * c.std);
                    }
                }
                (lo, hi)
            }
            JumpLaw::UniformBox { lo, hi } => (lo.clone(), hi.clone()),
            JumpLaw::Empirical(points) => {
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for p in points {
                    for j in 0..d {
                        lo[j] = lo[j].min(p[j]);
                        hi[j] = hi[j].max(p[j]);
                    }
                }
                (lo, hi)
            }
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.dim(),
            });
        }
        match self {
            JumpLaw::GaussianBumps(comps) => {
                if comps.is_empty() {
                    return Err(Error::InvalidModel("empty Gaussian mixture".into()));
                }
                let total: f64 = comps.iter().map(|c| c.weight).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidModel(format!(
                        "mixture weights sum to {total}, expected 1"
                    )));
                }
                for c in comps {
                    if !(c.weight > 0.0) || !(c.std > 0.0) || c.mean.len() != dim {
                        return Err(Error::InvalidModel("invalid Gaussian bump".into()));
                    }
                }
            }
            JumpLaw::UniformBox { lo, hi } => {
                if lo.len() != dim || hi.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: lo.len(),
                    });
                }
                for (a, b) in lo.iter().zip(hi) {
                    if !(a < b) {
                        return Err(Error::InvalidModel("uniform box must have lo < hi".into()));
                    }
                }
            }
            JumpLaw::Empirical(points) => {
                if points.is_empty() {
                    return Err(Error::InvalidModel("empty empirical jump law".into()));
                }
                for p in points {
                    if p.len() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            got: p.len(),
                        });
                    }
                    if p.iter().all(|&v| v == 0.0) {
                        return Err(Error::InvalidModel(
                            "empirical jump law contains the zero vector".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// The jump part of a Levy quadruple / state-dependent triplet.
#[derive(Debug, Clone)]
pub enum JumpMeasure {
    /// Finitely many atoms with fixed rates (state-independent).
    Atoms(Vec<JumpAtom>),
    /// Finite total activity with a state-dependent rate and a normalized
    /// jump-size law.
    FiniteDensity { rate: ScalarField, law: JumpLaw },
    /// Rotationally symmetric stable jumps with symbol
    /// `gamma(x) |xi|^{alpha(x)}`; constant fields give a Levy process,
    /// state-dependent fields a stable-like process.
    SymmetricStable { alpha: ScalarField, gamma: ScalarField },
}

impl JumpMeasure {
    pub fn atoms(locations_rates: Vec<(Vec<f64>, f64)>) -> Self {
        JumpMeasure::Atoms(
            locations_rates
                .into_iter()
                .map(|(location, rate)| JumpAtom { location, rate })
                .collect(),
        )
    }

    pub fn is_state_independent(&self) -> bool {
        match self {
            JumpMeasure::Atoms(_) => true,
            JumpMeasure::FiniteDensity { rate, .. } => rate.is_constant(),
            JumpMeasure::SymmetricStable { alpha, gamma } => {
                alpha.is_constant() && gamma.is_constant()
            }
        }
    }

    pub fn has_finite_activity(&self) -> bool {
        !matches!(self, JumpMeasure::SymmetricStable { .. })
    }

    fn validate(&self, dim: usize, has_period: bool) -> Result<()> {
        match self {
            JumpMeasure::Atoms(atoms) => {
                if atoms.is_empty() {
                    return Err(Error::InvalidModel(
                        "atomic jump measure needs at least one atom".into(),
                    ));
                }
                for a in atoms {
                    if a.location.len() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            got: a.location.len(),
                        });
                    }
                    if !(a.rate > 0.0) || !a.rate.is_finite() {
                        return Err(Error::InvalidModel("atom rates must be positive".into()));
                    }
                    if a.location.iter().all(|&v| v == 0.0) {
                        return Err(Error::InvalidModel(
                            "jump measure must not charge the origin".into(),
                        ));
                    }
                }
            }
            JumpMeasure::FiniteDensity { rate, law } => {
                rate.validate(dim, has_period, "jump rate")?;
                law.validate(dim)?;
            }
            JumpMeasure::SymmetricStable { alpha, gamma } => {
                alpha.validate(dim, has_period, "stability index")?;
                gamma.validate(dim, has_period, "stable scale")?;
            }
        }
        Ok(())
    }
}

/// Normalizing constant `C(alpha)` of the 1-d symmetric stable measure
/// `nu(dy) = gamma C(alpha) |y|^{-1-alpha} dy`, chosen so that the jump part
/// of the symbol is exactly `gamma |xi|^alpha`.
///
/// Written via `sinc` around `alpha = 1` to avoid the 0/0 cancellation in the
/// textbook form `alpha (1-alpha) / (2 Gamma(2-alpha) cos(pi alpha / 2))`.
pub fn stable_measure_constant(alpha: f64) -> f64 {
    let u = 1.0 - alpha;
    let z = std::f64::consts::FRAC_PI_2 * u;
    let sinc = if z.abs() < 1e-8 { 1.0 } else { z.sin() / z };
    alpha / (std::f64::consts::PI * gamma(1.0 + u) * sinc)
}

/// A diffusion with jumps: triplet `(b(x), c(x), nu(x, dy))`, no killing
/// term, with an optional period vector when the coefficients are periodic.
#[derive(Debug, Clone)]
pub struct DrivingModel {
    dim: usize,
    drift: Vec<ScalarField>,
    diffusion: MatrixField,
    jumps: Option<JumpMeasure>,
    period: Option<Vec<f64>>,
}

impl DrivingModel {
    pub fn new(
        dim: usize,
        drift: Vec<ScalarField>,
        diffusion: MatrixField,
        jumps: Option<JumpMeasure>,
        period: Option<Vec<f64>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("dimension must be at least 1".into()));
        }
        if drift.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: drift.len(),
            });
        }
        if diffusion.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: diffusion.dim(),
            });
        }
        if let Some(tau) = &period {
            if tau.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: tau.len(),
                });
            }
            if tau.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
                return Err(Error::InvalidModel(
                    "period components must be positive and finite".into(),
                ));
            }
        }
        let model = Self {
            dim,
            drift,
            diffusion,
            jumps,
            period,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let has_period = self.period.is_some();
        for (i, f) in self.drift.iter().enumerate() {
            f.validate(self.dim, has_period, &format!("drift[{i}]"))?;
        }
        for e in &self.diffusion.entries {
            e.validate(self.dim, has_period, "diffusion")?;
        }
        let probes = self.probe_points();
        if let Some(j) = &self.jumps {
            j.validate(self.dim, has_period)?;
        }

        // c(x) symmetric nonnegative definite at every probe, checked by an
        // attempted square-root factorization.
        let mut c = vec![0.0; self.dim * self.dim];
        for x in &probes {
            self.diffusion.eval_into(x, self.period.as_deref(), &mut c);
            symmetric_sqrt(&c, self.dim, 1e-9)?;
        }

        // Stable-like bounds: 0 < inf alpha <= sup alpha < 2, inf gamma > 0.
        if let Some(JumpMeasure::SymmetricStable { alpha, gamma }) = &self.jumps {
            let mut amin = f64::INFINITY;
            let mut amax = f64::NEG_INFINITY;
            let mut gmin = f64::INFINITY;
            for x in &probes {
                let a = alpha.eval(x, self.period.as_deref());
                let g = gamma.eval(x, self.period.as_deref());
                amin = amin.min(a);
                amax = amax.max(a);
                gmin = gmin.min(g);
            }
            if !(amin > 0.0) || !(amax < 2.0) {
                return Err(Error::InvalidModel(format!(
                    "stability index must stay strictly inside (0,2); probed range [{amin}, {amax}]"
                )));
            }
            if !(gmin > 0.0) {
                return Err(Error::InvalidModel(
                    "stable scale must be strictly positive".into(),
                ));
            }
        }

        // Finite-activity rate must be nonnegative and finite on the probes.
        if let Some(JumpMeasure::FiniteDensity { rate, .. }) = &self.jumps {
            for x in &probes {
                let r = rate.eval(x, self.period.as_deref());
                if !(r >= 0.0) || !r.is_finite() {
                    return Err(Error::InvalidModel(
                        "jump rate must be nonnegative and finite".into(),
                    ));
                }
            }
        }

        // Boundedness of the coefficients over the probe grid.
        let bounds = self.coefficient_bounds();
        if !bounds.all_finite() {
            return Err(Error::InvalidModel(
                "coefficient bounds are not finite on the probe grid".into(),
            ));
        }

        // Periodicity spot check along each axis.
        if let Some(tau) = &self.period {
            for x in probes.iter().take(5) {
                for j in 0..self.dim {
                    let mut shifted = x.clone();
                    shifted[j] += tau[j];
                    for (i, f) in self.drift.iter().enumerate() {
                        let a = f.eval(x, Some(tau));
                        let b = f.eval(&shifted, Some(tau));
                        if (a - b).abs() > 1e-9 * (1.0 + a.abs()) {
                            return Err(Error::InvalidModel(format!(
                                "drift[{i}] is not tau-periodic along axis {j}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Deterministic probe grid used by validation and the condition checks:
    /// one period per axis when periodic, `[-5, 5]` otherwise.
    pub fn probe_points(&self) -> Vec<Vec<f64>> {
        let per_axis = match self.dim {
            1 => 17,
            2 => 7,
            _ => 3,
        };
        let mut points = Vec::new();
        let mut idx = vec![0usize; self.dim];
        let total = per_axis_pow(per_axis, self.dim);
        for _ in 0..total {
            let mut x = vec![0.0; self.dim];
            for j in 0..self.dim {
                x[j] = match &self.period {
                    Some(tau) => tau[j] * (idx[j] as f64 + 0.37) / per_axis as f64,
                    None => -5.0 + 10.0 * (idx[j] as f64 + 0.37) / per_axis as f64,
                };
            }
            points.push(x);
            for j in (0..self.dim).rev() {
                idx[j] += 1;
                if idx[j] < per_axis {
                    break;
                }
                idx[j] = 0;
            }
        }
        points
    }

    /// Sup over the probe grid of `|b|`, `||c||` and the jump moment
    /// `int min(1, |y|^2) nu(x, dy)`; all must be finite for (C2).
    pub fn coefficient_bounds(&self) -> CoefficientBounds {
        let probes = self.probe_points();
        let tau = self.period.as_deref();
        let mut sup_drift = 0.0_f64;
        let mut sup_diffusion = 0.0_f64;
        let mut sup_jump = 0.0_f64;
        let mut c = vec![0.0; self.dim * self.dim];
        for x in &probes {
            let b2: f64 = self
                .drift
                .iter()
                .map(|f| f.eval(x, tau).powi(2))
                .sum();
            sup_drift = sup_drift.max(b2.sqrt());
            self.diffusion.eval_into(x, tau, &mut c);
            sup_diffusion = sup_diffusion.max(c.iter().fold(0.0_f64, |a, &v| a.max(v.abs())));
            sup_jump = sup_jump.max(match &self.jumps {
                None => 0.0,
                Some(JumpMeasure::Atoms(atoms)) => atoms
                    .iter()
                    .map(|a| {
                        let r2: f64 = a.location.iter().map(|v| v * v).sum();
                        a.rate * r2.min(1.0)
                    })
                    .sum(),
                Some(JumpMeasure::FiniteDensity { rate, .. }) => {
                    // min(1, |y|^2) <= 1 and the law is a probability measure.
                    rate.eval(x, tau)
                }
                Some(JumpMeasure::SymmetricStable { alpha, gamma }) => {
                    let a = alpha.eval(x, tau);
                    let g = gamma.eval(x, tau);
                    let c_alpha = stable_measure_constant(a);
                    2.0 * g * c_alpha * (1.0 / (2.0 - a) + 1.0 / a)
                }
            });
        }
        CoefficientBounds {
            sup_drift,
            sup_diffusion,
            sup_jump_moment: sup_jump,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> Option<&[f64]> {
        self.period.as_deref()
    }

    pub fn jumps(&self) -> Option<&JumpMeasure> {
        self.jumps.as_ref()
    }

    pub fn diffusion(&self) -> &MatrixField {
        &self.diffusion
    }

    pub fn drift_fields(&self) -> &[ScalarField] {
        &self.drift
    }

    pub fn drift_at(&self, x: &[f64], out: &mut [f64]) {
        for (o, f) in out.iter_mut().zip(&self.drift) {
            *o = f.eval(x, self.period.as_deref());
        }
    }

    pub fn diffusion_at(&self, x: &[f64], out: &mut [f64]) {
        self.diffusion.eval_into(x, self.period.as_deref(), out);
    }

    /// Constant coefficients in every slot: the model is a Levy process.
    pub fn is_levy(&self) -> bool {
        self.drift.iter().all(ScalarField::is_constant)
            && self.diffusion.is_constant()
            && self.jumps.as_ref().map_or(true, JumpMeasure::is_state_independent)
    }

    /// Total finite-activity jump rate at `x`; `None` for stable measures.
    pub fn total_jump_rate(&self, x: &[f64]) -> Option<f64> {
        match &self.jumps {
            None => Some(0.0),
            Some(JumpMeasure::Atoms(atoms)) => Some(atoms.iter().map(|a| a.rate).sum()),
            Some(JumpMeasure::FiniteDensity { rate, .. }) => {
                Some(rate.eval(x, self.period.as_deref()))
            }
            Some(JumpMeasure::SymmetricStable { .. }) => None,
        }
    }
}

fn per_axis_pow(per_axis: usize, dim: usize) -> usize {
    per_axis.pow(dim as u32)
}

/// Probe-grid sups backing the boundedness condition.
#[derive(Debug, Clone)]
pub struct CoefficientBounds {
    pub sup_drift: f64,
    pub sup_diffusion: f64,
    pub sup_jump_moment: f64,
}

impl CoefficientBounds {
    pub fn all_finite(&self) -> bool {
        self.sup_drift.is_finite()
            && self.sup_diffusion.is_finite()
            && self.sup_jump_moment.is_finite()
    }
}
