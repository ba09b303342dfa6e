//! Path simulation for the driving process and the tracer.
//!
//! Constant-coefficient models are stepped with per-increment exact laws:
//! Gaussian part via the covariance square root, atomic jumps via Poisson
//! counts per atom (with the compensator folded into the drift), stable
//! jumps via Chambers-Mallows-Stuck variates. State-dependent models use an
//! Euler scheme with coefficients frozen at the left endpoint.
//!
//! Reproducibility contract: every path owns a counter-derived RNG stream,
//! so a `(seed, config)` pair determines each path bit-exactly regardless of
//! how many workers participate. Aggregation happens in path-id order.

mod stable;

pub use stable::{isotropic_stable_increment, standard_one_sided_stable, standard_symmetric_stable};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generator::{velocity, VelocityField};
use crate::symbols::{
    symmetric_sqrt, DrivingModel, FrequencyConvention, JumpMeasure, ScalarField,
};
use crate::torus::{project_into, PeriodicFunction};

/// Which half of a path's randomness a stream drives.
#[derive(Debug, Clone, Copy)]
pub enum StreamRole {
    Driving,
    Tracer,
}

/// Counter-based stream id: disjoint across phases, paths and roles.
pub fn stream_id(phase: u64, path: u64, role: StreamRole) -> u64 {
    debug_assert!(path < (1 << 39));
    (phase << 40) | (path << 1) | role as u64
}

/// Independent RNG for one path and role.
pub fn path_rng(seed: u64, phase: u64, path: u64, role: StreamRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(phase, path, role));
    rng
}

/// One jump applied to a path: time, size, in application order.
#[derive(Debug, Clone)]
pub struct JumpEvent {
    pub time: f64,
    pub size: Vec<f64>,
}

/// A simulated trajectory of the driving process on a uniform grid.
#[derive(Debug, Clone)]
pub struct PathSample {
    pub dim: usize,
    pub dt: f64,
    /// States at `t_m = m dt`, flattened row-major: `(n_steps + 1) * dim`.
    pub states: Vec<f64>,
    /// Torus projections of the states; present iff the model is periodic.
    pub torus_states: Option<Vec<f64>>,
    /// Period vector backing `torus_states`.
    pub period: Option<Vec<f64>>,
    /// Finite-activity jumps in application order (empty for stable noise,
    /// whose increments are not event-like).
    pub jumps: Vec<JumpEvent>,
    /// RNG stream that produced the path.
    pub stream: u64,
}

impl PathSample {
    pub fn n_steps(&self) -> usize {
        self.states.len() / self.dim - 1
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps() as f64 * self.dt
    }

    pub fn state(&self, m: usize) -> &[f64] {
        &self.states[m * self.dim..(m + 1) * self.dim]
    }

    pub fn torus_state(&self, m: usize) -> Option<&[f64]> {
        self.torus_states
            .as_ref()
            .map(|t| &t[m * self.dim..(m + 1) * self.dim])
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.n_steps())
    }
}

/// Incremental path generator; owns the per-path RNG.
pub struct Stepper {
    model: DrivingModel,
    dt: f64,
    t: f64,
    state: Vec<f64>,
    rng: ChaCha8Rng,
    stream: u64,
    log_jumps: bool,
    jumps: Vec<JumpEvent>,
    // Cached constant-coefficient machinery.
    drift_const: Option<Vec<f64>>,
    sqrt_c_const: Option<Vec<f64>>,
    diffusion_zero: bool,
    atom_plan: Option<Vec<(Vec<f64>, Poisson<f64>)>>,
    density_mean01: Option<Vec<f64>>,
    scratch_b: Vec<f64>,
    scratch_c: Vec<f64>,
    scratch_z: Vec<f64>,
    scratch_jump: Vec<f64>,
}

impl Stepper {
    /// Exact-in-law stepper; requires constant coefficients.
    pub fn new_exact(model: &DrivingModel, x0: &[f64], dt: f64, rng: ChaCha8Rng) -> Result<Self> {
        if !model.is_levy() {
            return Err(Error::RequiresConstantCoefficients);
        }
        Self::build(model, x0, dt, rng)
    }

    /// Euler stepper with coefficients frozen at the left endpoint. For
    /// finite-activity jumps the step must satisfy `sup lambda * dt <= 0.5`.
    pub fn new_euler(model: &DrivingModel, x0: &[f64], dt: f64, rng: ChaCha8Rng) -> Result<Self> {
        if model.jumps().map_or(false, JumpMeasure::has_finite_activity) {
            let sup_rate = model
                .probe_points()
                .iter()
                .filter_map(|x| model.total_jump_rate(x))
                .fold(0.0_f64, f64::max);
            if sup_rate * dt > 0.5 {
                return Err(Error::StepTooCoarse(sup_rate * dt));
            }
        }
        Self::build(model, x0, dt, rng)
    }

    fn build(model: &DrivingModel, x0: &[f64], dt: f64, rng: ChaCha8Rng) -> Result<Self> {
        let dim = model.dim();
        if x0.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: x0.len(),
            });
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidModel("time step must be positive".into()));
        }
        let stream = rng.get_stream();

        // Compensator of small jumps, folded into the simulation drift:
        // b_eff(x) = b(x) - int_{|y|<=1} y nu(x, dy).
        let mut comp = vec![0.0; dim];
        let mut density_mean01 = None;
        match model.jumps() {
            Some(JumpMeasure::Atoms(atoms)) => {
                for a in atoms {
                    let r2: f64 = a.location.iter().map(|v| v * v).sum();
                    if r2 <= 1.0 {
                        for (c, y) in comp.iter_mut().zip(&a.location) {
                            *c += a.rate * y;
                        }
                    }
                }
            }
            Some(JumpMeasure::FiniteDensity { law, .. }) => {
                density_mean01 = Some(law.mean_within_unit_ball()?);
            }
            // Symmetric stable: the compensator vanishes by symmetry.
            _ => {}
        }

        let drift_const = if model.drift_fields().iter().all(ScalarField::is_constant) {
            let mut b = vec![0.0; dim];
            model.drift_at(x0, &mut b);
            match (model.jumps(), &density_mean01) {
                (Some(JumpMeasure::FiniteDensity { rate, .. }), Some(m01))
                    if rate.is_constant() =>
                {
                    let lambda = rate.eval(x0, model.period());
                    for (bi, (c, m)) in b.iter_mut().zip(comp.iter().zip(m01)) {
                        *bi -= c + lambda * m;
                    }
                }
                (Some(JumpMeasure::FiniteDensity { .. }), _) => {
                    // state-dependent rate handled per step
                    for (bi, c) in b.iter_mut().zip(&comp) {
                        *bi -= c;
                    }
                }
                _ => {
                    for (bi, c) in b.iter_mut().zip(&comp) {
                        *bi -= c;
                    }
                }
            }
            Some(b)
        } else {
            None
        };

        let diffusion_zero = model.diffusion().is_zero();
        let sqrt_c_const = if model.diffusion().is_constant() && !diffusion_zero {
            let mut c = vec![0.0; dim * dim];
            model.diffusion_at(x0, &mut c);
            Some(symmetric_sqrt(&c, dim, 1e-9)?)
        } else {
            None
        };

        let atom_plan = match model.jumps() {
            Some(JumpMeasure::Atoms(atoms)) => {
                let mut plan = Vec::with_capacity(atoms.len());
                for a in atoms {
                    let pois = Poisson::new(a.rate * dt)
                        .map_err(|e| Error::Numeric(format!("poisson: {e}")))?;
                    plan.push((a.location.clone(), pois));
                }
                Some(plan)
            }
            _ => None,
        };

        Ok(Self {
            model: model.clone(),
            dt,
            t: 0.0,
            state: x0.to_vec(),
            rng,
            stream,
            log_jumps: true,
            jumps: Vec::new(),
            drift_const,
            sqrt_c_const,
            diffusion_zero,
            atom_plan,
            density_mean01,
            scratch_b: vec![0.0; dim],
            scratch_c: vec![0.0; dim * dim],
            scratch_z: vec![0.0; dim],
            scratch_jump: vec![0.0; dim],
        })
    }

    pub fn set_log_jumps(&mut self, log: bool) {
        self.log_jumps = log;
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn take_jumps(&mut self) -> Vec<JumpEvent> {
        std::mem::take(&mut self.jumps)
    }

    /// Advances one step of `dt`.
    pub fn step(&mut self) {
        let dim = self.state.len();
        let dt = self.dt;
        let tau = self.model.period();

        // Drift (with the jump compensator folded in).
        match &self.drift_const {
            Some(b) => {
                for (s, bi) in self.state.iter_mut().zip(b) {
                    *s += bi * dt;
                }
            }
            None => {
                self.model.drift_at(&self.state, &mut self.scratch_b);
                if let (Some(JumpMeasure::FiniteDensity { rate, .. }), Some(m01)) =
                    (self.model.jumps(), &self.density_mean01)
                {
                    let lambda = rate.eval(&self.state, tau);
                    for (b, m) in self.scratch_b.iter_mut().zip(m01) {
                        *b -= lambda * m;
                    }
                }
                for (s, b) in self.state.iter_mut().zip(&self.scratch_b) {
                    *s += b * dt;
                }
            }
        }

        // Gaussian part.
        if !self.diffusion_zero {
            for z in self.scratch_z.iter_mut() {
                *z = StandardNormal.sample(&mut self.rng);
            }
            let sqrt_dt = dt.sqrt();
            match &self.sqrt_c_const {
                Some(sq) => {
                    for i in 0..dim {
                        let mut acc = 0.0;
                        for j in 0..dim {
                            acc += sq[i * dim + j] * self.scratch_z[j];
                        }
                        self.state[i] += sqrt_dt * acc;
                    }
                }
                None => {
                    self.model
                        .diffusion()
                        .eval_into(&self.state, tau, &mut self.scratch_c);
                    // PSD validated on the probe grid; clamp stray negatives.
                    let sq = symmetric_sqrt(&self.scratch_c, dim, 1e-6)
                        .unwrap_or_else(|_| vec![0.0; dim * dim]);
                    for i in 0..dim {
                        let mut acc = 0.0;
                        for j in 0..dim {
                            acc += sq[i * dim + j] * self.scratch_z[j];
                        }
                        self.state[i] += sqrt_dt * acc;
                    }
                }
            }
        }

        // Jumps, applied at the end of the step.
        let mut step_jumps = 0usize;
        match self.model.jumps() {
            None => {}
            Some(JumpMeasure::Atoms(_)) => {
                let plan = self.atom_plan.as_ref().expect("atom plan");
                for (loc, pois) in plan {
                    let count = pois.sample(&mut self.rng) as u64;
                    for _ in 0..count {
                        for (s, y) in self.state.iter_mut().zip(loc) {
                            *s += y;
                        }
                        if self.log_jumps {
                            self.jumps.push(JumpEvent {
                                time: 0.0, // patched below
                                size: loc.clone(),
                            });
                        }
                        step_jumps += 1;
                    }
                }
            }
            Some(JumpMeasure::FiniteDensity { rate, law }) => {
                let lambda = rate.eval(&self.state, tau);
                if lambda > 0.0 {
                    let pois = Poisson::new(lambda * dt).expect("positive mean");
                    let count = pois.sample(&mut self.rng) as u64;
                    for _ in 0..count {
                        law.sample(&mut self.rng, &mut self.scratch_jump);
                        for (s, y) in self.state.iter_mut().zip(&self.scratch_jump) {
                            *s += y;
                        }
                        if self.log_jumps {
                            self.jumps.push(JumpEvent {
                                time: 0.0,
                                size: self.scratch_jump.clone(),
                            });
                        }
                        step_jumps += 1;
                    }
                }
            }
            Some(JumpMeasure::SymmetricStable { alpha, gamma }) => {
                let a = alpha.eval(&self.state, tau);
                let g = gamma.eval(&self.state, tau);
                isotropic_stable_increment(a, g * dt, &mut self.rng, &mut self.scratch_jump);
                for (s, y) in self.state.iter_mut().zip(&self.scratch_jump) {
                    *s += y;
                }
            }
        }
        // Spread this step's jump times over the step interior so the log
        // stays strictly increasing.
        if step_jumps > 0 && self.log_jumps {
            let base = self.jumps.len() - step_jumps;
            for (j, ev) in self.jumps[base..].iter_mut().enumerate() {
                ev.time = self.t + dt * (j + 1) as f64 / (step_jumps + 1) as f64;
            }
        }

        self.t += dt;
    }

    /// Runs the stepper for `n_steps` and collects the full path.
    pub fn run(mut self, n_steps: usize) -> Result<PathSample> {
        let dim = self.state.len();
        let mut states = Vec::with_capacity((n_steps + 1) * dim);
        states.extend_from_slice(&self.state);
        for _ in 0..n_steps {
            self.step();
            states.extend_from_slice(&self.state);
        }
        if states.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite state in path".into()));
        }
        let torus_states = self.model.period().map(|tau| {
            let mut out = vec![0.0; states.len()];
            let mut buf = vec![0.0; dim];
            for m in 0..=n_steps {
                project_into(&states[m * dim..(m + 1) * dim], tau, &mut buf);
                out[m * dim..(m + 1) * dim].copy_from_slice(&buf);
            }
            out
        });
        Ok(PathSample {
            dim,
            dt: self.dt,
            states,
            torus_states,
            period: self.model.period().map(<[f64]>::to_vec),
            jumps: self.jumps,
            stream: self.stream,
        })
    }
}

/// Exact-in-law sample path of a constant-coefficient model.
pub fn levy_path(
    model: &DrivingModel,
    x0: &[f64],
    dt: f64,
    horizon: f64,
    rng: ChaCha8Rng,
) -> Result<PathSample> {
    let n_steps = steps_for(horizon, dt)?;
    Stepper::new_exact(model, x0, dt, rng)?.run(n_steps)
}

/// Euler path of a (possibly state-dependent) model.
pub fn feller_path(
    model: &DrivingModel,
    x0: &[f64],
    dt: f64,
    horizon: f64,
    rng: ChaCha8Rng,
) -> Result<PathSample> {
    let n_steps = steps_for(horizon, dt)?;
    Stepper::new_euler(model, x0, dt, rng)?.run(n_steps)
}

pub(crate) fn steps_for(horizon: f64, dt: f64) -> Result<usize> {
    if !(horizon > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidModel(
            "horizon and dt must be positive".into(),
        ));
    }
    Ok((horizon / dt).round().max(1.0) as usize)
}

/// The law of the tracer's constant drift vector.
#[derive(Debug, Clone)]
pub enum DriftLaw {
    PointMass(Vec<f64>),
    Gaussian { mean: Vec<f64>, cov: Vec<f64> },
    Empirical(Vec<Vec<f64>>),
}

impl DriftLaw {
    pub fn dim(&self) -> usize {
        match self {
            DriftLaw::PointMass(v) => v.len(),
            DriftLaw::Gaussian { mean, .. } => mean.len(),
            DriftLaw::Empirical(points) => points.first().map(Vec::len).unwrap_or(0),
        }
    }

    /// The mean vector; the law-of-large-numbers velocity.
    pub fn mean(&self) -> Vec<f64> {
        match self {
            DriftLaw::PointMass(v) => v.clone(),
            DriftLaw::Gaussian { mean, .. } => mean.clone(),
            DriftLaw::Empirical(points) => {
                let d = self.dim();
                let mut m = vec![0.0; d];
                for p in points {
                    for (mi, pi) in m.iter_mut().zip(p) {
                        *mi += pi;
                    }
                }
                for mi in &mut m {
                    *mi /= points.len() as f64;
                }
                m
            }
        }
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(self, DriftLaw::PointMass(_))
    }

    fn sample<R: Rng>(&self, rng: &mut R, sqrt_cov: Option<&[f64]>) -> Vec<f64> {
        match self {
            DriftLaw::PointMass(v) => v.clone(),
            DriftLaw::Gaussian { mean, .. } => {
                let d = mean.len();
                let sq = sqrt_cov.expect("gaussian drift law needs factored covariance");
                let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                let mut out = mean.clone();
                for i in 0..d {
                    for j in 0..d {
                        out[i] += sq[i * d + j] * z[j];
                    }
                }
                out
            }
            DriftLaw::Empirical(points) => points[rng.random_range(0..points.len())].clone(),
        }
    }
}

/// Initial law of the driving process.
#[derive(Debug, Clone)]
pub enum InitialLaw {
    Point(Vec<f64>),
    /// Uniform on the fundamental cell (requires a periodic model).
    UniformCell,
}

/// The tracer: `X_t = x0 + D t + int_0^t v(F_s) ds + Sigma^{1/2} B_t`.
#[derive(Debug, Clone)]
pub struct TracerModel {
    pub driving: DrivingModel,
    pub w: Vec<PeriodicFunction>,
    /// Tracer-noise covariance, row-major `d x d`.
    pub sigma: Vec<f64>,
    pub drift_law: DriftLaw,
    pub initial: InitialLaw,
    pub x0: Vec<f64>,
}

impl TracerModel {
    pub fn validate(&self) -> Result<()> {
        let d = self.w.len();
        if d == 0 {
            return Err(Error::InvalidModel("tracer needs test functions".into()));
        }
        let tau = self.w[0].period().to_vec();
        for wi in &self.w {
            if wi.period() != tau.as_slice() || wi.dim() != self.driving.dim() {
                return Err(Error::PeriodMismatch);
            }
        }
        if let Some(model_tau) = self.driving.period() {
            if model_tau
                .iter()
                .zip(&tau)
                .any(|(a, b)| (a - b).abs() > 1e-12 * b)
            {
                return Err(Error::PeriodMismatch);
            }
        } else if !self.driving.is_levy() {
            // Constant coefficients are periodic for every period; anything
            // else must declare the shared period explicitly.
            return Err(Error::RequiresPeriod);
        }
        if self.sigma.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: self.sigma.len(),
            });
        }
        symmetric_sqrt(&self.sigma, d, 1e-9)?;
        if self.drift_law.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.drift_law.dim(),
            });
        }
        if self.x0.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.x0.len(),
            });
        }
        if let DriftLaw::Gaussian { cov, mean } = &self.drift_law {
            if cov.len() != mean.len() * mean.len() {
                return Err(Error::DimensionMismatch {
                    expected: mean.len() * mean.len(),
                    got: cov.len(),
                });
            }
            symmetric_sqrt(cov, mean.len(), 1e-9)?;
        }
        Ok(())
    }

    pub fn dim_out(&self) -> usize {
        self.w.len()
    }

    pub fn sigma_is_zero(&self) -> bool {
        self.sigma.iter().all(|&v| v == 0.0)
    }

    pub fn velocity_field(&self) -> Result<VelocityField> {
        velocity(&self.driving, &self.w, FrequencyConvention::PerAxis)
    }

    fn sample_initial<R: Rng>(&self, rng: &mut R) -> Result<Vec<f64>> {
        match &self.initial {
            InitialLaw::Point(x) => {
                if x.len() != self.driving.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: self.driving.dim(),
                        got: x.len(),
                    });
                }
                Ok(x.clone())
            }
            InitialLaw::UniformCell => {
                let tau = self
                    .driving
                    .period()
                    .or_else(|| Some(self.w[0].period()))
                    .unwrap();
                Ok(tau.iter().map(|&t| rng.random_range(0.0..t)).collect())
            }
        }
    }
}

/// A tracer trajectory assembled on the driving path's grid.
#[derive(Debug, Clone)]
pub struct TracerPath {
    pub driving: PathSample,
    /// The drift vector drawn once from the drift law.
    pub drift: Vec<f64>,
    /// Tracer states, flattened `(n_steps + 1) * d`.
    pub x: Vec<f64>,
    /// The time integral `I_t = int_0^t v(F_s) ds`, stored separately.
    pub integral: Vec<f64>,
}

impl TracerPath {
    pub fn dim_out(&self) -> usize {
        self.x.len() / (self.driving.n_steps() + 1)
    }

    pub fn x_at(&self, m: usize) -> &[f64] {
        let d = self.dim_out();
        &self.x[m * d..(m + 1) * d]
    }

    pub fn integral_at(&self, m: usize) -> &[f64] {
        let d = self.dim_out();
        &self.integral[m * d..(m + 1) * d]
    }
}

/// Reusable tracer assembly: validates and factors the covariances once.
pub struct TracerRunner<'a> {
    tm: &'a TracerModel,
    v: VelocityField,
    sqrt_sigma: Option<Vec<f64>>,
    sqrt_drift_cov: Option<Vec<f64>>,
}

impl<'a> TracerRunner<'a> {
    pub fn new(tm: &'a TracerModel) -> Result<Self> {
        tm.validate()?;
        let d = tm.dim_out();
        let sqrt_sigma = if tm.sigma_is_zero() {
            None
        } else {
            Some(symmetric_sqrt(&tm.sigma, d, 1e-9)?)
        };
        let sqrt_drift_cov = match &tm.drift_law {
            DriftLaw::Gaussian { cov, mean } => Some(symmetric_sqrt(cov, mean.len(), 1e-9)?),
            _ => None,
        };
        Ok(Self {
            tm,
            v: tm.velocity_field()?,
            sqrt_sigma,
            sqrt_drift_cov,
        })
    }

    pub fn velocity(&self) -> &VelocityField {
        &self.v
    }

    /// Assembles the tracer along a driving path. The drift vector is drawn
    /// first, then one Gaussian block per step, so the draw order is stable.
    pub fn run(&self, driving: PathSample, mut rng: ChaCha8Rng) -> Result<TracerPath> {
        let tm = self.tm;
        let d = tm.dim_out();
        let n = driving.n_steps();
        let dt = driving.dt;
        let drift = tm.drift_law.sample(&mut rng, self.sqrt_drift_cov.as_deref());

        let mut x = vec![0.0; (n + 1) * d];
        let mut integral = vec![0.0; (n + 1) * d];
        let mut v_prev = vec![0.0; d];
        let mut v_cur = vec![0.0; d];
        let mut noise = vec![0.0; d];
        self.v.eval(driving.state(0), &mut v_prev)?;
        x[..d].copy_from_slice(&tm.x0);

        let sqrt_dt = dt.sqrt();
        for m in 1..=n {
            self.v.eval(driving.state(m), &mut v_cur)?;
            for i in 0..d {
                integral[m * d + i] =
                    integral[(m - 1) * d + i] + 0.5 * dt * (v_prev[i] + v_cur[i]);
            }
            if let Some(sq) = &self.sqrt_sigma {
                for z in noise.iter_mut() {
                    *z = StandardNormal.sample(&mut rng);
                }
                for i in 0..d {
                    let mut acc = 0.0;
                    for j in 0..d {
                        acc += sq[i * d + j] * noise[j];
                    }
                    x[m * d + i] = x[(m - 1) * d + i] - integral[(m - 1) * d + i]
                        + integral[m * d + i]
                        + sqrt_dt * acc;
                }
            } else {
                for i in 0..d {
                    x[m * d + i] =
                        x[(m - 1) * d + i] - integral[(m - 1) * d + i] + integral[m * d + i];
                }
            }
            v_prev.copy_from_slice(&v_cur);
        }
        // Add the constant drift D * t on top.
        for m in 0..=n {
            let t = m as f64 * dt;
            for i in 0..d {
                x[m * d + i] += drift[i] * t;
            }
        }

        Ok(TracerPath {
            driving,
            drift,
            x,
            integral,
        })
    }
}

/// One-off tracer assembly along an existing driving path.
pub fn tracer_path(
    tm: &TracerModel,
    driving: &PathSample,
    rng: ChaCha8Rng,
) -> Result<TracerPath> {
    let runner = TracerRunner::new(tm)?;
    runner.run(driving.clone(), rng)
}

/// Deterministic ensemble configuration.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Disambiguates independent ensembles under one seed.
    pub phase: u64,
}

impl RunSpec {
    pub fn new(n_paths: usize, dt: f64, horizon: f64, seed: u64) -> Self {
        Self {
            n_paths,
            dt,
            horizon,
            seed,
            phase: 0,
        }
    }

    pub fn with_phase(mut self, phase: u64) -> Self {
        self.phase = phase;
        self
    }
}

/// Runs `f` over an ensemble of driving paths, in parallel, collecting
/// results in path order. Path `i` sees the RNG stream `(seed, phase, i)`,
/// so the output is independent of the worker count.
pub fn ensemble_map<R, F>(model: &DrivingModel, spec: &RunSpec, x0: &[f64], f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize, PathSample) -> Result<R> + Sync,
{
    if spec.n_paths == 0 {
        return Err(Error::InvalidModel("ensemble needs at least one path".into()));
    }
    let n_steps = steps_for(spec.horizon, spec.dt)?;
    let exact = model.is_levy();
    (0..spec.n_paths)
        .into_par_iter()
        .map(|i| {
            let rng = path_rng(spec.seed, spec.phase, i as u64, StreamRole::Driving);
            let stepper = if exact {
                Stepper::new_exact(model, x0, spec.dt, rng)?
            } else {
                Stepper::new_euler(model, x0, spec.dt, rng)?
            };
            let path = stepper.run(n_steps)?;
            f(i, path)
        })
        .collect()
}

/// Tracer ensemble: independent driving and tracer streams per path.
pub fn ensemble_tracer_map<R, F>(tm: &TracerModel, spec: &RunSpec, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize, TracerPath) -> Result<R> + Sync,
{
    if spec.n_paths == 0 {
        return Err(Error::InvalidModel("ensemble needs at least one path".into()));
    }
    let n_steps = steps_for(spec.horizon, spec.dt)?;
    let exact = tm.driving.is_levy();
    let runner = TracerRunner::new(tm)?;
    (0..spec.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut driving_rng =
                path_rng(spec.seed, spec.phase, i as u64, StreamRole::Driving);
            let x0 = tm.sample_initial(&mut driving_rng)?;
            let stepper = if exact {
                Stepper::new_exact(&tm.driving, &x0, spec.dt, driving_rng)?
            } else {
                Stepper::new_euler(&tm.driving, &x0, spec.dt, driving_rng)?
            };
            let path = stepper.run(n_steps)?;
            let tracer_rng = path_rng(spec.seed, spec.phase, i as u64, StreamRole::Tracer);
            let tp = runner.run(path, tracer_rng)?;
            f(i, tp)
        })
        .collect()
}
