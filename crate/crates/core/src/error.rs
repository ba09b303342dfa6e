use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("operation requires constant (state-independent) coefficients")]
    RequiresConstantCoefficients,

    #[error("operation requires a periodic model")]
    RequiresPeriod,

    #[error("jump law has no evaluable density (sampler-only)")]
    SamplerOnlyJumpLaw,

    #[error("quadrature budget of {budget} evaluations exceeded")]
    QuadratureBudget { budget: usize },

    #[error("real part of the symbol vanishes on the dual lattice at k = {k:?}")]
    SpectrumZero { k: Vec<i64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("test functions and model disagree on the period")]
    PeriodMismatch,

    #[error("time step too coarse: rate * dt = {0} exceeds 0.5")]
    StepTooCoarse(f64),

    #[error("matrix is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPositiveSemidefinite(f64),

    #[error("grid too coarse: need at least {need} points per axis, got {got}")]
    GridTooCoarse { need: usize, got: usize },

    #[error("path horizon {horizon} is shorter than n * t = {required}")]
    HorizonTooShort { horizon: f64, required: f64 },

    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },

    #[error("degenerate theoretical covariance: marginal {index} has zero variance but nonzero samples")]
    DegenerateCovariance { index: usize },

    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
