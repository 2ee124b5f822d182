use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the laboratory modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no bisection bracket for Q(0) in d={d} (scanned up to q0={q0_max}); check r_max/tol")]
    NoBracket { d: usize, q0_max: f64 },

    #[error("ODE residual {residual:e} exceeds tolerance {tol:e} after final refinement")]
    ToleranceNotMet { residual: f64, tol: f64 },

    #[error("quadrature unstable: oscillatory integrand detected")]
    QuadratureUnstable,

    #[error("eigenvalue shift {shift:e} between n and n/2 exceeds tolerance {tol:e}; grid too coarse")]
    GridTooCoarse { shift: f64, tol: f64 },

    #[error("no negative eigenvalue found (smallest = {smallest}); discretization error")]
    NoNegativeEigenvalue { smallest: f64 },

    #[error("quadratic form non-positive ({value:e}) on trial {trial}; projection bug or grid artifact")]
    NonPositiveForm { trial: usize, value: f64 },

    #[error("soliton tail mass fraction {fraction:e} outside box exceeds 1e-10")]
    BoxTooSmall { fraction: f64 },

    #[error("field tail mass fraction {fraction:e} exceeds {limit:e}")]
    TailTooLarge { fraction: f64, limit: f64 },

    #[error("spectral content beyond Nyquist after rescale (fraction {fraction:e})")]
    ResampleAliasing { fraction: f64 },

    #[error("proximity {distance:e} outside decomposition basin (limit {limit:e})")]
    NotInBasin { distance: f64, limit: f64 },

    #[error("Newton stalled at residual {residual:e} after max damping")]
    NewtonStalled { residual: f64 },

    #[error("decomposition basin lost at snapshot {index} (t={t})")]
    BasinLost { index: usize, t: f64 },

    #[error("track too sparse: Δs = {ds} exceeds 0.1 (or fewer than 3 samples)")]
    TooSparse { ds: f64 },

    #[error("blowup detected at t={t}: sup|u| = {sup_abs}")]
    BlowupDetected { t: f64, sup_abs: f64 },

    #[error("non-finite field value at t={t}")]
    NonFinite { t: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config parse error: {0}")]
    ParseError(String),

    #[error("config validation error: field `{field}`: {reason}")]
    ValidationError { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
