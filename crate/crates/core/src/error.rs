use thiserror::Error;

/// Unified error type for the whole crate.
///
/// Numerical routines that can fail in a recoverable, diagnosable way return
/// `Result<_, Error>`; programming errors (index out of bounds on internal
/// arrays, etc.) panic instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain contains no grid nodes")]
    EmptyDomain,

    #[error("domain has no interior nodes at this resolution")]
    EmptyInterior,

    #[error("grid index {index:?} out of shape {shape:?}")]
    InvalidIndex { index: [usize; 3], shape: [usize; 3] },

    #[error("scale parameter must be positive, got {0}")]
    NonPositiveRho(f64),

    #[error("ball of radius {radius} around {center:?} contains no grid cells")]
    DegenerateBall { center: [f64; 3], radius: f64 },

    #[error("opening angle is undefined for the half-space")]
    OpeningUndefined,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("requested cube is not aligned with the grid: {0}")]
    GridMisaligned(String),

    #[error("root bracketing failed: {0}")]
    RootBracketing(String),

    #[error("linear solver diverged: residual {residual:.3e} after {iterations} iterations")]
    SolverDiverged { residual: f64, iterations: usize },

    #[error("discrete maximum principle violated by {deviation:.3e}")]
    MaximumPrincipleViolation { deviation: f64 },

    #[error("scale {r:.3e} outside admissible range (max {max:.3e})")]
    ScaleOutOfRange { r: f64, max: f64 },

    #[error("oscillation cascade diverged: {0}")]
    CascadeDivergence(String),

    #[error("induction step {step} failed; retry with rho = {suggested}")]
    InductionStep { step: usize, suggested: f64 },

    #[error("coefficient eigenvalue {eig:.6} outside [{lo:.6}, {hi:.6}]")]
    EllipticityViolated { eig: f64, lo: f64, hi: f64 },

    #[error("base radius reduction failed: {0}")]
    ReductionFailed(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
