//! Error taxonomy for the solver pipeline.
//!
//! Every failure mode that external callers (CLI, FFI) need to distinguish
//! gets its own variant; the CLI maps variants to stable exit codes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A model or solver parameter violates its documented constraint.
    #[error("invalid parameter `{name}` = {value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// gamma = 2 a_kappa / sigma_kappa^2 <= 1: ruin is certain and the
    /// survival problem has no nondegenerate solution.
    #[error("degenerate model: gamma = {gamma} <= 1 (ruin is certain; survival probability is identically zero)")]
    DegenerateModel { gamma: f64 },

    /// The asymptotic series could not reach the requested accuracy at any
    /// admissible seed point.
    #[error("series seed failed: optimal-truncation error {err_est:.3e} at u0 = {u0:.3e} exceeds the budget {budget:.3e}")]
    SeedDiverged { u0: f64, err_est: f64, budget: f64 },

    /// Adaptive step control drove the step size below the resolvable limit.
    #[error("step size underflow at u = {u:.6e} (h = {h:.3e}); the equation is too stiff for the requested tolerance")]
    StepSizeUnderflow { u: f64, h: f64 },

    /// The integrator hit its step budget before reaching the endpoint.
    #[error("step limit of {steps} exceeded at u = {u:.6e}")]
    StepLimit { u: f64, steps: usize },

    /// The integrated density branch crossed zero, which the regular branch
    /// never does; indicates a wrong branch or corrupted integration.
    #[error("density became non-positive at u = {u:.6e} (H = {h:.3e}); integration followed a wrong branch")]
    NegativeDensity { u: f64, h: f64 },

    /// Evaluation was requested outside the covered grid.
    #[error("u = {u:.6e} is outside the covered range [{lo:.6e}, {hi:.6e}]")]
    OutOfRange { u: f64, lo: f64, hi: f64 },

    /// The fitted tail remainder beyond u_max is too large a share of the
    /// normalization integral for results to be trusted.
    #[error("tail remainder ratio {ratio:.3e} exceeds the cap {cap:.3e}; increase u_max (currently {u_max:.3e})")]
    TailTooHeavy { ratio: f64, cap: f64, u_max: f64 },

    /// H(u) (mu u)^gamma has not flattened over the fit window, so no
    /// reliable tail constant exists yet.
    #[error("power-law plateau not reached over [{u_lo:.3e}, {u_hi:.3e}]: relative spread {rel_spread:.3e} exceeds {cap:.3e}; enlarge u_max or shift the window right")]
    PlateauNotReached {
        rel_spread: f64,
        cap: f64,
        u_lo: f64,
        u_hi: f64,
    },

    /// The fit window contains too few grid nodes.
    #[error("fit window [{u_lo:.3e}, {u_hi:.3e}] covers only {n} grid nodes (need >= {need})")]
    WindowTooNarrow {
        u_lo: f64,
        u_hi: f64,
        n: usize,
        need: usize,
    },

    /// Adaptive quadrature failed to converge to the requested tolerance.
    #[error("quadrature over [{a:.6e}, {b:.6e}] did not reach tolerance {tol:.3e} (residual estimate {err:.3e})")]
    QuadratureFailed { a: f64, b: f64, tol: f64, err: f64 },

    /// Malformed configuration input.
    #[error("config error: {0}")]
    Config(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable process exit code for each failure class (documented in the
    /// CLI help and README).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. } | Error::Config(_) | Error::Json(_) => 2,
            Error::DegenerateModel { .. } => 3,
            Error::SeedDiverged { .. }
            | Error::StepSizeUnderflow { .. }
            | Error::StepLimit { .. }
            | Error::NegativeDensity { .. }
            | Error::OutOfRange { .. }
            | Error::QuadratureFailed { .. } => 4,
            Error::TailTooHeavy { .. }
            | Error::PlateauNotReached { .. }
            | Error::WindowTooNarrow { .. } => 5,
            Error::Io(_) => 6,
        }
    }
}
