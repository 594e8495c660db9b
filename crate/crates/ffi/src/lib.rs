//! C ABI over the ruin-probability solver.
//!
//! Conventions:
//! - Every fallible entry point returns an [`HrStatus`] code and writes its
//!   result through an out pointer on success only.
//! - A failing call stores a human-readable message retrievable with
//!   [`hr_last_error_message`] (thread-local, valid until the next failure
//!   on the same thread).
//! - Solutions live behind the opaque handle `HrSolution*`, created by
//!   [`hr_solve`] and released with [`hr_solution_free`]. A solution is
//!   immutable: concurrent reads from multiple threads are safe.
//! - Optional numeric fields use non-positive values as "automatic".
//!
//! Panics never unwind across the boundary; they surface as
//! [`HrStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use heunruin::mc::{estimate_psi, McConfig};
use heunruin::survival::{solve, SolveOptions, SurvivalSolution};
use heunruin::{Error, ModelParams};

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HrStatus {
    Ok = 0,
    /// Bad pointer, malformed parameters, or out-of-domain argument.
    InvalidArgument = 1,
    /// gamma <= 1: the model has no nondegenerate survival probability.
    DegenerateModel = 2,
    /// Series seeding, ODE integration, or quadrature failed.
    SolverFailed = 3,
    /// Tail fit or normalization remainder check failed.
    TailFailed = 4,
    IoFailed = 5,
    /// An internal invariant broke; the library caught a panic.
    Panic = 6,
}

/// Model parameters (money and time units as in the library).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HrModelParams {
    pub lambda: f64,
    pub mu: f64,
    pub c: f64,
    pub r: f64,
    pub a: f64,
    pub sigma: f64,
    pub kappa: f64,
}

/// Strategy-level derived quantities.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HrDerivedParams {
    pub a_kappa: f64,
    pub sigma_kappa: f64,
    pub gamma: f64,
    pub beta: f64,
    pub nu: f64,
}

/// Coefficients of the underlying doubly confluent Heun equation.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HrHeunParams {
    pub a_h: f64,
    pub b_h: f64,
    pub c_h: f64,
    pub d_h: f64,
}

/// Solver options. Non-positive u_max or window bounds mean "automatic".
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HrSolveOptions {
    pub tol: f64,
    pub u_max: f64,
    pub remainder_cap: f64,
    pub fit_window_lo: f64,
    pub fit_window_hi: f64,
    pub spread_cap: f64,
    pub auto_extend: bool,
    pub max_extensions: u32,
}

/// Monte Carlo configuration. Non-positive safe_barrier means "automatic".
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HrMcConfig {
    pub n_paths: u64,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub safe_barrier: f64,
}

/// Monte Carlo estimate with outcome counts.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HrMcResult {
    pub u: f64,
    pub psi_hat: f64,
    pub std_err: f64,
    pub n_paths: u64,
    pub ruined: u64,
    pub survived_censored: u64,
    pub survived_early: u64,
    pub ruined_between_jumps: u64,
}

/// Tail-fit summary of a solution.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HrTailInfo {
    /// Connection constant: H(u) ~ k1 (mu u)^{-gamma}.
    pub k1: f64,
    pub log_k1: f64,
    pub window_lo: f64,
    pub window_hi: f64,
    pub rel_spread: f64,
    pub n_nodes: u64,
    /// Ruin-tail constant: Psi(u) ~ k_ruin u^{-(gamma-1)}.
    pub k_ruin: f64,
}

/// Opaque handle to a normalized solution.
pub struct HrSolution(SurvivalSolution);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> HrStatus {
    match err {
        Error::InvalidParameter { .. } | Error::Config(_) | Error::Json(_) => {
            HrStatus::InvalidArgument
        }
        Error::DegenerateModel { .. } => HrStatus::DegenerateModel,
        Error::SeedDiverged { .. }
        | Error::StepSizeUnderflow { .. }
        | Error::StepLimit { .. }
        | Error::NegativeDensity { .. }
        | Error::OutOfRange { .. }
        | Error::QuadratureFailed { .. } => HrStatus::SolverFailed,
        Error::TailTooHeavy { .. }
        | Error::PlateauNotReached { .. }
        | Error::WindowTooNarrow { .. } => HrStatus::TailFailed,
        Error::Io(_) => HrStatus::IoFailed,
    }
}

fn fail(err: &Error) -> HrStatus {
    let status = status_of(err);
    set_error(err.to_string());
    status
}

fn fail_null(what: &str) -> HrStatus {
    set_error(format!("null pointer: {what}"));
    HrStatus::InvalidArgument
}

/// Run `body` with panics converted to HrStatus::Panic.
fn guarded(body: impl FnOnce() -> HrStatus) -> HrStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic".into());
            HrStatus::Panic
        }
    }
}

fn core_params(p: &HrModelParams) -> Result<ModelParams, Error> {
    ModelParams::new(p.lambda, p.mu, p.c, p.r, p.a, p.sigma, p.kappa)
}

fn core_opts(o: &HrSolveOptions) -> SolveOptions {
    SolveOptions {
        tol: o.tol,
        u_max: (o.u_max.is_finite() && o.u_max > 0.0).then_some(o.u_max),
        remainder_cap: o.remainder_cap,
        fit_window: (o.fit_window_lo > 0.0 && o.fit_window_hi > o.fit_window_lo)
            .then_some((o.fit_window_lo, o.fit_window_hi)),
        spread_cap: o.spread_cap,
        auto_extend: o.auto_extend,
        max_extensions: o.max_extensions,
    }
}

fn core_mc(c: &HrMcConfig) -> McConfig {
    McConfig {
        n_paths: c.n_paths,
        dt: c.dt,
        horizon: c.horizon,
        seed: c.seed,
        safe_barrier: (c.safe_barrier.is_finite() && c.safe_barrier > 0.0)
            .then_some(c.safe_barrier),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent failure on this thread, or NULL if none.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn hr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Write default solver options to `out`.
///
/// # Safety
/// `out` must point to writable memory for one `HrSolveOptions`.
#[no_mangle]
pub unsafe extern "C" fn hr_solve_options_default(out: *mut HrSolveOptions) -> HrStatus {
    if out.is_null() {
        return fail_null("out");
    }
    let d = SolveOptions::default();
    *out = HrSolveOptions {
        tol: d.tol,
        u_max: 0.0,
        remainder_cap: d.remainder_cap,
        fit_window_lo: 0.0,
        fit_window_hi: 0.0,
        spread_cap: d.spread_cap,
        auto_extend: d.auto_extend,
        max_extensions: d.max_extensions,
    };
    HrStatus::Ok
}

/// Write the default Monte Carlo configuration to `out`.
///
/// # Safety
/// `out` must point to writable memory for one `HrMcConfig`.
#[no_mangle]
pub unsafe extern "C" fn hr_mc_config_default(out: *mut HrMcConfig) -> HrStatus {
    if out.is_null() {
        return fail_null("out");
    }
    let d = McConfig::default();
    *out = HrMcConfig {
        n_paths: d.n_paths,
        dt: d.dt,
        horizon: d.horizon,
        seed: d.seed,
        safe_barrier: 0.0,
    };
    HrStatus::Ok
}

/// Validate `params` and write the derived strategy quantities to `out`.
///
/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hr_derive(
    params: *const HrModelParams,
    out: *mut HrDerivedParams,
) -> HrStatus {
    guarded(|| {
        if params.is_null() {
            return fail_null("params");
        }
        if out.is_null() {
            return fail_null("out");
        }
        match core_params(&*params) {
            Ok(p) => {
                let d = p.derive();
                *out = HrDerivedParams {
                    a_kappa: d.a_kappa,
                    sigma_kappa: d.sigma_kappa,
                    gamma: d.gamma,
                    beta: d.beta,
                    nu: d.nu,
                };
                HrStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Validate `params` and write the Heun-equation coefficients to `out`.
///
/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hr_heun_params(
    params: *const HrModelParams,
    out: *mut HrHeunParams,
) -> HrStatus {
    guarded(|| {
        if params.is_null() {
            return fail_null("params");
        }
        if out.is_null() {
            return fail_null("out");
        }
        match core_params(&*params) {
            Ok(p) => {
                let h = p.heun_params();
                *out = HrHeunParams {
                    a_h: h.a_h,
                    b_h: h.b_h,
                    c_h: h.c_h,
                    d_h: h.d_h,
                };
                HrStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Run the full pipeline and store a heap-allocated solution handle in
/// `*out`. Pass NULL `opts` for defaults. On failure `*out` is untouched.
///
/// # Safety
/// `params` and `out` must be valid; `opts` may be NULL. The handle written
/// to `*out` must be released with [`hr_solution_free`].
#[no_mangle]
pub unsafe extern "C" fn hr_solve(
    params: *const HrModelParams,
    opts: *const HrSolveOptions,
    out: *mut *mut HrSolution,
) -> HrStatus {
    guarded(|| {
        if params.is_null() {
            return fail_null("params");
        }
        if out.is_null() {
            return fail_null("out");
        }
        let p = match core_params(&*params) {
            Ok(p) => p,
            Err(e) => return fail(&e),
        };
        let o = if opts.is_null() {
            SolveOptions::default()
        } else {
            core_opts(&*opts)
        };
        match solve(&p, &o) {
            Ok(sol) => {
                *out = Box::into_raw(Box::new(HrSolution(sol)));
                HrStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Release a solution handle. NULL is a no-op.
///
/// # Safety
/// `sol` must be NULL or a pointer obtained from [`hr_solve`], released at
/// most once.
#[no_mangle]
pub unsafe extern "C" fn hr_solution_free(sol: *mut HrSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

unsafe fn eval1(
    sol: *const HrSolution,
    out: *mut f64,
    f: impl FnOnce(&SurvivalSolution) -> Result<f64, Error>,
) -> HrStatus {
    if sol.is_null() {
        return fail_null("sol");
    }
    if out.is_null() {
        return fail_null("out");
    }
    match f(&(*sol).0) {
        Ok(v) => {
            *out = v;
            HrStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Survival probability Phi(u).
///
/// # Safety
/// `sol` must be a live handle from [`hr_solve`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hr_phi(sol: *const HrSolution, u: f64, out: *mut f64) -> HrStatus {
    guarded(|| eval1(sol, out, |s| s.phi(u)))
}

/// Ruin probability Psi(u).
///
/// # Safety
/// `sol` must be a live handle from [`hr_solve`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hr_psi(sol: *const HrSolution, u: f64, out: *mut f64) -> HrStatus {
    guarded(|| eval1(sol, out, |s| s.psi(u)))
}

/// Phi(0) = C c / lambda.
///
/// # Safety
/// `sol` must be a live handle from [`hr_solve`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hr_phi0(sol: *const HrSolution, out: *mut f64) -> HrStatus {
    guarded(|| eval1(sol, out, |s| Ok(s.phi0)))
}

/// Normalization constant C.
///
/// # Safety
/// `sol` must be a live handle from [`hr_solve`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hr_c_norm(sol: *const HrSolution, out: *mut f64) -> HrStatus {
    guarded(|| eval1(sol, out, |s| Ok(s.c_norm)))
}

/// Endpoint of the integrated density grid.
///
/// # Safety
/// `sol` must be a live handle from [`hr_solve`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hr_u_max(sol: *const HrSolution, out: *mut f64) -> HrStatus {
    guarded(|| eval1(sol, out, |s| Ok(s.grid.u_max())))
}

/// Signed residual of the integro-differential balance at u, convolution
/// integrated to absolute tolerance qtol.
///
/// # Safety
/// `sol` must be a live handle from [`hr_solve`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hr_ide_residual(
    sol: *const HrSolution,
    u: f64,
    qtol: f64,
    out: *mut f64,
) -> HrStatus {
    guarded(|| eval1(sol, out, |s| s.ide_residual(u, qtol)))
}

/// Tail-fit summary of a solution.
///
/// # Safety
/// `sol` must be a live handle from [`hr_solve`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hr_tail_info(sol: *const HrSolution, out: *mut HrTailInfo) -> HrStatus {
    guarded(|| {
        if sol.is_null() {
            return fail_null("sol");
        }
        if out.is_null() {
            return fail_null("out");
        }
        let s = &(*sol).0;
        *out = HrTailInfo {
            k1: s.tail.k1,
            log_k1: s.tail.log_k1,
            window_lo: s.tail.window.0,
            window_hi: s.tail.window.1,
            rel_spread: s.tail.rel_spread,
            n_nodes: s.tail.n_nodes as u64,
            k_ruin: s.k_ruin(),
        };
        HrStatus::Ok
    })
}

/// Monte Carlo estimate of Psi(u). Pass NULL `cfg` for defaults.
///
/// # Safety
/// `params` and `out` must be valid pointers; `cfg` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn hr_estimate_psi(
    params: *const HrModelParams,
    u: f64,
    cfg: *const HrMcConfig,
    out: *mut HrMcResult,
) -> HrStatus {
    guarded(|| {
        if params.is_null() {
            return fail_null("params");
        }
        if out.is_null() {
            return fail_null("out");
        }
        let p = match core_params(&*params) {
            Ok(p) => p,
            Err(e) => return fail(&e),
        };
        let c = if cfg.is_null() {
            McConfig::default()
        } else {
            core_mc(&*cfg)
        };
        match estimate_psi(u, &p, &c) {
            Ok(r) => {
                *out = HrMcResult {
                    u: r.u,
                    psi_hat: r.psi_hat,
                    std_err: r.std_err,
                    n_paths: r.n_paths,
                    ruined: r.ruined,
                    survived_censored: r.survived_censored,
                    survived_early: r.survived_early,
                    ruined_between_jumps: r.ruined_between_jumps,
                };
                HrStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}
