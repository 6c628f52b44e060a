//! C ABI for `fracevo`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`-style
//! constructors and released with the matching `*_free`. Every fallible call
//! returns a [`FracevoStatus`]; on failure the message is available from
//! [`fracevo_last_error_message`] on the same thread. Panics are caught and
//! reported as [`FracevoStatus::Panic`].
//!
//! The header `include/fracevo.h` is generated by cbindgen at build time.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use fracevo::cli::{self, RunConfig};
use fracevo::dynamics::{self, ContinuationConfig, ContinuationStatus};
use fracevo::fraccalc::{default_grading, make_graded_grid, Trajectory};
use fracevo::mild::{self, Forcing, MildProblem, Nonlinearity, PerturbationSpec, SolverConfig};
use fracevo::operators::{self, SpectralOperator, StateVector};
use fracevo::specfun::{FractionalOrder, MittagLefflerNeg};
use fracevo::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FracevoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    NonConvergence = 4,
    GridTooCoarse = 5,
    NonFinite = 6,
    BlowUpAmbiguous = 7,
    Io = 8,
    Panic = 9,
}

/// Pointwise nonlinearity `b(u)` entering the equation as `+B(u)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FracevoNonlinearity {
    /// `b = 0`
    Zero = 0,
    /// `b(u) = c·u`
    Linear = 1,
    /// `b(u) = c·u²`
    Quadratic = 2,
    /// `b(u) = c·u³`, `c > 0`
    CubicDissipative = 3,
    /// `b(u) = −c·e^{−1/u}` for `u > 0`
    Combustion = 4,
}

/// Spectral operator `A`.
pub struct FracevoOperator(SpectralOperator);

/// Cauchy problem `D_t^α(u − u₀) + Au + B(u) = f` with constant `f`.
pub struct FracevoProblem(MildProblem);

/// Sampled trajectory in the coefficient basis of the operator.
pub struct FracevoTrajectory(Trajectory);

/// Outcome of [`fracevo_continue`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FracevoContinuation {
    /// 1 when blow-up was detected, 0 when the horizon was reached.
    pub blew_up: i32,
    /// Blow-up time estimate and bracket; NaN when `blew_up` is 0.
    pub t_star: f64,
    pub lower: f64,
    pub upper: f64,
    pub t_reached: f64,
    pub final_norm: f64,
    pub windows: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FracevoStatus {
    match e {
        Error::Dimension { .. } => FracevoStatus::Dimension,
        Error::NonConvergence { .. } | Error::PicardDivergence { .. } | Error::ContinuationStalled(_) => {
            FracevoStatus::NonConvergence
        }
        Error::GridTooCoarse(_) => FracevoStatus::GridTooCoarse,
        Error::NonFinite { .. } | Error::Overflow(_) => FracevoStatus::NonFinite,
        Error::BlowUpAmbiguous(_) => FracevoStatus::BlowUpAmbiguous,
        Error::Io(_) => FracevoStatus::Io,
        _ => FracevoStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome = Result<(), Failure>;

fn guard(f: impl FnOnce() -> Outcome) -> FracevoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FracevoStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            FracevoStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            FracevoStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn input<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn output<'a>(p: *mut f64, n: usize, what: &'static str) -> Result<&'a mut [f64], Failure> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts_mut(p, n))
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Lib(Error::Config(format!("{what} is not valid UTF-8"))))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Outcome {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn check_len(expected: usize, got: usize) -> Result<(), Error> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn fracevo_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fracevo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Diagonal operator with the given positive eigenvalues.
///
/// # Safety
/// `eigenvalues` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fracevo_operator_diagonal(
    eigenvalues: *const f64,
    n: usize,
    out: *mut *mut FracevoOperator,
) -> FracevoStatus {
    guard(|| {
        let l = input(eigenvalues, n, "eigenvalues")?;
        emit(out, FracevoOperator(operators::make_diagonal(l)?))
    })
}

/// Dirichlet Laplacian on `(0, length)` truncated to `modes` sine modes.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fracevo_operator_laplacian(
    modes: usize,
    length: f64,
    out: *mut *mut FracevoOperator,
) -> FracevoStatus {
    guard(|| emit(out, FracevoOperator(operators::make_dirichlet_laplacian_1d(modes, length)?)))
}

/// Number of modes; 0 for NULL.
///
/// # Safety
/// `op` must be NULL or a live operator handle.
#[no_mangle]
pub unsafe extern "C" fn fracevo_operator_dim(op: *const FracevoOperator) -> usize {
    op.as_ref().map_or(0, |o| o.0.dim())
}

/// Copy the eigenvalues into `buf` of length `len` (must equal the dimension).
///
/// # Safety
/// `op` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fracevo_operator_eigenvalues(
    op: *const FracevoOperator,
    buf: *mut f64,
    len: usize,
) -> FracevoStatus {
    guard(|| {
        let op = deref(op, "op")?;
        check_len(op.0.dim(), len)?;
        output(buf, len, "buf")?.copy_from_slice(op.0.eigenvalues());
        Ok(())
    })
}

/// Release an operator; NULL is ignored.
///
/// # Safety
/// `op` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fracevo_operator_free(op: *mut FracevoOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Problem on `op` with order `alpha`, initial coefficients `u0[n]`, constant
/// forcing coefficients `forcing[n]` (NULL for zero) and nonlinearity
/// `kind` with `coefficient`. A positive `truncation_radius` replaces a
/// locally Lipschitz nonlinearity by its radial truncation, which the
/// fixed-horizon solver requires.
///
/// # Safety
/// Pointers must be valid for `n` doubles; `op` must be a live handle.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn fracevo_problem_new(
    op: *const FracevoOperator,
    alpha: f64,
    u0: *const f64,
    n: usize,
    forcing: *const f64,
    kind: FracevoNonlinearity,
    coefficient: f64,
    truncation_radius: f64,
    out: *mut *mut FracevoProblem,
) -> FracevoStatus {
    guard(|| {
        let op = &deref(op, "op")?.0;
        check_len(op.dim(), n)?;
        let alpha = FractionalOrder::new(alpha)?;
        let u0 = StateVector::new(input(u0, n, "u0")?.to_vec())?;
        let forcing = if forcing.is_null() {
            Forcing::zero(n)
        } else {
            Forcing::constant(input(forcing, n, "forcing")?.to_vec())
        };
        let kind = match kind {
            FracevoNonlinearity::Zero => Nonlinearity::Zero,
            FracevoNonlinearity::Linear => Nonlinearity::Linear { coefficient },
            FracevoNonlinearity::Quadratic => Nonlinearity::Quadratic { coefficient },
            FracevoNonlinearity::CubicDissipative => Nonlinearity::CubicDissipative { coefficient },
            FracevoNonlinearity::Combustion => Nonlinearity::Combustion { coefficient },
        };
        let mut b = PerturbationSpec::from_registry(&kind, op)?;
        if truncation_radius > 0.0 && !b.lipschitz.is_global() {
            b = dynamics::truncate_perturbation(&b, truncation_radius)?;
        }
        emit(out, FracevoProblem(MildProblem::new(op.clone(), alpha, u0, forcing, b)?))
    })
}

/// Release a problem; NULL is ignored.
///
/// # Safety
/// `p` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fracevo_problem_free(p: *mut FracevoProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Solve on the graded grid `t_i = t_end (i/nodes)^grading`; a non-positive
/// `grading` selects `(2 − α)/α`. Problems without a nonlinearity use the
/// direct linear solver, others the windowed Picard solver.
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fracevo_solve(
    p: *const FracevoProblem,
    t_end: f64,
    nodes: usize,
    grading: f64,
    out: *mut *mut FracevoTrajectory,
) -> FracevoStatus {
    guard(|| {
        let p = &deref(p, "problem")?.0;
        let g = if grading > 0.0 { grading } else { default_grading(p.alpha) };
        let cfg = SolverConfig::new(make_graded_grid(t_end, nodes, g)?);
        let sol = if p.perturbation.is_zero() { mild::solve_linear(p, &cfg)? } else { mild::solve_semilinear(p, &cfg)? };
        emit(out, FracevoTrajectory(sol.trajectory))
    })
}

/// Continue the solution up to `horizon` with adaptive truncation and report
/// blow-up. `trajectory` may be NULL when the samples are not needed.
///
/// # Safety
/// `p` must be a live handle, `result` writable, `trajectory` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn fracevo_continue(
    p: *const FracevoProblem,
    horizon: f64,
    result: *mut FracevoContinuation,
    trajectory: *mut *mut FracevoTrajectory,
) -> FracevoStatus {
    guard(|| {
        let p = &deref(p, "problem")?.0;
        if result.is_null() {
            return Err(Failure::Null("result"));
        }
        let r = dynamics::continue_with_blowup(p, &ContinuationConfig::new(horizon))?;
        let (blew_up, t_star, lower, upper) = match r.status {
            ContinuationStatus::GlobalToHorizon => (0, f64::NAN, f64::NAN, f64::NAN),
            ContinuationStatus::BlowUpDetected { t_star_estimate, lower, upper } => (1, t_star_estimate, lower, upper),
        };
        *result = FracevoContinuation {
            blew_up,
            t_star,
            lower,
            upper,
            t_reached: r.t_reached,
            final_norm: r.final_norm,
            windows: r.windows.len(),
        };
        if !trajectory.is_null() {
            emit(trajectory, FracevoTrajectory(r.trajectory))?;
        }
        Ok(())
    })
}

/// Number of time nodes; 0 for NULL.
///
/// # Safety
/// `u` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fracevo_trajectory_len(u: *const FracevoTrajectory) -> usize {
    u.as_ref().map_or(0, |u| u.0.len())
}

/// State dimension; 0 for NULL.
///
/// # Safety
/// `u` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fracevo_trajectory_dim(u: *const FracevoTrajectory) -> usize {
    u.as_ref().map_or(0, |u| u.0.dim())
}

/// Copy the time nodes into `buf` of length `len` (must equal the node count).
///
/// # Safety
/// `u` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fracevo_trajectory_times(
    u: *const FracevoTrajectory,
    buf: *mut f64,
    len: usize,
) -> FracevoStatus {
    guard(|| {
        let u = &deref(u, "trajectory")?.0;
        check_len(u.len(), len)?;
        output(buf, len, "buf")?.copy_from_slice(u.times());
        Ok(())
    })
}

/// Copy the values, node-major (`len · dim` doubles), into `buf`.
///
/// # Safety
/// `u` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fracevo_trajectory_values(
    u: *const FracevoTrajectory,
    buf: *mut f64,
    len: usize,
) -> FracevoStatus {
    guard(|| {
        let u = &deref(u, "trajectory")?.0;
        check_len(u.flat().len(), len)?;
        output(buf, len, "buf")?.copy_from_slice(u.flat());
        Ok(())
    })
}

/// Release a trajectory; NULL is ignored.
///
/// # Safety
/// `u` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fracevo_trajectory_free(u: *mut FracevoTrajectory) {
    if !u.is_null() {
        drop(Box::from_raw(u));
    }
}

/// `E_{a,b}(−x) = Σ (−x)^k/Γ(ak + b)` for `0 < a < 1`, `x ≥ 0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fracevo_mittag_leffler_neg(a: f64, b: f64, x: f64, out: *mut f64) -> FracevoStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        if !(x >= 0.0) {
            return Err(Error::Domain(format!("x must be nonnegative, got {x}")).into());
        }
        *out = MittagLefflerNeg::new(a, b)?.eval(x);
        Ok(())
    })
}

/// Validate and run a TOML run configuration, writing artifacts to `out_dir`.
/// Validation failures return `InvalidArgument` with every violation in the
/// error message.
///
/// # Safety
/// Both arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn fracevo_run_config(config_toml: *const c_char, out_dir: *const c_char) -> FracevoStatus {
    guard(|| {
        let config = RunConfig::from_toml(text(config_toml, "config_toml")?)?;
        let out = text(out_dir, "out_dir")?;
        let v = cli::validate(&config);
        if !v.is_empty() {
            let msg: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            return Err(Error::Config(msg.join("; ")).into());
        }
        cli::run(&config, Path::new(out), 0)?;
        Ok(())
    })
}
