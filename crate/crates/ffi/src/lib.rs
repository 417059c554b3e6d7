//! C interface to the `uipdg` solver.
//!
//! Solutions live behind the opaque [`UipdgSolution`] handle. Every fallible
//! call returns a [`UipdgStatus`]; the message of the most recent failure on
//! the calling thread is available through [`uipdg_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use nalgebra::Point2;
use uipdg::bench::{Benchmark, TestCase};
use uipdg::coeffs::Scheme;
use uipdg::errors::{compute_errors, ecr, ErrorReport};
use uipdg::forms::{DgFunction, DgSpace, SchemeSpec};
use uipdg::linalg::SolverOptions;
use uipdg::mesh::DiagonalSplit;
use uipdg::study::{solve_primal, PointLocator};
use uipdg::Error;

/// Status codes; the nonzero values match the command line exit codes where
/// they overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UipdgStatus {
    Ok = 0,
    /// A required pointer was null or a string was not valid UTF-8.
    InvalidArgument = 1,
    /// Bad configuration or input data.
    Config = 2,
    /// The linear solver failed.
    Solver = 3,
    /// A verification check failed.
    Check = 4,
    /// The point lies outside the mesh.
    OutOfDomain = 5,
    /// The caller's buffer is too small.
    BufferTooSmall = 6,
    /// A Rust panic was caught at the boundary.
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UipdgScheme {
    Uip = 0,
    Swip = 1,
    Ipf = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UipdgTest {
    Test1 = 0,
    Kellogg = 1,
}

/// Parameters of a benchmark solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UipdgSolveParams {
    pub test: UipdgTest,
    /// Anisotropy ratio of the first benchmark; ignored for Kellogg.
    pub lambda: f64,
    pub scheme: UipdgScheme,
    /// -1, 0 or 1.
    pub epsilon: i8,
    /// Polynomial degree, 1 to 4.
    pub degree: u32,
    /// Subdivisions per side of the structured mesh (even).
    pub n: u32,
    pub alpha0: f64,
}

/// Error norms of a solution against the benchmark's exact solution.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UipdgErrors {
    pub h: f64,
    pub dofs: usize,
    pub err_l2: f64,
    pub err_grad: f64,
    pub err_jump: f64,
    pub err_energy: f64,
    pub err_trace: f64,
    pub err_augmented: f64,
    pub solver_residual: f64,
}

impl From<ErrorReport> for UipdgErrors {
    fn from(r: ErrorReport) -> Self {
        Self {
            h: r.h,
            dofs: r.dofs,
            err_l2: r.err_l2,
            err_grad: r.err_grad,
            err_jump: r.err_jump,
            err_energy: r.err_energy,
            err_trace: r.err_trace,
            err_augmented: r.err_augmented,
            solver_residual: f64::NAN,
        }
    }
}

/// A discrete solution together with its mesh.
pub struct UipdgSolution {
    space: DgSpace,
    u: DgFunction,
    errors: UipdgErrors,
    locator: PointLocator,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let clean = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = clean);
}

fn status_of(err: &Error) -> UipdgStatus {
    match err.exit_code() {
        3 => UipdgStatus::Solver,
        4 => UipdgStatus::Check,
        _ => UipdgStatus::Config,
    }
}

fn fail(status: UipdgStatus, msg: &str) -> UipdgStatus {
    set_last_error(msg);
    status
}

/// Runs `f`, turning errors and panics into status codes.
fn guarded(f: impl FnOnce() -> Result<(), (UipdgStatus, String)>) -> UipdgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            UipdgStatus::Ok
        }
        Ok(Err((status, msg))) => fail(status, &msg),
        Err(_) => fail(UipdgStatus::Internal, "internal panic"),
    }
}

fn lift(err: Error) -> (UipdgStatus, String) {
    (status_of(&err), err.to_string())
}

fn solve_benchmark(p: &UipdgSolveParams) -> uipdg::Result<UipdgSolution> {
    let case = match p.test {
        UipdgTest::Test1 => TestCase::Test1 { lambda: p.lambda },
        UipdgTest::Kellogg => TestCase::Kellogg,
    };
    let scheme = match p.scheme {
        UipdgScheme::Uip => Scheme::Uip,
        UipdgScheme::Swip => Scheme::Swip,
        UipdgScheme::Ipf => Scheme::Ipf,
    };
    let bench = Benchmark::new(case)?;
    let spec = SchemeSpec::new(scheme, p.epsilon, p.degree as usize)?.with_alpha0(p.alpha0);
    spec.validate()?;
    let space = DgSpace::new(bench.mesh(p.n as usize, DiagonalSplit::Alternate)?, spec.k)?;
    let sol = solve_primal(&space, &bench.problem(), &spec, &SolverOptions::default())?;
    let report = compute_errors(&space, &sol.u, &bench.exact, &bench.diffusion, &sol.coeffs)?;
    let mut errors = UipdgErrors::from(report);
    errors.solver_residual = sol.report.relative_residual;
    let locator = PointLocator::new(space.mesh());
    Ok(UipdgSolution {
        space,
        u: sol.u,
        errors,
        locator,
    })
}

/// Version string of the library; static storage, do not free.
#[no_mangle]
pub extern "C" fn uipdg_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(s) => s,
        Err(_) => panic!("version string has an interior nul"),
    };
    VERSION.as_ptr()
}

/// Parameters with the library defaults: first benchmark with
/// `lambda = 1`, symmetric UIP, degree 1, `n = 8`, `alpha0 = 8`.
#[no_mangle]
pub extern "C" fn uipdg_default_params() -> UipdgSolveParams {
    UipdgSolveParams {
        test: UipdgTest::Test1,
        lambda: 1.0,
        scheme: UipdgScheme::Uip,
        epsilon: 1,
        degree: 1,
        n: 8,
        alpha0: uipdg::coeffs::DEFAULT_ALPHA0,
    }
}

/// Solves a benchmark problem. On success `*out` receives a handle that
/// must be released with [`uipdg_solution_free`].
///
/// # Safety
/// `params` must point to a valid parameter struct and `out` to writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn uipdg_solve(params: *const UipdgSolveParams, out: *mut *mut UipdgSolution) -> UipdgStatus {
    if params.is_null() || out.is_null() {
        return fail(UipdgStatus::InvalidArgument, "null pointer argument");
    }
    // SAFETY: both pointers were checked for null; validity is the caller's contract.
    let (params, out) = unsafe { (&*params, &mut *out) };
    *out = ptr::null_mut();
    guarded(|| {
        let sol = solve_benchmark(params).map_err(lift)?;
        *out = Box::into_raw(Box::new(sol));
        Ok(())
    })
}

/// Releases a solution handle. Null is accepted and ignored.
///
/// # Safety
/// `sol` must be null or a handle returned by [`uipdg_solve`] that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn uipdg_solution_free(sol: *mut UipdgSolution) {
    if !sol.is_null() {
        // SAFETY: the handle came from Box::into_raw in uipdg_solve.
        drop(unsafe { Box::from_raw(sol) });
    }
}

/// Number of unknowns of the solution.
///
/// # Safety
/// `sol` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn uipdg_solution_num_dofs(sol: *const UipdgSolution) -> usize {
    // SAFETY: caller contract.
    match unsafe { sol.as_ref() } {
        Some(s) => s.space.ndof(),
        None => 0,
    }
}

/// Copies the error norms into `*out`.
///
/// # Safety
/// `sol` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn uipdg_solution_errors(sol: *const UipdgSolution, out: *mut UipdgErrors) -> UipdgStatus {
    // SAFETY: caller contract; null is checked by as_ref / as_mut.
    match unsafe { (sol.as_ref(), out.as_mut()) } {
        (Some(s), Some(o)) => {
            *o = s.errors;
            UipdgStatus::Ok
        }
        _ => fail(UipdgStatus::InvalidArgument, "null pointer argument"),
    }
}

/// Copies the coefficient vector (element-major, `n_loc` per element) into
/// `buf`. Fails with `BufferTooSmall` if `len` is less than the number of
/// unknowns.
///
/// # Safety
/// `sol` must be a live handle and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn uipdg_solution_coefficients(sol: *const UipdgSolution, buf: *mut f64, len: usize) -> UipdgStatus {
    // SAFETY: caller contract.
    let Some(s) = (unsafe { sol.as_ref() }) else {
        return fail(UipdgStatus::InvalidArgument, "null solution handle");
    };
    if buf.is_null() {
        return fail(UipdgStatus::InvalidArgument, "null buffer");
    }
    let data = s.u.as_slice();
    if len < data.len() {
        return fail(
            UipdgStatus::BufferTooSmall,
            &format!("buffer holds {len} values, {} needed", data.len()),
        );
    }
    // SAFETY: buf has room for at least data.len() doubles.
    unsafe { ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len()) };
    UipdgStatus::Ok
}

/// Evaluates the discrete solution at `(x, y)`.
///
/// # Safety
/// `sol` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn uipdg_solution_eval(sol: *const UipdgSolution, x: f64, y: f64, value: *mut f64) -> UipdgStatus {
    // SAFETY: caller contract.
    let (Some(s), Some(v)) = (unsafe { sol.as_ref() }, unsafe { value.as_mut() }) else {
        return fail(UipdgStatus::InvalidArgument, "null pointer argument");
    };
    match s.locator.locate(&s.space, &Point2::new(x, y)) {
        Some((e, xi)) => {
            *v = s.space.eval(&s.u, e, xi).0;
            UipdgStatus::Ok
        }
        None => fail(UipdgStatus::OutOfDomain, &format!("({x}, {y}) is outside the mesh")),
    }
}

/// Estimated convergence rate between two levels; `NaN` when undefined.
#[no_mangle]
pub extern "C" fn uipdg_ecr(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    ecr(e_coarse, e_fine, h_coarse, h_fine).unwrap_or(f64::NAN)
}

/// Runs a command line subcommand (`run`, `convergence`, `compare`,
/// `equivalence` or `mesh`) on a JSON config file and returns its exit
/// code. `out_dir` may be null to use the config's output directory.
///
/// # Safety
/// `command` and `config_path` must be nul-terminated strings; `out_dir`
/// must be null or nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn uipdg_run_command(
    command: *const c_char,
    config_path: *const c_char,
    out_dir: *const c_char,
) -> i32 {
    let to_str = |p: *const c_char| -> Option<String> {
        // SAFETY: caller contract; p is non-null here.
        (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_str().ok().map(str::to_owned)).flatten()
    };
    let (Some(cmd), Some(cfg)) = (to_str(command), to_str(config_path)) else {
        set_last_error("command and config path must be valid strings");
        return UipdgStatus::InvalidArgument as i32;
    };
    let mut args = vec!["uipdg".to_string(), cmd, "--config".to_string(), cfg];
    if !out_dir.is_null() {
        match to_str(out_dir) {
            Some(o) => args.extend(["--out".to_string(), PathBuf::from(o).display().to_string()]),
            None => {
                set_last_error("out_dir is not valid UTF-8");
                return UipdgStatus::InvalidArgument as i32;
            }
        }
    }
    catch_unwind(|| uipdg::cli::main_with_args(args)).unwrap_or_else(|_| {
        set_last_error("internal panic");
        UipdgStatus::Internal as i32
    })
}

/// Message of the last failed call on this thread (empty after a success).
/// Copies at most `len - 1` bytes plus a terminating nul into `buf` and
/// returns the full message length.
///
/// # Safety
/// `buf` must be null (to query the length) or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn uipdg_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            // SAFETY: buf has len bytes and n < len.
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}
