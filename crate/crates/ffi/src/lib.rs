//! C ABI over the snomial bound and certificate pipeline.
//!
//! Every entry point returns an [`SnStatus`]. On failure a message is kept per
//! thread and read with [`sn_last_error`]. Handles are opaque, owned by the
//! caller once returned, and released with the matching `*_free`. Panics are
//! caught at the boundary and reported as [`SnStatus::Internal`].
//!
//! Matrices are passed as row-major `double` arrays with explicit dimensions.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::time::Duration;

use faer::Mat;
use snomial::certify::verify_identity_with_tol;
use snomial::conic::{SolveStatus, SolverOptions};
use snomial::pmsv::{make_instance, oracle_projected_gradient, oracle_support_enum, putinar_bound, upper_bound, PmsvBound};
use snomial::relax::{Certificate, RelaxationSpec};
use snomial::{Error, Polynomial};

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Dimensions, tolerances or problem structure are unusable.
    InvalidArgument = 2,
    /// Text was not valid UTF-8 or JSON of the expected shape.
    Parse = 3,
    /// The solver produced no usable point; output structs are still filled.
    NoSolution = 4,
    /// A certificate failed verification; the report is still filled.
    Rejected = 5,
    /// Internal failure, including caught panics.
    Internal = 6,
}

/// Termination state of the conic solver.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnSolveStatus {
    Optimal = 0,
    Infeasible = 1,
    Unbounded = 2,
    Inaccurate = 3,
    Failed = 4,
}

impl From<SolveStatus> for SnSolveStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Optimal => SnSolveStatus::Optimal,
            SolveStatus::Infeasible => SnSolveStatus::Infeasible,
            SolveStatus::Unbounded => SnSolveStatus::Unbounded,
            SolveStatus::Inaccurate => SnSolveStatus::Inaccurate,
            SolveStatus::Failed => SnSolveStatus::Failed,
        }
    }
}

/// Relaxation and solver settings. Obtain defaults from [`sn_options_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnOptions {
    /// Pólya order (Putinar order for the Putinar entry point).
    pub k: u32,
    /// Nomial width; 0 selects unrestricted blocks.
    pub s: usize,
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: usize,
    /// Wall-clock limit in seconds; nonpositive means none.
    pub time_limit_s: f64,
}

/// Outcome of a bound computation.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnBound {
    /// Upper bound on the positive maximal singular value; `+inf` without a solution.
    pub bound: f64,
    /// Relaxation value on `Q = M'M`, the square of `bound`.
    pub rho: f64,
    pub status: SnSolveStatus,
    /// Whether an independently verified certificate backs the bound.
    pub certified: bool,
    pub nmat: usize,
    pub msize: usize,
    pub nscal: usize,
    pub naff: usize,
    pub iterations: usize,
    pub time_s: f64,
}

/// Verification summary of a certificate.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnVerifyReport {
    pub residual: f64,
    pub identity_residual: f64,
    pub gram_residual: f64,
    pub psd_margin: f64,
    pub tol: f64,
    pub accepted: bool,
}

/// Opaque sparse polynomial.
pub struct SnPolynomial(Polynomial);

/// Opaque positivity certificate.
pub struct SnCertificate(Certificate);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Fail {
    code: SnStatus,
    msg: String,
}

impl Fail {
    fn new(code: SnStatus, msg: impl Into<String>) -> Fail {
        Fail { code, msg: msg.into() }
    }

    fn null(name: &str) -> Fail {
        Fail::new(SnStatus::NullPointer, format!("`{name}` is null"))
    }
}

impl From<Error> for Fail {
    fn from(e: Error) -> Fail {
        let code = match e {
            Error::DimensionMismatch { .. }
            | Error::NotSymmetric(_)
            | Error::NotEven(_)
            | Error::InvalidSpec(_)
            | Error::DegreeTooSmall { .. }
            | Error::EmptyBasis
            | Error::TooLarge { .. }
            | Error::SizeMismatch(_) => SnStatus::InvalidArgument,
            Error::Parse(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => SnStatus::Parse,
            Error::MalformedProgram(_) | Error::MissingSolution | Error::LinearAlgebra(_) => SnStatus::Internal,
        };
        Fail::new(code, e.to_string())
    }
}

fn set_error(msg: String) {
    // Interior NULs would truncate the C string; replace them.
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<SnStatus, Fail>) -> SnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(code)) => {
            if code == SnStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            code
        }
        Ok(Err(fail)) => {
            set_error(fail.msg);
            fail.code
        }
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {what}"));
            SnStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Fail::new(SnStatus::Parse, format!("`{name}`: {e}")))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail::null(name))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail::null(name))
}

fn owned_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s).map(CString::into_raw).map_err(|e| Fail::new(SnStatus::Internal, e.to_string()))
}

unsafe fn matrix(data: *const f64, rows: usize, cols: usize) -> Result<Mat<f64>, Fail> {
    if rows == 0 || cols == 0 {
        return Err(Fail::new(SnStatus::InvalidArgument, format!("empty {rows}x{cols} matrix")));
    }
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Fail::new(SnStatus::InvalidArgument, "matrix size overflows"))?;
    if data.is_null() {
        return Err(Fail::null("data"));
    }
    let v = std::slice::from_raw_parts(data, len);
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Fail::new(SnStatus::InvalidArgument, "matrix has non-finite entries"));
    }
    Ok(Mat::from_fn(rows, cols, |i, j| v[i * cols + j]))
}

fn solver(o: &SnOptions) -> Result<SolverOptions, Fail> {
    if !(o.feas_tol > 0.0 && o.gap_tol > 0.0) {
        return Err(Fail::new(SnStatus::InvalidArgument, "tolerances must be positive"));
    }
    Ok(SolverOptions {
        feas_tol: o.feas_tol,
        gap_tol: o.gap_tol,
        max_iter: o.max_iter,
        time_limit: (o.time_limit_s > 0.0 && o.time_limit_s.is_finite()).then(|| Duration::from_secs_f64(o.time_limit_s)),
        ..SolverOptions::default()
    })
}

unsafe fn options(p: *const SnOptions) -> SnOptions {
    p.as_ref().copied().unwrap_or_else(default_options)
}

fn default_options() -> SnOptions {
    let d = SolverOptions::default();
    SnOptions {
        k: 0,
        s: 0,
        feas_tol: d.feas_tol,
        gap_tol: d.gap_tol,
        max_iter: d.max_iter,
        time_limit_s: 0.0,
    }
}

/// Fills `out` and hands the certificate to `cert_out` when both exist.
unsafe fn deliver(b: PmsvBound, out: &mut SnBound, cert_out: *mut *mut SnCertificate) -> SnStatus {
    *out = SnBound {
        bound: b.bound,
        rho: b.rho,
        status: b.status.into(),
        certified: b.certified(),
        nmat: b.stats.nmat,
        msize: b.stats.msize,
        nscal: b.stats.nscal,
        naff: b.stats.naff,
        iterations: b.iterations,
        time_s: b.total_time(),
    };
    if let Some(slot) = cert_out.as_mut() {
        *slot = match b.certificate {
            Some(c) => Box::into_raw(Box::new(SnCertificate(c))),
            None => ptr::null_mut(),
        };
    }
    if b.status.has_solution() {
        SnStatus::Ok
    } else {
        set_error(b.message.unwrap_or_else(|| format!("solver status {}", b.status)));
        SnStatus::NoSolution
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null.
///
/// The pointer stays valid until the next call into the library on the same
/// thread.
#[no_mangle]
pub extern "C" fn sn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default settings: order 0, unrestricted blocks, tolerances `1e-8`.
#[no_mangle]
pub extern "C" fn sn_options_default() -> SnOptions {
    default_options()
}

/// Parses `{"n": .., "terms": [{"exps": [..], "coef": ..}, ..]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_polynomial_from_json(json: *const c_char, out: *mut *mut SnPolynomial) -> SnStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        let p: Polynomial = serde_json::from_str(text(json, "json")?).map_err(|e| Fail::from(Error::from(e)))?;
        *slot = Box::into_raw(Box::new(SnPolynomial(p)));
        Ok(SnStatus::Ok)
    })
}

/// Canonical JSON of `p`; release with [`sn_string_free`].
///
/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_polynomial_to_json(p: *const SnPolynomial, out: *mut *mut c_char) -> SnStatus {
    guard(|| {
        let p = handle(p, "p")?;
        let slot = self::out(out, "out")?;
        let s = serde_json::to_string(&p.0).map_err(|e| Fail::from(Error::from(e)))?;
        *slot = owned_string(s)?;
        Ok(SnStatus::Ok)
    })
}

/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_polynomial_nvars(p: *const SnPolynomial, out: *mut usize) -> SnStatus {
    guard(|| {
        *self::out(out, "out")? = handle(p, "p")?.0.nvars();
        Ok(SnStatus::Ok)
    })
}

/// Evaluates `p` at `x[0..len]`; `len` must equal the variable count.
///
/// # Safety
/// `x` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_polynomial_eval(p: *const SnPolynomial, x: *const f64, len: usize, out: *mut f64) -> SnStatus {
    guard(|| {
        let p = &handle(p, "p")?.0;
        let slot = self::out(out, "out")?;
        if len != p.nvars() {
            return Err(Error::DimensionMismatch { expected: p.nvars(), found: len }.into());
        }
        let xs: &[f64] = if len == 0 {
            &[]
        } else if x.is_null() {
            return Err(Fail::null("x"));
        } else {
            std::slice::from_raw_parts(x, len)
        };
        *slot = p.eval(xs);
        Ok(SnStatus::Ok)
    })
}

/// Releases a polynomial. Null is ignored.
///
/// # Safety
/// `p` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sn_polynomial_free(p: *mut SnPolynomial) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Parses a certificate document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_certificate_from_json(json: *const c_char, out: *mut *mut SnCertificate) -> SnStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        let c = Certificate::from_json(text(json, "json")?)?;
        *slot = Box::into_raw(Box::new(SnCertificate(c)));
        Ok(SnStatus::Ok)
    })
}

/// Certificate document; release with [`sn_string_free`].
///
/// # Safety
/// `c` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_certificate_to_json(c: *const SnCertificate, out: *mut *mut c_char) -> SnStatus {
    guard(|| {
        let c = handle(c, "c")?;
        let slot = self::out(out, "out")?;
        *slot = owned_string(c.0.to_json()?)?;
        Ok(SnStatus::Ok)
    })
}

/// The certified level `lambda`.
///
/// # Safety
/// `c` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_certificate_lambda(c: *const SnCertificate, out: *mut f64) -> SnStatus {
    guard(|| {
        *self::out(out, "out")? = handle(c, "c")?.0.lambda;
        Ok(SnStatus::Ok)
    })
}

/// Recomputes the certificate identity from its stored data.
///
/// `tol <= 0` selects the default relative tolerance. Returns
/// [`SnStatus::Rejected`] with `out` filled when the check fails.
///
/// # Safety
/// `c` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_certificate_verify(c: *const SnCertificate, tol: f64, out: *mut SnVerifyReport) -> SnStatus {
    guard(|| {
        let c = &handle(c, "c")?.0;
        let slot = self::out(out, "out")?;
        if tol.is_nan() {
            return Err(Fail::new(SnStatus::InvalidArgument, "tolerance is NaN"));
        }
        let r = verify_identity_with_tol(&c.objective, &c.constraints(), c.k, c, (tol > 0.0).then_some(tol));
        *slot = SnVerifyReport {
            residual: r.residual,
            identity_residual: r.identity_residual,
            gram_residual: r.gram_residual,
            psd_margin: r.psd_margin,
            tol: r.tol,
            accepted: r.accepted,
        };
        if r.accepted {
            Ok(SnStatus::Ok)
        } else {
            set_error(format!("residual {:e} (tolerance {:e}), psd margin {:e}", r.residual, r.tol, r.psd_margin));
            Ok(SnStatus::Rejected)
        }
    })
}

/// Releases a certificate. Null is ignored.
///
/// # Safety
/// `c` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sn_certificate_free(c: *mut SnCertificate) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Pólya-hierarchy upper bound on the positive maximal singular value of the
/// row-major `rows x cols` matrix `data`.
///
/// `opts` may be null for defaults. When `cert_out` is non-null it receives
/// the certificate (for `Q / scale`) or null. Returns [`SnStatus::NoSolution`]
/// with `out` filled when the relaxation yields no bound.
///
/// # Safety
/// `data` must point to `rows * cols` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_pmsv_upper_bound(
    data: *const f64,
    rows: usize,
    cols: usize,
    opts: *const SnOptions,
    out: *mut SnBound,
    cert_out: *mut *mut SnCertificate,
) -> SnStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        let m = matrix(data, rows, cols)?;
        let o = options(opts);
        let spec = if o.s == 0 { RelaxationSpec::full(o.k) } else { RelaxationSpec::new(o.k, o.s) };
        let b = upper_bound(m.as_ref(), &spec.with_solver(solver(&o)?))?;
        Ok(deliver(b, slot, cert_out))
    })
}

/// Order-`opts.k` Putinar bound on the same quantity; `opts.s` is ignored.
///
/// # Safety
/// As for [`sn_pmsv_upper_bound`].
#[no_mangle]
pub unsafe extern "C" fn sn_pmsv_putinar_bound(
    data: *const f64,
    rows: usize,
    cols: usize,
    opts: *const SnOptions,
    out: *mut SnBound,
    cert_out: *mut *mut SnCertificate,
) -> SnStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        let m = matrix(data, rows, cols)?;
        let o = options(opts);
        let b = putinar_bound(m.as_ref(), o.k, &solver(&o)?)?;
        Ok(deliver(b, slot, cert_out))
    })
}

/// Exact positive maximal singular value by support enumeration (small `cols`).
///
/// # Safety
/// `data` must point to `rows * cols` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_pmsv_oracle_exact(data: *const f64, rows: usize, cols: usize, out: *mut f64) -> SnStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        let inst = make_instance(matrix(data, rows, cols)?.as_ref())?;
        *slot = oracle_support_enum(inst.q.as_ref())?.max(0.0).sqrt();
        Ok(SnStatus::Ok)
    })
}

/// Lower estimate of the positive maximal singular value from projected
/// gradient ascent with `restarts` seeded starts.
///
/// # Safety
/// `data` must point to `rows * cols` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_pmsv_oracle_gradient(
    data: *const f64,
    rows: usize,
    cols: usize,
    restarts: usize,
    seed: u64,
    out: *mut f64,
) -> SnStatus {
    guard(|| {
        let slot = self::out(out, "out")?;
        let inst = make_instance(matrix(data, rows, cols)?.as_ref())?;
        *slot = oracle_projected_gradient(inst.q.as_ref(), restarts.max(1), seed).max(0.0).sqrt();
        Ok(SnStatus::Ok)
    })
}
