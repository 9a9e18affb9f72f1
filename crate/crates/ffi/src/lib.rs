//! C ABI over the fiberqed cascade.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free`. Every fallible call returns an [`FqStatus`]; the message
//! of the last failure on the calling thread is available through
//! [`fq_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fiberqed::cascade::{run_cascade, validate_params, CascadeState};
use fiberqed::config::RunConfig;
use fiberqed::observables::{h_route, k_route, ScanOptions};
use fiberqed::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Parameter = 4,
    ConstraintViolated = 5,
    OutOfRange = 6,
    Numerical = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Parsed run configuration.
pub struct FqConfig {
    inner: RunConfig,
}

/// Completed cascade.
pub struct FqCascade {
    inner: CascadeState,
    scan: ScanOptions,
    lanczos: fiberqed::spectral::LanczosOptions,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.extend_from_slice(msg.as_bytes());
    });
}

fn status_of(err: &Error) -> FqStatus {
    match err {
        Error::Config { .. } | Error::Io(_) => FqStatus::Config,
        Error::Parameter(_) | Error::Domain(_) => FqStatus::Parameter,
        _ => FqStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (FqStatus, String)>) -> FqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FqStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FqStatus::Panic
        }
    }
}

fn fail(e: Error) -> (FqStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (FqStatus, String) {
    (FqStatus::NullPointer, format!("{name} is null"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated).
/// `*len` receives the message length without the terminator.
///
/// # Safety
/// `buf` must point to `cap` writable bytes or be null with `cap = 0`;
/// `len` must be valid for writes or null.
#[no_mangle]
pub unsafe extern "C" fn fq_last_error(buf: *mut c_char, cap: usize, len: *mut usize) -> FqStatus {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !len.is_null() {
            *len = e.len();
        }
        if buf.is_null() || cap < e.len() + 1 {
            return if buf.is_null() && cap == 0 { FqStatus::Ok } else { FqStatus::BufferTooSmall };
        }
        ptr::copy_nonoverlapping(e.as_ptr(), buf.cast::<u8>(), e.len());
        *buf.add(e.len()) = 0;
        FqStatus::Ok
    })
}

/// Parses configuration text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fq_config_parse(text: *const c_char, out: *mut *mut FqConfig) -> FqStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| (FqStatus::InvalidUtf8, e.to_string()))?;
        let cfg = RunConfig::parse(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(FqConfig { inner: cfg }));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from [`fq_config_parse`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fq_config_free(cfg: *mut FqConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Overrides the coupling constant.
///
/// # Safety
/// `cfg` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn fq_config_set_alpha(cfg: *mut FqConfig, alpha: f64) -> FqStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err((FqStatus::Parameter, format!("alpha must be finite and non-negative, got {alpha}")));
        }
        cfg.inner.params.alpha = alpha;
        Ok(())
    })
}

/// Writes whether every parameter constraint holds and the number failing.
///
/// # Safety
/// `cfg` must be a live handle; the out pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn fq_validate(cfg: *const FqConfig, all_pass: *mut bool, failures: *mut usize) -> FqStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let r = validate_params(&cfg.inner.params);
        if !all_pass.is_null() {
            *all_pass = r.all_pass();
        }
        if !failures.is_null() {
            *failures = r.constraints.iter().chain(&r.domain).filter(|c| !c.pass()).count();
        }
        Ok(())
    })
}

/// Runs the cascade. Fails with `ConstraintViolated` when a parameter
/// relation fails and the configuration does not set `allow_invalid`.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fq_cascade_run(cfg: *const FqConfig, out: *mut *mut FqCascade) -> FqStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = &cfg.inner;
        let report = validate_params(&c.params);
        if !report.all_pass() && !c.solver.allow_invalid {
            let name = report.first_failure().map_or("?", |f| f.name);
            return Err((FqStatus::ConstraintViolated, format!("constraint '{name}' violated")));
        }
        let grid = c.grid().map_err(fail)?;
        let basis = c.basis(&grid).map_err(fail)?;
        let state = run_cascade(&c.params, &grid, &basis, &c.solver).map_err(fail)?;
        *out = Box::into_raw(Box::new(FqCascade { inner: state, scan: c.scan_options(), lanczos: c.solver.lanczos }));
        Ok(())
    })
}

/// # Safety
/// `c` must come from [`fq_cascade_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fq_cascade_free(c: *mut FqCascade) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Number of scale records (`J + 1`); zero for a null handle.
///
/// # Safety
/// `c` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn fq_cascade_len(c: *const FqCascade) -> usize {
    c.as_ref().map_or(0, |c| c.inner.records.len())
}

unsafe fn record<'a>(c: *const FqCascade, j: usize) -> Result<&'a fiberqed::cascade::ScaleRecord, (FqStatus, String)> {
    let c = c.as_ref().ok_or_else(|| null("cascade"))?;
    c.inner
        .records
        .get(j)
        .ok_or_else(|| (FqStatus::OutOfRange, format!("scale {j} out of range 0..{}", c.inner.records.len())))
}

/// Ground energy, gradient and step norm at scale `j`. `grad` receives three
/// values; the step norm is NaN on the last scale.
///
/// # Safety
/// `c` must be a live handle; `energy` and `step_norm` valid for one write or
/// null, `grad` valid for three writes or null.
#[no_mangle]
pub unsafe extern "C" fn fq_cascade_scale(
    c: *const FqCascade,
    j: usize,
    energy: *mut f64,
    grad: *mut f64,
    step_norm: *mut f64,
) -> FqStatus {
    guard(|| {
        let r = record(c, j)?;
        if !energy.is_null() {
            *energy = r.energy;
        }
        if !grad.is_null() {
            ptr::copy_nonoverlapping(r.grad_e.as_ptr(), grad, 3);
        }
        if !step_norm.is_null() {
            *step_norm = r.step_norm;
        }
        Ok(())
    })
}

/// Copies `Ψ^{σ_j}` in full-basis coordinates. `*len` receives the
/// dimension; pass a null `buf` to query it.
///
/// # Safety
/// `buf` must hold `cap` doubles or be null; `len` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fq_cascade_state(c: *const FqCascade, j: usize, buf: *mut f64, cap: usize, len: *mut usize) -> FqStatus {
    guard(|| {
        let r = record(c, j)?;
        if len.is_null() {
            return Err(null("len"));
        }
        *len = r.psi.len();
        if buf.is_null() {
            return Ok(());
        }
        if cap < r.psi.len() {
            return Err((FqStatus::BufferTooSmall, format!("need {} doubles, have {cap}", r.psi.len())));
        }
        ptr::copy_nonoverlapping(r.psi.as_ptr(), buf, r.psi.len());
        Ok(())
    })
}

/// Second derivative of the ground energy along the momentum axis at scale
/// `j`, by the H-picture and canonical-form contour routes.
///
/// # Safety
/// `c` must be a live handle; out pointers valid for one write or null.
#[no_mangle]
pub unsafe extern "C" fn fq_cascade_curvature(c: *const FqCascade, j: usize, d2e_h: *mut f64, d2e_k: *mut f64) -> FqStatus {
    guard(|| {
        record(c, j)?;
        let c = &*c;
        let h = h_route(&c.inner, j, &c.scan).map_err(fail)?;
        let k = k_route(&c.inner, j, &c.scan, &c.lanczos).map_err(fail)?;
        if !d2e_h.is_null() {
            *d2e_h = h;
        }
        if !d2e_k.is_null() {
            *d2e_k = k.value;
        }
        Ok(())
    })
}
