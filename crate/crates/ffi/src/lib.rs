//! C ABI over `spectral-reg`.
//!
//! Objects are opaque handles created by `sr_*` constructors and released by
//! the matching `*_free`. Every fallible call returns an [`SrStatus`]; the
//! message of the most recent failure on the calling thread is available
//! from [`sr_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use spectral_reg::filters::{adv_inf_filter, mse_filter, tikhonov, FilterSpec};
use spectral_reg::laws::{law_from_decay, white_noise, CoeffDist, DataLaw, NoiseLaw};
use spectral_reg::operators::{from_matrix, make_synthetic, Decay, SingularSystem};
use spectral_reg::risk::{analytic_risk, generic_risk, worst_case_l2};
use spectral_reg::seqspace::CoefficientVector;
use spectral_reg::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Undefined = 4,
    Numerical = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Singular system of a linear operator.
pub struct SrSystem(SingularSystem);
/// Per-coefficient data law.
pub struct SrDataLaw(DataLaw);
/// Per-coefficient noise law.
pub struct SrNoiseLaw(NoiseLaw);
/// Spectral filter coefficients.
pub struct SrFilter(FilterSpec);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(SrStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Dimension { .. } => SrStatus::Dimension,
            Error::DivisionByZero { .. } | Error::UndefinedCoefficient { .. } => SrStatus::Undefined,
            Error::Numerical(_) => SrStatus::Numerical,
            _ => SrStatus::InvalidArgument,
        };
        Fail(code, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SrStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SrStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            SrStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_value<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = value;
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread (empty after a success).
///
/// The pointer stays valid until the next `sr_*` call on the same thread.
#[no_mangle]
pub extern "C" fn sr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Synthetic system with `sigma_n = n^{-p}`, `n = 1..=len`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sr_system_synthetic(len: usize, p: f64, out: *mut *mut SrSystem) -> SrStatus {
    guard(|| put(out, SrSystem(make_synthetic(len, Decay::Polynomial(p), 0)?)))
}

/// System with the given singular values (sorted on construction).
///
/// # Safety
/// `sigma` must point to `len` readable doubles; `out` as for [`sr_system_synthetic`].
#[no_mangle]
pub unsafe extern "C" fn sr_system_from_singular_values(
    sigma: *const f64,
    len: usize,
    out: *mut *mut SrSystem,
) -> SrStatus {
    guard(|| {
        let s = slice(sigma, len, "sigma")?.to_vec();
        put(out, SrSystem(SingularSystem::from_singular_values(s, 0)?))
    })
}

/// SVD of a dense row-major `rows x cols` matrix.
///
/// # Safety
/// `data` must point to `rows * cols` readable doubles; `out` as for [`sr_system_synthetic`].
#[no_mangle]
pub unsafe extern "C" fn sr_system_from_matrix(
    data: *const f64,
    rows: usize,
    cols: usize,
    out: *mut *mut SrSystem,
) -> SrStatus {
    guard(|| {
        let n = rows.checked_mul(cols).ok_or_else(|| Fail(SrStatus::InvalidArgument, "matrix too large".into()))?;
        let a = nalgebra::DMatrix::from_row_slice(rows, cols, slice(data, n, "data")?);
        put(out, SrSystem(from_matrix(&a)?))
    })
}

/// Number of positive singular values.
///
/// # Safety
/// `sys` must be a live handle; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_system_len(sys: *const SrSystem, out_len: *mut usize) -> SrStatus {
    guard(|| put_value(out_len, deref(sys, "system")?.0.len()))
}

/// # Safety
/// `sys` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sr_system_free(sys: *mut SrSystem) {
    free(sys)
}

/// Gaussian law with `Pi_n = n^{-a}`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_law_from_decay(len: usize, a: f64, out: *mut *mut SrDataLaw) -> SrStatus {
    guard(|| put(out, SrDataLaw(law_from_decay(len, a, 1.0, CoeffDist::Gaussian)?)))
}

/// Law with explicit second moments and, if `abs_moment` is non-null,
/// explicit absolute first moments; otherwise Gaussian moments are used.
///
/// # Safety
/// `pi` (and `abs_moment` if non-null) must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn sr_law_from_moments(
    pi: *const f64,
    abs_moment: *const f64,
    len: usize,
    out: *mut *mut SrDataLaw,
) -> SrStatus {
    guard(|| {
        let pi = slice(pi, len, "pi")?.to_vec();
        let law = if abs_moment.is_null() {
            DataLaw::from_moments(pi, CoeffDist::Gaussian)?
        } else {
            DataLaw::with_abs_moment(pi, slice(abs_moment, len, "abs_moment")?.to_vec(), CoeffDist::Gaussian)?
        };
        put(out, SrDataLaw(law))
    })
}

/// # Safety
/// `law` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sr_law_free(law: *mut SrDataLaw) {
    free(law)
}

/// White measurement noise `Delta_n = delta^2`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_white_noise(len: usize, delta: f64, out: *mut *mut SrNoiseLaw) -> SrStatus {
    guard(|| put(out, SrNoiseLaw(white_noise(len, delta)?)))
}

/// # Safety
/// `noise` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sr_noise_free(noise: *mut SrNoiseLaw) {
    free(noise)
}

/// MSE-optimal filter `sigma Pi / (Pi sigma^2 + Delta)`.
///
/// # Safety
/// Input handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_filter_mse(
    sys: *const SrSystem,
    law: *const SrDataLaw,
    noise: *const SrNoiseLaw,
    out: *mut *mut SrFilter,
) -> SrStatus {
    guard(|| {
        let f = mse_filter(&deref(sys, "system")?.0, &deref(law, "law")?.0, &deref(noise, "noise")?.0)?;
        put(out, SrFilter(f))
    })
}

/// Closed-form minimizer of the sup-norm adversarial risk.
///
/// # Safety
/// Input handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_filter_adv_inf(
    sys: *const SrSystem,
    law: *const SrDataLaw,
    delta: f64,
    out: *mut *mut SrFilter,
) -> SrStatus {
    guard(|| put(out, SrFilter(adv_inf_filter(&deref(sys, "system")?.0, &deref(law, "law")?.0, delta)?)))
}

/// Tikhonov filter `sigma / (sigma^2 + alpha)`.
///
/// # Safety
/// `sys` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_filter_tikhonov(sys: *const SrSystem, alpha: f64, out: *mut *mut SrFilter) -> SrStatus {
    guard(|| put(out, SrFilter(tikhonov(&deref(sys, "system")?.0, alpha)?)))
}

/// Copies the filter coefficients into `buf`.
///
/// `out_len` always receives the coefficient count; if `cap` is smaller the
/// call fails with `SR_STATUS_BUFFER_TOO_SMALL` and writes nothing to `buf`.
///
/// # Safety
/// `filter` must be live; `buf` must point to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sr_filter_coefficients(
    filter: *const SrFilter,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> SrStatus {
    guard(|| {
        let g = deref(filter, "filter")?.0.coefficients();
        put_value(out_len, g.len())?;
        if cap < g.len() {
            return Err(Fail(SrStatus::BufferTooSmall, format!("need {} slots, got {cap}", g.len())));
        }
        if !g.is_empty() {
            if buf.is_null() {
                return Err(null("buffer"));
            }
            ptr::copy_nonoverlapping(g.as_ptr(), buf, g.len());
        }
        Ok(())
    })
}

/// # Safety
/// `filter` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sr_filter_free(filter: *mut SrFilter) {
    free(filter)
}

/// Risk of the MSE-optimal filter.
///
/// # Safety
/// Input handles must be live; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_risk_analytic(
    sys: *const SrSystem,
    law: *const SrDataLaw,
    noise: *const SrNoiseLaw,
    out_value: *mut f64,
) -> SrStatus {
    guard(|| {
        let r = analytic_risk(&deref(sys, "system")?.0, &deref(law, "law")?.0, &deref(noise, "noise")?.0)?;
        put_value(out_value, r.value)
    })
}

/// Expected risk `sum (1 - sigma g)^2 Pi + g^2 Delta` of any filter.
///
/// # Safety
/// Input handles must be live; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_risk_generic(
    filter: *const SrFilter,
    sys: *const SrSystem,
    law: *const SrDataLaw,
    noise: *const SrNoiseLaw,
    out_value: *mut f64,
) -> SrStatus {
    guard(|| {
        let r = generic_risk(
            &deref(filter, "filter")?.0,
            &deref(sys, "system")?.0,
            &deref(law, "law")?.0,
            &deref(noise, "noise")?.0,
        )?;
        put_value(out_value, r.value)
    })
}

/// `max_{|e| <= delta} |R[g](Ax + e) - x|^2` for a signal `x` in singular coordinates.
///
/// # Safety
/// Handles must be live; `x` must point to `x_len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn sr_worst_case_l2(
    filter: *const SrFilter,
    sys: *const SrSystem,
    x: *const f64,
    x_len: usize,
    delta: f64,
    out_value: *mut f64,
) -> SrStatus {
    guard(|| {
        let x = CoefficientVector::x(slice(x, x_len, "x")?.to_vec())?;
        let w = worst_case_l2(&deref(filter, "filter")?.0, &deref(sys, "system")?.0, &x, delta)?;
        put_value(out_value, w.value)
    })
}
