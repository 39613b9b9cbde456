//! C interface to `ecfnorm`.
//!
//! Every fallible function returns an [`EcfnormStatus`] and writes its result
//! through an out-pointer. On failure a message is kept per thread and can be
//! read with [`ecfnorm_last_error`]. Residual handles are opaque; release them
//! with [`ecfnorm_residuals_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ecfnorm::null::{critical_values_mc, mean_limit, p_value_mc};
use ecfnorm::{
    mardia_kurtosis, mrs_skewness, standardize, u_statistic, Error, Sample, ScaledResiduals,
    StatisticConfig,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcfnormStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Too few observations, non-finite values, or bad shapes.
    DataError = 3,
    SingularCovariance = 4,
    NumericalFailure = 5,
    Panic = 6,
}

/// Scaled residuals of one sample.
pub struct EcfnormResiduals {
    inner: ScaledResiduals,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> EcfnormStatus {
    match err {
        Error::SingularCovariance { .. } => EcfnormStatus::SingularCovariance,
        Error::Numerical(_) => EcfnormStatus::NumericalFailure,
        Error::InvalidParameter(_)
        | Error::UnsupportedDimension(_)
        | Error::AlternativeParse { .. } => EcfnormStatus::InvalidArgument,
        _ => EcfnormStatus::DataError,
    }
}

fn guard<F>(f: F) -> EcfnormStatus
where
    F: FnOnce() -> Result<(), (EcfnormStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            EcfnormStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            EcfnormStatus::Panic
        }
    }
}

fn lift<T>(r: ecfnorm::Result<T>) -> Result<T, (EcfnormStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null_ptr(what: &str) -> (EcfnormStatus, String) {
    (EcfnormStatus::NullPointer, format!("{what} is null"))
}

/// Message for the last failed call on this thread; empty after success.
/// Valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn ecfnorm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ecfnorm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Standardize an `n x d` row-major sample into a new handle.
///
/// # Safety
/// `data` must point to `n * d` readable doubles and `out` to a writable
/// handle pointer.
#[no_mangle]
pub unsafe extern "C" fn ecfnorm_residuals_new(
    data: *const f64,
    n: usize,
    d: usize,
    out: *mut *mut EcfnormResiduals,
) -> EcfnormStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_ptr("out"));
        }
        *out = ptr::null_mut();
        if data.is_null() {
            return Err(null_ptr("data"));
        }
        let len = n.checked_mul(d).ok_or((
            EcfnormStatus::InvalidArgument,
            "n * d overflows".to_string(),
        ))?;
        let values = std::slice::from_raw_parts(data, len);
        let sample = lift(Sample::from_row_major(values, n, d))?;
        let inner = lift(standardize(&sample))?;
        *out = Box::into_raw(Box::new(EcfnormResiduals { inner }));
        Ok(())
    })
}

/// Release a handle; null is ignored.
///
/// # Safety
/// `handle` must come from [`ecfnorm_residuals_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ecfnorm_residuals_free(handle: *mut EcfnormResiduals) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

unsafe fn residuals<'a>(
    h: *const EcfnormResiduals,
) -> Result<&'a ScaledResiduals, (EcfnormStatus, String)> {
    h.as_ref()
        .map(|r| &r.inner)
        .ok_or_else(|| null_ptr("handle"))
}

unsafe fn write<T>(out: *mut T, v: T, what: &str) -> Result<(), (EcfnormStatus, String)> {
    if out.is_null() {
        return Err(null_ptr(what));
    }
    *out = v;
    Ok(())
}

/// `U_{n,a}` (`out_u`) and its table normalization `d^{-2} (a/pi)^{d/2} U`
/// (`out_scaled`). Either out-pointer may be null.
///
/// # Safety
/// `handle` must be a live handle; non-null out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ecfnorm_u_statistic(
    handle: *const EcfnormResiduals,
    a: f64,
    out_u: *mut f64,
    out_scaled: *mut f64,
) -> EcfnormStatus {
    guard(|| {
        let y = residuals(handle)?;
        let r = lift(StatisticConfig::new(a).and_then(|cfg| u_statistic(y, &cfg)))?;
        if !out_u.is_null() {
            *out_u = r.u;
        }
        if !out_scaled.is_null() {
            *out_scaled = r.scaled;
        }
        Ok(())
    })
}

/// Mardia kurtosis of the residuals.
///
/// # Safety
/// `handle` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ecfnorm_kurtosis(
    handle: *const EcfnormResiduals,
    out: *mut f64,
) -> EcfnormStatus {
    guard(|| write(out, mardia_kurtosis(residuals(handle)?), "out"))
}

/// Mori-Rohatgi-Szekely skewness of the residuals.
///
/// # Safety
/// `handle` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ecfnorm_skewness(
    handle: *const EcfnormResiduals,
    out: *mut f64,
) -> EcfnormStatus {
    guard(|| write(out, mrs_skewness(residuals(handle)?), "out"))
}

/// Monte Carlo `(1 - alpha)` critical value of the table-normalized statistic.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ecfnorm_critical_value(
    n: usize,
    d: usize,
    a: f64,
    alpha: f64,
    reps: usize,
    seed: u64,
    out: *mut f64,
) -> EcfnormStatus {
    guard(|| {
        let table = lift(critical_values_mc(n, d, &[a], alpha, reps, seed))?;
        write(out, table.entries[0].quantile, "out")
    })
}

/// Monte Carlo p-value of the sample behind `handle` at tuning parameter `a`.
///
/// # Safety
/// `handle` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ecfnorm_p_value(
    handle: *const EcfnormResiduals,
    a: f64,
    reps: usize,
    seed: u64,
    out: *mut f64,
) -> EcfnormStatus {
    guard(|| {
        let y = residuals(handle)?;
        let stat = lift(StatisticConfig::new(a).and_then(|cfg| u_statistic(y, &cfg)))?;
        let p = lift(p_value_mc(stat.scaled, y.n(), y.d(), a, reps, seed))?;
        write(out, p, "out")
    })
}

/// Mean of the limit null law of `U_{n,a}`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ecfnorm_mean_limit(d: usize, a: f64, out: *mut f64) -> EcfnormStatus {
    guard(|| write(out, lift(mean_limit(d, a))?, "out"))
}

/// Number of observations behind a handle, or 0 for null.
///
/// # Safety
/// `handle` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn ecfnorm_residuals_n(handle: *const EcfnormResiduals) -> usize {
    handle.as_ref().map_or(0, |r| r.inner.n())
}

/// Dimension behind a handle, or 0 for null.
///
/// # Safety
/// `handle` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn ecfnorm_residuals_d(handle: *const EcfnormResiduals) -> usize {
    handle.as_ref().map_or(0, |r| r.inner.d())
}
