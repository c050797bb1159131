//! C ABI for the momcp change point test.
//!
//! Models and reports are opaque handles created and destroyed through this
//! interface. Every fallible function returns a [`MomcpStatus`]; on failure a
//! message is available from [`momcp_last_error_message`] until the next call
//! on the same thread. The generated header lives in `include/momcp.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use momcp::models::{model_by_name, SharedModel};
use momcp::zprocess::{analyze, run_test_with, PathAnalysis, TestOptions};
use momcp::{limits, Error};

/// Result codes. `MOMCP_STATUS_OK` is zero.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MomcpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownModel = 3,
    DimensionMismatch = 4,
    OutOfDomain = 5,
    InsufficientData = 6,
    DegenerateSample = 7,
    SingularJacobian = 8,
    SingularCovariance = 9,
    NoConvergence = 10,
    NonFinite = 11,
    MissingCriticalValue = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

impl From<&Error> for MomcpStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::UnknownModel(_) => Self::UnknownModel,
            Error::DimensionMismatch { .. } => Self::DimensionMismatch,
            Error::OutOfDomain(_) => Self::OutOfDomain,
            Error::InsufficientData { .. } => Self::InsufficientData,
            Error::DegenerateSample(_) => Self::DegenerateSample,
            Error::SingularJacobian(_) => Self::SingularJacobian,
            Error::SingularCovariance { .. } => Self::SingularCovariance,
            Error::NoConvergence { .. } => Self::NoConvergence,
            Error::NonFinite(_) => Self::NonFinite,
            Error::MissingCriticalValue { .. } => Self::MissingCriticalValue,
            Error::InvalidArgument(_) => Self::InvalidArgument,
        }
    }
}

/// Opaque moment model handle.
pub struct MomcpModel {
    inner: SharedModel,
}

/// Opaque result of a test or detection run.
pub struct MomcpReport {
    analysis: PathAnalysis,
    critical_value: f64,
    reject: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn fail(status: MomcpStatus, msg: impl Into<String>) -> MomcpStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> MomcpStatus {
    let status = MomcpStatus::from(&e);
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> MomcpStatus) -> MomcpStatus {
    clear_error();
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(MomcpStatus::Panic, "internal panic"))
}

fn copy_out(src: &[f64], out: *mut f64, len: usize) -> MomcpStatus {
    if out.is_null() {
        return fail(MomcpStatus::NullPointer, "output buffer is NULL");
    }
    if len < src.len() {
        return fail(
            MomcpStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        );
    }
    // SAFETY: `out` is non-null and the caller promises `len` writable doubles.
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), out, src.len()) };
    MomcpStatus::Ok
}

/// # Safety
/// `data` must point to `n` readable doubles (it may be NULL when `n == 0`).
unsafe fn observations<'a>(data: *const f64, n: usize) -> Option<&'a [f64]> {
    if n == 0 {
        Some(&[])
    } else if data.is_null() {
        None
    } else {
        Some(slice::from_raw_parts(data, n))
    }
}

/// Message for the last failed call on this thread, or NULL.
///
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn momcp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn momcp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a model by name ("gamma", "exponential", "normal", "poisson", "bernoulli").
///
/// # Safety
/// `name` must be a valid NUL-terminated string and `out` a valid pointer.
/// The handle written to `*out` must be released with [`momcp_model_free`].
#[no_mangle]
pub unsafe extern "C" fn momcp_model_new(name: *const c_char, out: *mut *mut MomcpModel) -> MomcpStatus {
    guard(|| {
        if name.is_null() || out.is_null() {
            return fail(MomcpStatus::NullPointer, "name or out is NULL");
        }
        let Ok(name) = CStr::from_ptr(name).to_str() else {
            return fail(MomcpStatus::InvalidArgument, "model name is not UTF-8");
        };
        match model_by_name(name) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(MomcpModel { inner }));
                MomcpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `model` must be NULL or a handle from [`momcp_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn momcp_model_free(model: *mut MomcpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Parameter dimension `d` of the model, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn momcp_model_dim(model: *const MomcpModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// Method-of-moments estimate of the parameter; writes `d` values to `theta_out`.
///
/// # Safety
/// `model` must be a live handle, `data` must hold `n` doubles and `theta_out`
/// must have room for `theta_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn momcp_mme(
    model: *const MomcpModel,
    data: *const f64,
    n: usize,
    theta_out: *mut f64,
    theta_len: usize,
) -> MomcpStatus {
    guard(|| {
        let (Some(model), Some(data)) = (model.as_ref(), observations(data, n)) else {
            return fail(MomcpStatus::NullPointer, "model or data is NULL");
        };
        match momcp::mme(data, model.inner.as_ref()) {
            Ok(r) => copy_out(&r.theta_hat, theta_out, theta_len),
            Err(e) => from_error(e),
        }
    })
}

/// Runs the sup test at `level`.
///
/// A finite positive `critical_value` is used as is; pass NaN or a value
/// `<= 0` to use the shipped table. `ridge` is added to the covariance
/// diagonal (0 disables it).
///
/// # Safety
/// `model` must be a live handle, `data` must hold `n` doubles and `out` must
/// be valid. Release the report with [`momcp_report_free`].
#[no_mangle]
pub unsafe extern "C" fn momcp_run_test(
    model: *const MomcpModel,
    data: *const f64,
    n: usize,
    level: f64,
    critical_value: f64,
    ridge: f64,
    out: *mut *mut MomcpReport,
) -> MomcpStatus {
    guard(|| {
        let (Some(model), Some(data)) = (model.as_ref(), observations(data, n)) else {
            return fail(MomcpStatus::NullPointer, "model or data is NULL");
        };
        if out.is_null() {
            return fail(MomcpStatus::NullPointer, "out is NULL");
        }
        let options = TestOptions {
            ridge: if ridge > 0.0 { ridge } else { 0.0 },
            critical_value: (critical_value.is_finite() && critical_value > 0.0).then_some(critical_value),
            ..Default::default()
        };
        match run_test_with(data, model.inner.as_ref(), level, &options) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(MomcpReport {
                    critical_value: r.critical_value,
                    reject: r.reject,
                    analysis: r.analysis,
                }));
                MomcpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Computes the statistic path and change point estimate without a decision.
/// The report's critical value is NaN and its reject flag is 0.
///
/// # Safety
/// As for [`momcp_run_test`].
#[no_mangle]
pub unsafe extern "C" fn momcp_detect(
    model: *const MomcpModel,
    data: *const f64,
    n: usize,
    out: *mut *mut MomcpReport,
) -> MomcpStatus {
    guard(|| {
        let (Some(model), Some(data)) = (model.as_ref(), observations(data, n)) else {
            return fail(MomcpStatus::NullPointer, "model or data is NULL");
        };
        if out.is_null() {
            return fail(MomcpStatus::NullPointer, "out is NULL");
        }
        match analyze(data, model.inner.as_ref(), &TestOptions::default()) {
            Ok(analysis) => {
                *out = Box::into_raw(Box::new(MomcpReport {
                    analysis,
                    critical_value: f64::NAN,
                    reject: false,
                }));
                MomcpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `report` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn momcp_report_free(report: *mut MomcpReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// `T_n`, or NaN for NULL.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn momcp_report_t_stat(report: *const MomcpReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.analysis.t_stat)
}

/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn momcp_report_critical_value(report: *const MomcpReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.critical_value)
}

/// 1 when the test rejected, 0 otherwise.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn momcp_report_reject(report: *const MomcpReport) -> i32 {
    report.as_ref().map_or(0, |r| i32::from(r.reject))
}

/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn momcp_report_u_hat(report: *const MomcpReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.analysis.u_hat)
}

/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn momcp_report_k_hat(report: *const MomcpReport) -> usize {
    report.as_ref().map_or(0, |r| r.analysis.k_hat)
}

/// Sample size `n`; the path has `n + 1` entries.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn momcp_report_n(report: *const MomcpReport) -> usize {
    report.as_ref().map_or(0, |r| r.analysis.n)
}

/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn momcp_report_dim(report: *const MomcpReport) -> usize {
    report.as_ref().map_or(0, |r| r.analysis.dim)
}

/// Copies the `d` estimated parameters.
///
/// # Safety
/// `report` must be a live handle and `out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn momcp_report_theta(report: *const MomcpReport, out: *mut f64, len: usize) -> MomcpStatus {
    guard(|| match report.as_ref() {
        Some(r) => copy_out(&r.analysis.theta_hat, out, len),
        None => fail(MomcpStatus::NullPointer, "report is NULL"),
    })
}

/// Copies the `d * d` plug-in covariance in row-major order.
///
/// # Safety
/// `report` must be a live handle and `out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn momcp_report_sigma_hat(report: *const MomcpReport, out: *mut f64, len: usize) -> MomcpStatus {
    guard(|| match report.as_ref() {
        Some(r) => {
            let flat: Vec<f64> = r.analysis.sigma_hat.iter().flatten().copied().collect();
            copy_out(&flat, out, len)
        }
        None => fail(MomcpStatus::NullPointer, "report is NULL"),
    })
}

/// Copies the `n + 1` values `T_n(k/n)`, `k = 0..n`.
///
/// # Safety
/// `report` must be a live handle and `out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn momcp_report_path(report: *const MomcpReport, out: *mut f64, len: usize) -> MomcpStatus {
    guard(|| match report.as_ref() {
        Some(r) => copy_out(&r.analysis.t_path, out, len),
        None => fail(MomcpStatus::NullPointer, "report is NULL"),
    })
}

/// Critical value from the shipped table.
///
/// # Safety
/// `value` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn momcp_shipped_critical_value(dim: usize, level: f64, value: *mut f64) -> MomcpStatus {
    guard(|| {
        if value.is_null() {
            return fail(MomcpStatus::NullPointer, "value is NULL");
        }
        match limits::default_table().lookup(dim, level) {
            Some(c) => {
                *value = c.value;
                MomcpStatus::Ok
            }
            None => from_error(Error::MissingCriticalValue { dim, level }),
        }
    })
}

/// Simulates the `(1 - level)` quantile of the limit law with `reps`
/// replications on a grid of `grid` steps.
///
/// # Safety
/// `value` and `stderr` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn momcp_simulate_critical_value(
    dim: usize,
    level: f64,
    reps: usize,
    grid: usize,
    seed: u64,
    value: *mut f64,
    stderr: *mut f64,
) -> MomcpStatus {
    guard(|| {
        if value.is_null() || stderr.is_null() {
            return fail(MomcpStatus::NullPointer, "value or stderr is NULL");
        }
        match limits::critical_value(dim, level, reps, grid, seed) {
            Ok(c) => {
                *value = c.value;
                *stderr = c.stderr;
                MomcpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}
