//! C interface to `peakmin`.
//!
//! Instances and sessions are opaque heap handles created by `*_new` and
//! released by the matching `*_free`. Every fallible call returns a
//! [`PmStatus`]; on failure the message is kept per thread and can be read
//! with [`pm_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use peakmin::cr::optimal_cr;
use peakmin::offline::solve_offline_pmd;
use peakmin::online::{PolicyController, PolicyMode, PolicyOptions, DEFAULT_BISECTION_EPSILON};
use peakmin::{DemandProfile, Error, Instance, RateLimit};

/// Problem data: capacity, rate limit, horizon and demand bounds.
pub struct PmInstance(Instance);

/// A running online policy over one horizon.
pub struct PmSession(PolicyController);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmStatus {
    Ok = 0,
    NullPointer = 1,
    /// The instance parameters violate a model assumption.
    InvalidInstance = 2,
    InvalidArgument = 3,
    DemandOutOfBounds = 4,
    /// The LP machinery failed or reported an inconsistent state.
    SolverFailure = 5,
    /// Every slot of the session has been decided.
    SessionFinished = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmMode {
    /// Fixed ratio; pass the ratio, or a value <= 0 for the optimal one.
    Fixed = 0,
    Anytime = 1,
    /// Anytime ratios that also spend inventory the worst case no longer needs.
    AnytimeDepleting = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(message));
}

fn status_of(err: &Error) -> PmStatus {
    match err {
        Error::CapacityExceedsMinDemand { .. }
        | Error::NonPositiveBound { .. }
        | Error::InvertedBounds { .. }
        | Error::ZeroHorizon
        | Error::NegativeCapacity(_)
        | Error::NonFinite(_)
        | Error::DegenerateInstance(_) => PmStatus::InvalidInstance,
        Error::DemandOutOfBounds { .. } | Error::PrefixOutOfBounds(_) => PmStatus::DemandOutOfBounds,
        Error::NumericalFailure(_)
        | Error::MalformedProgram(_)
        | Error::DenominatorNotPositive(_)
        | Error::NegativeSlack { .. }
        | Error::DegenerateOfflinePeak => PmStatus::SolverFailure,
        _ => PmStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard<F>(f: F) -> PmStatus
where
    F: FnOnce() -> Result<(), PmFailure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PmStatus::Ok,
        Ok(Err(PmFailure::Domain(err))) => {
            let status = status_of(&err);
            set_last_error(err.to_string());
            status
        }
        Ok(Err(PmFailure::Status(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("Panic: internal error".into());
            PmStatus::Panic
        }
    }
}

enum PmFailure {
    Domain(Error),
    Status(PmStatus, String),
}

impl From<Error> for PmFailure {
    fn from(err: Error) -> Self {
        PmFailure::Domain(err)
    }
}

fn null(what: &str) -> PmFailure {
    PmFailure::Status(PmStatus::NullPointer, format!("NullPointer: `{what}` is null"))
}

unsafe fn demand_slice<'a>(demand: *const f64, len: usize) -> Result<&'a [f64], PmFailure> {
    if demand.is_null() {
        return Err(null("demand"));
    }
    Ok(std::slice::from_raw_parts(demand, len))
}

/// Creates an instance. A `rate_limit` that is not a positive finite number
/// means unbounded.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn pm_instance_new(
    capacity: f64,
    rate_limit: f64,
    horizon: usize,
    demand_lb: f64,
    demand_ub: f64,
    out: *mut *mut PmInstance,
) -> PmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let limit = if rate_limit.is_finite() && rate_limit > 0.0 {
            RateLimit::Bounded(rate_limit)
        } else {
            RateLimit::Unbounded
        };
        let inst = Instance::new(capacity, limit, horizon, demand_lb, demand_ub)?;
        *out = Box::into_raw(Box::new(PmInstance(inst)));
        Ok(())
    })
}

/// # Safety
/// `instance` must be null or a handle from [`pm_instance_new`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn pm_instance_free(instance: *mut PmInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Optimal competitive ratio of the instance.
///
/// # Safety
/// `instance` must be a live handle and `out_ratio` writable.
#[no_mangle]
pub unsafe extern "C" fn pm_optimal_cr(instance: *const PmInstance, out_ratio: *mut f64) -> PmStatus {
    guard(|| {
        let inst = instance.as_ref().ok_or_else(|| null("instance"))?;
        if out_ratio.is_null() {
            return Err(null("out_ratio"));
        }
        *out_ratio = optimal_cr(&inst.0)?.pi_star;
        Ok(())
    })
}

/// Offline optimum of a demand profile of length `len` (must equal the
/// horizon). `out_schedule` may be null; otherwise it receives `len` values.
///
/// # Safety
/// `demand` must point to `len` readable doubles, `out_schedule` (if not
/// null) to `len` writable doubles, and `out_peak` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_offline_solve(
    instance: *const PmInstance,
    demand: *const f64,
    len: usize,
    out_schedule: *mut f64,
    out_peak: *mut f64,
) -> PmStatus {
    guard(|| {
        let inst = instance.as_ref().ok_or_else(|| null("instance"))?;
        if out_peak.is_null() {
            return Err(null("out_peak"));
        }
        let profile = DemandProfile::new(&inst.0, demand_slice(demand, len)?.to_vec())?;
        let sol = solve_offline_pmd(&inst.0, &profile)?;
        if !out_schedule.is_null() {
            ptr::copy_nonoverlapping(sol.schedule.values().as_ptr(), out_schedule, len);
        }
        *out_peak = sol.peak;
        Ok(())
    })
}

/// Starts an online session. `ratio` is the fixed ratio for
/// [`PmMode::Fixed`] and the starting ratio for the anytime modes; a value
/// <= 0 selects the optimal competitive ratio. `epsilon <= 0` selects the
/// default bisection tolerance. `monthly_peak` is the peak already billed
/// (0 for none).
///
/// # Safety
/// `instance` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pm_session_new(
    instance: *const PmInstance,
    mode: PmMode,
    ratio: f64,
    monthly_peak: f64,
    epsilon: f64,
    out: *mut *mut PmSession,
) -> PmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let inst = instance.as_ref().ok_or_else(|| null("instance"))?.0;
        let ratio = if ratio > 0.0 { ratio } else { optimal_cr(&inst)?.pi_star };
        let options = PolicyOptions {
            mode: match mode {
                PmMode::Fixed => PolicyMode::FixedRatio(ratio),
                PmMode::Anytime => PolicyMode::Anytime,
                PmMode::AnytimeDepleting => PolicyMode::AnytimeDepleting,
            },
            monthly_peak,
            bisection_epsilon: if epsilon > 0.0 { epsilon } else { DEFAULT_BISECTION_EPSILON },
            initial_ratio: Some(ratio),
        };
        let ctl = PolicyController::new(inst, options)?;
        *out = Box::into_raw(Box::new(PmSession(ctl)));
        Ok(())
    })
}

/// Decides the next slot. `out_ratio` may be null.
///
/// # Safety
/// `session` must be a live handle; `out_discharge` must be writable and
/// `out_ratio` null or writable.
#[no_mangle]
pub unsafe extern "C" fn pm_session_step(
    session: *mut PmSession,
    demand: f64,
    out_discharge: *mut f64,
    out_ratio: *mut f64,
) -> PmStatus {
    guard(|| {
        let session = session.as_mut().ok_or_else(|| null("session"))?;
        if out_discharge.is_null() {
            return Err(null("out_discharge"));
        }
        if session.0.is_finished() {
            return Err(PmFailure::Status(
                PmStatus::SessionFinished,
                "SessionFinished: every slot has been decided".into(),
            ));
        }
        let report = session.0.step(demand)?;
        *out_discharge = report.discharge;
        if !out_ratio.is_null() {
            *out_ratio = report.ratio;
        }
        Ok(())
    })
}

/// Inventory left in the session.
///
/// # Safety
/// `session` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pm_session_remaining(session: *const PmSession, out: *mut f64) -> PmStatus {
    guard(|| {
        let session = session.as_ref().ok_or_else(|| null("session"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = session.0.state().remaining(session.0.instance());
        Ok(())
    })
}

/// # Safety
/// `session` must be null or a handle from [`pm_session_new`] that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn pm_session_free(session: *mut PmSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Copies the calling thread's last error message, NUL-terminated, into
/// `buf`. Returns the message length without the terminator, so a caller
/// can size the buffer with a first call passing `len = 0`. Returns 0 when
/// there is no error. If `len` is too small the message is truncated.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Static name of a status code, e.g. `"InvalidInstance"`.
#[no_mangle]
pub extern "C" fn pm_status_name(status: PmStatus) -> *const c_char {
    let name: &'static CStr = match status {
        PmStatus::Ok => c"Ok",
        PmStatus::NullPointer => c"NullPointer",
        PmStatus::InvalidInstance => c"InvalidInstance",
        PmStatus::InvalidArgument => c"InvalidArgument",
        PmStatus::DemandOutOfBounds => c"DemandOutOfBounds",
        PmStatus::SolverFailure => c"SolverFailure",
        PmStatus::SessionFinished => c"SessionFinished",
        PmStatus::Panic => c"Panic",
    };
    name.as_ptr()
}
