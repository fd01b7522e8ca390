//! C ABI over `jetflow`.
//!
//! Systems and trajectories are opaque heap handles released with their
//! `_free` function. Every fallible call returns a [`JetflowStatus`]; on
//! failure [`jetflow_last_error`] describes the error for the calling thread.
//! Strings returned through out-parameters are owned by the caller and must
//! be released with [`jetflow_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use jetflow::config::{self, RunConfig};
use jetflow::{audit, hamiltonian, integrate, Error, Scheme, SystemState, Trajectory};

/// Result codes shared by all fallible functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetflowStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Divergence = 4,
    OutOfRange = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// A validated particle system.
pub struct JetflowSystem(SystemState);

/// An integrated trajectory with a snapshot per step.
pub struct JetflowTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

struct Failure(JetflowStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Divergence { .. } | Error::ProbeDivergence { .. } => JetflowStatus::Divergence,
            Error::IndexOutOfRange { .. } => JetflowStatus::OutOfRange,
            _ => JetflowStatus::InvalidInput,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(JetflowStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> JetflowStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            JetflowStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            JetflowStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(JetflowStatus::InvalidUtf8, format!("{what}: {e}")))
}

fn give_string(s: String, dst: &mut *mut c_char) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|e| Failure(JetflowStatus::InvalidInput, e.to_string()))?;
    *dst = c.into_raw();
    Ok(())
}

fn copy_out(src: &[f64], buf: *mut f64, len: usize, needed: *mut usize) -> Result<(), Failure> {
    if let Some(n) = unsafe { needed.as_mut() } {
        *n = src.len();
    }
    if buf.is_null() && len == 0 {
        return Ok(());
    }
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len < src.len() {
        return Err(Failure(
            JetflowStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len()) };
    Ok(())
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call into this library on the thread.
#[no_mangle]
pub extern "C" fn jetflow_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn jetflow_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a system from a JSON run configuration. `seed` may be null; when
/// given, particles without momenta receive seeded random momenta.
///
/// # Safety
/// `config_json` must be a NUL-terminated string, `seed` null or valid, and
/// `out_system` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jetflow_system_from_json(
    config_json: *const c_char,
    seed: *const u64,
    out_system: *mut *mut JetflowSystem,
) -> JetflowStatus {
    guard(|| {
        let dst = out(out_system, "out_system")?;
        *dst = ptr::null_mut();
        let cfg = RunConfig::from_json(text(config_json, "config_json")?)?;
        let state = cfg.build_state(seed.as_ref().copied())?;
        *dst = Box::into_raw(Box::new(JetflowSystem(state)));
        Ok(())
    })
}

/// # Safety
/// `system` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn jetflow_system_free(system: *mut JetflowSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Spatial dimension, jet order and particle count.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn jetflow_system_shape(
    system: *const JetflowSystem,
    dim: *mut usize,
    order: *mut usize,
    particles: *mut usize,
) -> JetflowStatus {
    guard(|| {
        let s = &borrow(system, "system")?.0;
        *out(dim, "dim")? = s.dim();
        *out(order, "order")? = s.order().as_usize();
        *out(particles, "particles")? = s.len();
        Ok(())
    })
}

/// # Safety
/// `system` and `value` must be valid.
#[no_mangle]
pub unsafe extern "C" fn jetflow_system_hamiltonian(system: *const JetflowSystem, value: *mut f64) -> JetflowStatus {
    guard(|| {
        let s = &borrow(system, "system")?.0;
        *out(value, "value")? = hamiltonian(s);
        Ok(())
    })
}

/// Packed canonical coordinates, per particle `[q, g, s, pi_q, pi_g, pi_s]`
/// row-major. `needed` (may be null) receives the length; pass a null
/// `buffer` with `len = 0` to query it.
///
/// # Safety
/// `buffer` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn jetflow_system_coordinates(
    system: *const JetflowSystem,
    buffer: *mut f64,
    len: usize,
    needed: *mut usize,
) -> JetflowStatus {
    guard(|| copy_out(&borrow(system, "system")?.0.coordinates(), buffer, len, needed))
}

/// Integrates with fixed-step RK4.
///
/// # Safety
/// `system` and `out_trajectory` must be valid.
#[no_mangle]
pub unsafe extern "C" fn jetflow_integrate(
    system: *const JetflowSystem,
    t_final: f64,
    dt: f64,
    out_trajectory: *mut *mut JetflowTrajectory,
) -> JetflowStatus {
    guard(|| {
        let dst = out(out_trajectory, "out_trajectory")?;
        *dst = ptr::null_mut();
        let traj = integrate(&borrow(system, "system")?.0, t_final, dt, Scheme::Rk4)?;
        *dst = Box::into_raw(Box::new(JetflowTrajectory(traj)));
        Ok(())
    })
}

/// # Safety
/// `trajectory` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn jetflow_trajectory_free(trajectory: *mut JetflowTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}

/// Number of snapshots, 0 for a null handle.
///
/// # Safety
/// `trajectory` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn jetflow_trajectory_len(trajectory: *const JetflowTrajectory) -> usize {
    trajectory.as_ref().map_or(0, |t| t.0.len())
}

fn snapshot(t: &Trajectory, step: usize) -> Result<&SystemState, Failure> {
    t.states.get(step).ok_or_else(|| {
        Failure(
            JetflowStatus::OutOfRange,
            format!("step {step} out of range for {} snapshots", t.len()),
        )
    })
}

/// # Safety
/// `trajectory` and `time` must be valid.
#[no_mangle]
pub unsafe extern "C" fn jetflow_trajectory_time(
    trajectory: *const JetflowTrajectory,
    step: usize,
    time: *mut f64,
) -> JetflowStatus {
    guard(|| {
        let t = &borrow(trajectory, "trajectory")?.0;
        snapshot(t, step)?;
        *out(time, "time")? = t.times[step];
        Ok(())
    })
}

/// Position of one particle at one snapshot.
///
/// # Safety
/// `buffer` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn jetflow_trajectory_position(
    trajectory: *const JetflowTrajectory,
    step: usize,
    particle: usize,
    buffer: *mut f64,
    len: usize,
) -> JetflowStatus {
    guard(|| {
        let state = snapshot(&borrow(trajectory, "trajectory")?.0, step)?;
        copy_out(state.particle(particle)?.q(), buffer, len, ptr::null_mut())
    })
}

/// Copies one snapshot into a new system handle.
///
/// # Safety
/// `trajectory` and `out_system` must be valid.
#[no_mangle]
pub unsafe extern "C" fn jetflow_trajectory_state(
    trajectory: *const JetflowTrajectory,
    step: usize,
    out_system: *mut *mut JetflowSystem,
) -> JetflowStatus {
    guard(|| {
        let dst = out(out_system, "out_system")?;
        *dst = ptr::null_mut();
        let state = snapshot(&borrow(trajectory, "trajectory")?.0, step)?.clone();
        *dst = Box::into_raw(Box::new(JetflowSystem(state)));
        Ok(())
    })
}

/// Trajectory JSON as written by `jetflow shoot`.
///
/// # Safety
/// `trajectory` and `out_json` must be valid.
#[no_mangle]
pub unsafe extern "C" fn jetflow_trajectory_to_json(
    trajectory: *const JetflowTrajectory,
    out_json: *mut *mut c_char,
) -> JetflowStatus {
    guard(|| {
        let dst = out(out_json, "out_json")?;
        *dst = ptr::null_mut();
        give_string(config::trajectory_json(&borrow(trajectory, "trajectory")?.0), dst)
    })
}

/// Invariant drift report JSON as written by `jetflow check`.
///
/// # Safety
/// `trajectory` and `out_json` must be valid.
#[no_mangle]
pub unsafe extern "C" fn jetflow_trajectory_audit_json(
    trajectory: *const JetflowTrajectory,
    out_json: *mut *mut c_char,
) -> JetflowStatus {
    guard(|| {
        let dst = out(out_json, "out_json")?;
        *dst = ptr::null_mut();
        let report = audit(&borrow(trajectory, "trajectory")?.0)?;
        give_string(config::report_json(&report), dst)
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn jetflow_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
