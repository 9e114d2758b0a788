//! C ABI over the `chemotaxis` crate.
//!
//! Configurations and trajectories cross the boundary as opaque handles,
//! released with the matching `*_free`. Every fallible call
//! returns a [`ChemoStatus`]; on failure the message is available from
//! [`chemo_last_error`] on the same thread until the next failing call.
//! Panics are caught at the boundary and reported as `CHEMO_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use chemotaxis::cli::{
    identity_lattice, initial_fields, run_certify, run_refine, run_simulate, run_sweep, run_verify_identities,
    snapshot_times, RunConfig, SweepConfig,
};
use chemotaxis::solver::{simulate_with, SimulationOptions, Trajectory};
use chemotaxis::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChemoStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// An argument, grid, field or weight pair was rejected.
    InvalidArgument = 2,
    /// A configuration key failed to parse or validate.
    Config = 3,
    /// The scheme failed: positivity, solver convergence or a non-finite value.
    Numerical = 4,
    /// Reading or writing files failed.
    Io = 5,
    /// An index or buffer length was out of range.
    OutOfRange = 6,
    /// A panic was caught at the boundary.
    Panic = 7,
}

/// Which field of a snapshot to copy out.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChemoField {
    U = 0,
    V = 1,
    W = 2,
}

/// Which runner [`chemo_run`] executes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChemoCommand {
    Simulate = 0,
    Sweep = 1,
    Certify = 2,
    Refine = 3,
}

/// Opaque run configuration.
pub struct ChemoConfig(RunConfig);

/// Opaque simulated trajectory with its snapshots.
pub struct ChemoTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> ChemoStatus {
    match e {
        Error::Config { .. } => ChemoStatus::Config,
        Error::Io(_) => ChemoStatus::Io,
        Error::LinearSolver { .. }
        | Error::Positivity { .. }
        | Error::NonFiniteAccumulator { .. }
        | Error::NonFinite { .. } => ChemoStatus::Numerical,
        _ => ChemoStatus::InvalidArgument,
    }
}

/// Runs `f` with panics caught, recording the message of any failure.
fn guard(f: impl FnOnce() -> Result<(), (ChemoStatus, String)>) -> ChemoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ChemoStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            ChemoStatus::Panic
        }
    }
}

fn lift<T>(r: chemotaxis::Result<T>) -> Result<T, (ChemoStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (ChemoStatus, String) {
    (ChemoStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, (ChemoStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, (ChemoStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (ChemoStatus::InvalidArgument, format!("`{name}` is not UTF-8")))
}

/// Message of the last failure on this thread, or an empty string. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn chemo_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn chemo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn chemo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The built-in canonical configuration.
///
/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn chemo_config_canonical(out: *mut *mut ChemoConfig) -> ChemoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(ChemoConfig(RunConfig::canonical())));
        Ok(())
    })
}

/// Parses configuration text in the `key = value` format of the CLI.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chemo_config_parse(text: *const c_char, out: *mut *mut ChemoConfig) -> ChemoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = lift(RunConfig::parse(read_str(text, "text")?))?;
        *out = Box::into_raw(Box::new(ChemoConfig(cfg)));
        Ok(())
    })
}

/// Serializes every key of `cfg`; release the result with [`chemo_string_free`].
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chemo_config_to_text(cfg: *const ChemoConfig, out: *mut *mut c_char) -> ChemoStatus {
    guard(|| {
        let cfg = borrow(cfg, "cfg")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = CString::new(cfg.0.to_text()).map_err(|e| (ChemoStatus::InvalidArgument, e.to_string()))?;
        *out = s.into_raw();
        Ok(())
    })
}

/// Sets the directory the runners write to.
///
/// # Safety
/// `cfg` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn chemo_config_set_out_dir(cfg: *mut ChemoConfig, dir: *const c_char) -> ChemoStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        cfg.0.out_dir = PathBuf::from(read_str(dir, "dir")?);
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not be freed twice; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn chemo_config_free(cfg: *mut ChemoConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs one CLI command against `cfg`, writing its artifacts to the
/// configured output directory. `passed` receives whether every check passed.
///
/// # Safety
/// `cfg` must be a live handle and `passed` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chemo_run(cfg: *const ChemoConfig, command: ChemoCommand, passed: *mut bool) -> ChemoStatus {
    guard(|| {
        let cfg = &borrow(cfg, "cfg")?.0;
        if passed.is_null() {
            return Err(null("passed"));
        }
        let outcome = lift(match command {
            ChemoCommand::Simulate => run_simulate(cfg),
            ChemoCommand::Sweep => SweepConfig::new(cfg.clone()).and_then(|s| run_sweep(&s)),
            ChemoCommand::Certify => run_certify(cfg),
            ChemoCommand::Refine => run_refine(cfg, cfg.levels),
        })?;
        *passed = outcome.passed;
        Ok(())
    })
}

/// Checks the coefficient identities on the built-in weight lattice.
///
/// # Safety
/// `passed` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chemo_verify_identities(samples: usize, seed: u64, passed: *mut bool) -> ChemoStatus {
    guard(|| {
        if passed.is_null() {
            return Err(null("passed"));
        }
        let outcome = lift(run_verify_identities(&identity_lattice(), samples, seed, None))?;
        *passed = outcome.passed;
        Ok(())
    })
}

/// Simulates `cfg` in memory, keeping snapshots at the output times and the
/// quadrature cadence.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chemo_simulate(cfg: *const ChemoConfig, out: *mut *mut ChemoTrajectory) -> ChemoStatus {
    guard(|| {
        let cfg = &borrow(cfg, "cfg")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let init = lift(initial_fields(cfg, cfg.grid, cfg.params.eps()))?;
        let opts = SimulationOptions {
            output_times: snapshot_times(cfg),
            record_spacetime: false,
        };
        let traj = lift(simulate_with(
            init.into_state(),
            &cfg.params,
            &cfg.solver,
            cfg.t_end,
            &opts,
            &mut [],
        ))?;
        *out = Box::into_raw(Box::new(ChemoTrajectory(traj)));
        Ok(())
    })
}

/// # Safety
/// `traj` must come from this library and not be freed twice; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn chemo_trajectory_free(traj: *mut ChemoTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of snapshots, or 0 for a null handle.
///
/// # Safety
/// `traj` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn chemo_trajectory_snapshot_count(traj: *const ChemoTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.snapshots.len())
}

/// Number of cells per field, or 0 for a null handle.
///
/// # Safety
/// `traj` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn chemo_trajectory_cell_count(traj: *const ChemoTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.grid().len())
}

/// Time of snapshot `index`.
///
/// # Safety
/// `traj` must be a live handle and `time` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chemo_trajectory_time(
    traj: *const ChemoTrajectory,
    index: usize,
    time: *mut f64,
) -> ChemoStatus {
    guard(|| {
        let t = &borrow(traj, "traj")?.0;
        if time.is_null() {
            return Err(null("time"));
        }
        let s = t.snapshots.get(index).ok_or_else(|| {
            (
                ChemoStatus::OutOfRange,
                format!("snapshot {index} of {}", t.snapshots.len()),
            )
        })?;
        *time = s.time;
        Ok(())
    })
}

/// Copies one field of snapshot `index` into `buf`, which must hold at least
/// [`chemo_trajectory_cell_count`] values in row-major cell order.
///
/// # Safety
/// `traj` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn chemo_trajectory_field(
    traj: *const ChemoTrajectory,
    index: usize,
    field: ChemoField,
    buf: *mut f64,
    len: usize,
) -> ChemoStatus {
    guard(|| {
        let t = &borrow(traj, "traj")?.0;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let s = t.snapshots.get(index).ok_or_else(|| {
            (
                ChemoStatus::OutOfRange,
                format!("snapshot {index} of {}", t.snapshots.len()),
            )
        })?;
        let values = match field {
            ChemoField::U => s.u.values(),
            ChemoField::V => s.v.values(),
            ChemoField::W => s.w.values(),
        };
        if len < values.len() {
            return Err((
                ChemoStatus::OutOfRange,
                format!("buffer holds {len} values, need {}", values.len()),
            ));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
        Ok(())
    })
}

/// Final running space-time integrals in the order u^θ, v², |∇w|²,
/// |∇ln(1+v)|², v²|∇w|²/(1+v)², |f_u|, |f_v|, f_u⁺, f_v⁺, f_u, f_v, source,
/// source gap. `buf` must hold 13 values.
///
/// # Safety
/// `traj` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn chemo_trajectory_accumulators(
    traj: *const ChemoTrajectory,
    buf: *mut f64,
    len: usize,
) -> ChemoStatus {
    guard(|| {
        let t = &borrow(traj, "traj")?.0;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let values = t.accumulators.values();
        if len < values.len() {
            return Err((
                ChemoStatus::OutOfRange,
                format!("buffer holds {len} values, need {}", values.len()),
            ));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
        Ok(())
    })
}
