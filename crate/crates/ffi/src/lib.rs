//! C ABI over the smartlid library.
//!
//! Every fallible function returns a `SmartlidStatus`; on anything other
//! than `SMARTLID_STATUS_OK` a message is available from
//! `smartlid_last_error()` on the same thread. Handles are opaque and must be
//! released with their matching `*_free` function. Passing NULL to a free
//! function is a no-op.

// Entry points are called from C, where `unsafe` on the signature means nothing;
// pointer validity is part of each function's documented contract instead.
#![allow(clippy::not_unsafe_ptr_arg_deref)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use smartlid::controller::{AerationPhase, Command, Mode};
use smartlid::kinematics::{belts_to_cartesian, cartesian_to_belts, BeltDelta, CartesianDelta};
use smartlid::model::{load_config, Config, PathMode};
use smartlid::planner::{min_speed, path_length, plan_for_config, stokes_drag, ToolPath};
use smartlid::runtime::BenchRig;
use smartlid::sim::Scenario;
use smartlid::vision::{mix_report, otsu_threshold, Histogram256};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmartlidStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Config or file could not be read or parsed.
    Config = 3,
    /// No answer exists for the input, e.g. Otsu on a one-value histogram.
    Degenerate = 4,
    /// The controller refused the command (AERATE_NOW while in FAULT).
    Rejected = 5,
    Simulation = 6,
    /// A Rust panic was caught at the boundary.
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmartlidMode {
    Idle = 0,
    Aerating = 1,
    Sensing = 2,
    Fault = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmartlidPhase {
    None = 0,
    Homing = 1,
    Plunging = 2,
    Mixing = 3,
    Retracting = 4,
    Returning = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmartlidPathMode {
    Raster = 0,
    Spiral = 1,
    Targeted = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmartlidMixReport {
    pub mixed_pixels: u64,
    pub unmixed_pixels: u64,
    pub coverage_fraction: f64,
    pub has_efficacy: bool,
    /// Meaningful only when `has_efficacy` is true.
    pub efficacy_ratio: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmartlidDrag {
    /// N
    pub per_finger_force: f64,
    /// N
    pub total_force: f64,
    /// N·m
    pub required_torque: f64,
}

/// Opaque lid configuration.
pub struct SmartlidConfig {
    inner: Config,
}

/// Opaque planned tool path.
pub struct SmartlidPath {
    inner: ToolPath,
}

/// Opaque controller running against the simulated bin.
pub struct SmartlidRig {
    inner: BenchRig,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

type Failure = (SmartlidStatus, String);

fn fail(status: SmartlidStatus, msg: impl Into<String>) -> Failure {
    (status, msg.into())
}

/// Runs `f`, records any error message and turns panics into `Internal`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SmartlidStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SmartlidStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside smartlid");
            SmartlidStatus::Internal
        }
    }
}

fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: callers pass either NULL or a valid, aligned, writable pointer.
    unsafe { p.as_mut() }.ok_or_else(|| fail(SmartlidStatus::NullPointer, format!("{name} is NULL")))
}

fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    // SAFETY: non-NULL handles come from this library and are still live.
    unsafe { p.as_ref() }.ok_or_else(|| fail(SmartlidStatus::NullPointer, format!("{name} is NULL")))
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    fail(SmartlidStatus::InvalidArgument, e.to_string())
}

/// Message for the last failed call on this thread, or "" after a success.
/// The pointer stays valid until the next smartlid call on this thread.
#[no_mangle]
pub extern "C" fn smartlid_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn smartlid_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---- kinematics and sizing ----

/// ΔA = ΔX + ΔY, ΔB = ΔX − ΔY.
#[no_mangle]
pub extern "C" fn smartlid_cartesian_to_belts(dx: f64, dy: f64, da: *mut f64, db: *mut f64) -> SmartlidStatus {
    guard(|| {
        let b = cartesian_to_belts(CartesianDelta::new(dx, dy));
        *out(da, "da")? = b.delta_a;
        *out(db, "db")? = b.delta_b;
        Ok(())
    })
}

/// ΔX = (ΔA + ΔB)/2, ΔY = (ΔA − ΔB)/2.
#[no_mangle]
pub extern "C" fn smartlid_belts_to_cartesian(da: f64, db: f64, dx: *mut f64, dy: *mut f64) -> SmartlidStatus {
    guard(|| {
        let c = belts_to_cartesian(BeltDelta { delta_a: da, delta_b: db });
        *out(dx, "dx")? = c.delta_x;
        *out(dy, "dy")? = c.delta_y;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn smartlid_min_speed(length_m: f64, time_budget_s: f64, speed: *mut f64) -> SmartlidStatus {
    guard(|| {
        *out(speed, "speed")? = min_speed(length_m, time_budget_s).map_err(invalid)?;
        Ok(())
    })
}

/// Stokes drag on the configured spindle at `speed_m_s`.
#[no_mangle]
pub extern "C" fn smartlid_stokes_drag(
    config: *const SmartlidConfig,
    speed_m_s: f64,
    drag: *mut SmartlidDrag,
) -> SmartlidStatus {
    guard(|| {
        let cfg = &handle(config, "config")?.inner;
        let d = stokes_drag(&cfg.rheology, &cfg.spindle, speed_m_s).map_err(invalid)?;
        *out(drag, "drag")? = SmartlidDrag {
            per_finger_force: d.per_finger_force,
            total_force: d.total_force,
            required_torque: d.required_torque,
        };
        Ok(())
    })
}

// ---- vision metrics ----

/// Otsu threshold of a 256-bin histogram; class 0 is `<= threshold`.
#[no_mangle]
pub extern "C" fn smartlid_otsu_threshold(counts: *const u64, threshold: *mut u8) -> SmartlidStatus {
    guard(|| {
        if counts.is_null() {
            return Err(fail(SmartlidStatus::NullPointer, "counts is NULL"));
        }
        let mut h = [0u64; 256];
        // SAFETY: the caller provides 256 readable counts.
        h.copy_from_slice(unsafe { std::slice::from_raw_parts(counts, 256) });
        let t = otsu_threshold(&Histogram256::from_counts(h)).map_err(|e| fail(SmartlidStatus::Degenerate, e.to_string()))?;
        *out(threshold, "threshold")? = t;
        Ok(())
    })
}

/// Pass `baseline_mixed = 0` when there is no manual baseline.
#[no_mangle]
pub extern "C" fn smartlid_mix_report(
    mixed: u64,
    unmixed: u64,
    baseline_mixed: u64,
    report: *mut SmartlidMixReport,
) -> SmartlidStatus {
    guard(|| {
        let baseline = (baseline_mixed > 0).then_some(baseline_mixed);
        let r = mix_report(mixed, unmixed, baseline).map_err(|e| fail(SmartlidStatus::Degenerate, e.to_string()))?;
        *out(report, "report")? = SmartlidMixReport {
            mixed_pixels: r.mixed_pixels,
            unmixed_pixels: r.unmixed_pixels,
            coverage_fraction: r.coverage_fraction,
            has_efficacy: r.efficacy_ratio.is_some(),
            efficacy_ratio: r.efficacy_ratio.unwrap_or(0.0),
        };
        Ok(())
    })
}

// ---- config ----

fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(SmartlidStatus::NullPointer, format!("{name} is NULL")));
    }
    // SAFETY: non-NULL and NUL-terminated per the API contract.
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| invalid(format!("{name} is not UTF-8")))
}

/// The shipped configuration. Never fails.
#[no_mangle]
pub extern "C" fn smartlid_config_default() -> *mut SmartlidConfig {
    Box::into_raw(Box::new(SmartlidConfig { inner: Config::shipped() }))
}

/// Loads and validates a TOML config file.
#[no_mangle]
pub extern "C" fn smartlid_config_load(path: *const c_char, config: *mut *mut SmartlidConfig) -> SmartlidStatus {
    guard(|| {
        let slot = out(config, "config")?;
        *slot = std::ptr::null_mut();
        let path = c_str(path, "path")?;
        let cfg = load_config(Path::new(path)).map_err(|e| fail(SmartlidStatus::Config, e.to_string()))?;
        *slot = Box::into_raw(Box::new(SmartlidConfig { inner: cfg }));
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn smartlid_config_free(config: *mut SmartlidConfig) {
    if !config.is_null() {
        // SAFETY: allocated by this library and not freed before.
        drop(unsafe { Box::from_raw(config) });
    }
}

/// Daily aeration time of the config, local hours and minutes.
#[no_mangle]
pub extern "C" fn smartlid_config_schedule(config: *const SmartlidConfig, hour: *mut u8, minute: *mut u8) -> SmartlidStatus {
    guard(|| {
        let t = handle(config, "config")?.inner.schedule.aeration_time;
        *out(hour, "hour")? = t.hour;
        *out(minute, "minute")? = t.minute;
        Ok(())
    })
}

// ---- planning ----

fn path_mode(m: SmartlidPathMode) -> PathMode {
    match m {
        SmartlidPathMode::Raster => PathMode::Raster,
        SmartlidPathMode::Spiral => PathMode::Spiral,
        SmartlidPathMode::Targeted => PathMode::Targeted,
    }
}

/// Plans one aeration pass. Targeted mode without a thermal frame falls
/// back to raster.
#[no_mangle]
pub extern "C" fn smartlid_plan(
    config: *const SmartlidConfig,
    mode: SmartlidPathMode,
    path: *mut *mut SmartlidPath,
) -> SmartlidStatus {
    guard(|| {
        let slot = out(path, "path")?;
        *slot = std::ptr::null_mut();
        let cfg = &handle(config, "config")?.inner;
        let p = plan_for_config(cfg, path_mode(mode), None).map_err(invalid)?;
        *slot = Box::into_raw(Box::new(SmartlidPath { inner: p }));
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn smartlid_path_free(path: *mut SmartlidPath) {
    if !path.is_null() {
        // SAFETY: allocated by this library and not freed before.
        drop(unsafe { Box::from_raw(path) });
    }
}

#[no_mangle]
pub extern "C" fn smartlid_path_waypoint_count(path: *const SmartlidPath, count: *mut usize) -> SmartlidStatus {
    guard(|| {
        *out(count, "count")? = handle(path, "path")?.inner.waypoints.len();
        Ok(())
    })
}

/// Waypoint `index` in meters.
#[no_mangle]
pub extern "C" fn smartlid_path_waypoint(path: *const SmartlidPath, index: usize, x: *mut f64, y: *mut f64) -> SmartlidStatus {
    guard(|| {
        let p = handle(path, "path")?;
        let w = p
            .inner
            .waypoints
            .get(index)
            .ok_or_else(|| invalid(format!("index {index} out of range ({} waypoints)", p.inner.waypoints.len())))?;
        *out(x, "x")? = w.x;
        *out(y, "y")? = w.y;
        Ok(())
    })
}

/// Total polyline length, m, and the travel speed assigned by the planner, m/s.
#[no_mangle]
pub extern "C" fn smartlid_path_length(path: *const SmartlidPath, length_m: *mut f64, speed_m_s: *mut f64) -> SmartlidStatus {
    guard(|| {
        let p = &handle(path, "path")?.inner;
        *out(length_m, "length_m")? = path_length(p);
        if !speed_m_s.is_null() {
            *out(speed_m_s, "speed_m_s")? = p.travel_speed;
        }
        Ok(())
    })
}

// ---- controller on the simulated bin ----

/// Boots a controller on a simulated bin at `start_unix_s`. `config` may be
/// NULL for the shipped configuration; it is copied, not retained.
#[no_mangle]
pub extern "C" fn smartlid_rig_new(
    config: *const SmartlidConfig,
    seed: u64,
    start_unix_s: i64,
    rig: *mut *mut SmartlidRig,
) -> SmartlidStatus {
    guard(|| {
        let slot = out(rig, "rig")?;
        *slot = std::ptr::null_mut();
        let mut scenario = Scenario::reference(seed, 1);
        if !config.is_null() {
            scenario.config = handle(config, "config")?.inner.clone();
        }
        scenario.start = chrono::DateTime::from_timestamp(start_unix_s, 0).ok_or_else(|| invalid("start_unix_s out of range"))?;
        *slot = Box::into_raw(Box::new(SmartlidRig { inner: BenchRig::new(scenario) }));
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn smartlid_rig_free(rig: *mut SmartlidRig) {
    if !rig.is_null() {
        // SAFETY: allocated by this library and not freed before.
        drop(unsafe { Box::from_raw(rig) });
    }
}

fn rig_mut<'a>(rig: *mut SmartlidRig) -> Result<&'a mut BenchRig, Failure> {
    Ok(&mut out(rig, "rig")?.inner)
}

/// Advances the simulation to `unix_s`, ticking the controller as often as
/// it needs. Earlier times are ignored.
#[no_mangle]
pub extern "C" fn smartlid_rig_run_until(rig: *mut SmartlidRig, unix_s: i64) -> SmartlidStatus {
    guard(|| {
        let r = rig_mut(rig)?;
        let until = chrono::DateTime::from_timestamp(unix_s, 0).ok_or_else(|| invalid("unix_s out of range"))?;
        if until > r.now() {
            r.run_until(until).map_err(|e| fail(SmartlidStatus::Simulation, e.to_string()))?;
        }
        Ok(())
    })
}

/// Queues AERATE_NOW. Rejected while the controller is in FAULT.
#[no_mangle]
pub extern "C" fn smartlid_rig_aerate(rig: *mut SmartlidRig) -> SmartlidStatus {
    guard(|| {
        let r = rig_mut(rig)?;
        if r.controller.mode() == Mode::Fault {
            return Err(fail(SmartlidStatus::Rejected, "controller in FAULT"));
        }
        r.commands.push_back(Command::AerateNow);
        Ok(())
    })
}

/// Queues STOP: retract and return during an aeration, recovery from FAULT.
#[no_mangle]
pub extern "C" fn smartlid_rig_stop(rig: *mut SmartlidRig) -> SmartlidStatus {
    guard(|| {
        rig_mut(rig)?.commands.push_back(Command::Stop);
        Ok(())
    })
}

/// Makes the simulated end-stop switches stick open (true) or work (false).
#[no_mangle]
pub extern "C" fn smartlid_rig_set_end_stop_fault(rig: *mut SmartlidRig, stuck: bool) -> SmartlidStatus {
    guard(|| {
        rig_mut(rig)?.controller.gantry_mut().end_stop_fault = stuck;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn smartlid_rig_state(rig: *const SmartlidRig, mode: *mut SmartlidMode, phase: *mut SmartlidPhase) -> SmartlidStatus {
    guard(|| {
        let c = &handle(rig, "rig")?.inner.controller;
        *out(mode, "mode")? = match c.mode() {
            Mode::Idle => SmartlidMode::Idle,
            Mode::Aerating => SmartlidMode::Aerating,
            Mode::Sensing => SmartlidMode::Sensing,
            Mode::Fault => SmartlidMode::Fault,
        };
        if !phase.is_null() {
            *out(phase, "phase")? = match c.phase() {
                AerationPhase::None => SmartlidPhase::None,
                AerationPhase::Homing => SmartlidPhase::Homing,
                AerationPhase::Plunging => SmartlidPhase::Plunging,
                AerationPhase::Mixing => SmartlidPhase::Mixing,
                AerationPhase::Retracting => SmartlidPhase::Retracting,
                AerationPhase::Returning => SmartlidPhase::Returning,
            };
        }
        Ok(())
    })
}

/// Number of aerations started since boot.
#[no_mangle]
pub extern "C" fn smartlid_rig_aeration_count(rig: *const SmartlidRig, count: *mut usize) -> SmartlidStatus {
    guard(|| {
        *out(count, "count")? = handle(rig, "rig")?.inner.start_count();
        Ok(())
    })
}

/// Copies the CSV sensor log into `buf` (NUL-terminated) when it fits.
/// `needed` always receives the size including the NUL; a too-small buffer
/// gives `InvalidArgument` and leaves `buf` untouched. `buf` may be NULL
/// with `cap` 0 to query the size.
#[no_mangle]
pub extern "C" fn smartlid_rig_log_csv(rig: *const SmartlidRig, buf: *mut c_char, cap: usize, needed: *mut usize) -> SmartlidStatus {
    guard(|| {
        let text = &handle(rig, "rig")?.inner.logger.sink().text;
        let n = text.len() + 1;
        *out(needed, "needed")? = n;
        if cap < n || buf.is_null() {
            return Err(invalid(format!("buffer holds {cap} bytes, log needs {n}")));
        }
        // SAFETY: buf has at least cap >= n writable bytes.
        unsafe {
            std::ptr::copy_nonoverlapping(text.as_ptr(), buf.cast(), text.len());
            *buf.add(text.len()) = 0;
        }
        Ok(())
    })
}
