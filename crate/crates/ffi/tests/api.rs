use std::ffi::{CStr, CString};
use std::ptr;

use smartlid_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(smartlid_last_error()) }.to_string_lossy().into_owned()
}

const MAY_1_0800: i64 = 1_714_550_400;

#[test]
fn kinematics_round_trip() {
    let (mut a, mut b, mut x, mut y) = (0.0, 0.0, 0.0, 0.0);
    assert_eq!(smartlid_cartesian_to_belts(1.0, 1.0, &mut a, &mut b), SmartlidStatus::Ok);
    assert_eq!((a, b), (2.0, 0.0));
    assert_eq!(smartlid_belts_to_cartesian(1.0, 1.0, &mut x, &mut y), SmartlidStatus::Ok);
    assert_eq!((x, y), (1.0, 0.0));
    assert_eq!(smartlid_cartesian_to_belts(1.0, 1.0, ptr::null_mut(), &mut b), SmartlidStatus::NullPointer);
    assert!(last_error().contains("da"));
}

#[test]
fn sizing_and_speed() {
    let mut v = 0.0;
    assert_eq!(smartlid_min_speed(1.92, 60.0, &mut v), SmartlidStatus::Ok);
    assert_eq!(v, 0.032);
    assert_eq!(smartlid_min_speed(1.92, 0.0, &mut v), SmartlidStatus::InvalidArgument);
    assert!(!last_error().is_empty());

    let cfg = smartlid_config_default();
    let mut d = SmartlidDrag { per_finger_force: 0.0, total_force: 0.0, required_torque: 0.0 };
    assert_eq!(smartlid_stokes_drag(cfg, 0.032, &mut d), SmartlidStatus::Ok);
    assert!((d.per_finger_force - 1.131).abs() < 1e-3);
    assert!((d.total_force - 9.048).abs() < 1e-2);
    assert_eq!(last_error(), "");
    assert_eq!(smartlid_stokes_drag(ptr::null(), 0.032, &mut d), SmartlidStatus::NullPointer);
    smartlid_config_free(cfg);
    smartlid_config_free(ptr::null_mut());
}

#[test]
fn otsu_and_mix_report() {
    let mut counts = [0u64; 256];
    counts[10] = 2;
    counts[200] = 2;
    let mut t = 0u8;
    assert_eq!(smartlid_otsu_threshold(counts.as_ptr(), &mut t), SmartlidStatus::Ok);
    assert_eq!(t, 10);
    let flat = [0u64; 256];
    assert_eq!(smartlid_otsu_threshold(flat.as_ptr(), &mut t), SmartlidStatus::Degenerate);

    let mut r = SmartlidMixReport { mixed_pixels: 0, unmixed_pixels: 0, coverage_fraction: 0.0, has_efficacy: false, efficacy_ratio: 0.0 };
    assert_eq!(smartlid_mix_report(101_363, 0, 149_295, &mut r), SmartlidStatus::Ok);
    assert!(r.has_efficacy);
    assert!((r.efficacy_ratio - 0.679).abs() <= 0.001);
    assert_eq!(smartlid_mix_report(84, 16, 0, &mut r), SmartlidStatus::Ok);
    assert!(!r.has_efficacy);
    assert_eq!(r.coverage_fraction, 0.84);
    assert_eq!(smartlid_mix_report(0, 0, 0, &mut r), SmartlidStatus::Degenerate);
}

#[test]
fn config_and_plan() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[bin]\n").unwrap();
    let path = CString::new(bad.to_str().unwrap()).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(smartlid_config_load(path.as_ptr(), &mut cfg), SmartlidStatus::Config);
    assert!(cfg.is_null());

    let shipped = CString::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/config/default.toml")).unwrap();
    assert_eq!(smartlid_config_load(shipped.as_ptr(), &mut cfg), SmartlidStatus::Ok);
    let (mut h, mut m) = (0u8, 0u8);
    assert_eq!(smartlid_config_schedule(cfg, &mut h, &mut m), SmartlidStatus::Ok);
    assert_eq!((h, m), (11, 0));

    let mut p = ptr::null_mut();
    assert_eq!(smartlid_plan(cfg, SmartlidPathMode::Raster, &mut p), SmartlidStatus::Ok);
    let (mut n, mut len, mut speed) = (0usize, 0.0, 0.0);
    assert_eq!(smartlid_path_waypoint_count(p, &mut n), SmartlidStatus::Ok);
    assert_eq!(n, 8);
    assert_eq!(smartlid_path_length(p, &mut len, &mut speed), SmartlidStatus::Ok);
    assert!((len - 1.92).abs() < 1e-9);
    assert!((speed - 0.032).abs() < 1e-12);
    let (mut x, mut y) = (0.0, 0.0);
    assert_eq!(smartlid_path_waypoint(p, 0, &mut x, &mut y), SmartlidStatus::Ok);
    assert_eq!((x, y), (0.03, 0.03));
    assert_eq!(smartlid_path_waypoint(p, 8, &mut x, &mut y), SmartlidStatus::InvalidArgument);
    smartlid_path_free(p);
    smartlid_config_free(cfg);
}

#[test]
fn rig_runs_a_day_and_faults_on_stuck_switches() {
    let mut rig = ptr::null_mut();
    assert_eq!(smartlid_rig_new(ptr::null(), 1, MAY_1_0800, &mut rig), SmartlidStatus::Ok);
    let (mut mode, mut phase) = (SmartlidMode::Fault, SmartlidPhase::Mixing);
    assert_eq!(smartlid_rig_run_until(rig, MAY_1_0800 + 3 * 3600 + 630), SmartlidStatus::Ok);
    assert_eq!(smartlid_rig_state(rig, &mut mode, &mut phase), SmartlidStatus::Ok);
    assert_eq!((mode, phase), (SmartlidMode::Idle, SmartlidPhase::None));
    let mut n = 0usize;
    smartlid_rig_aeration_count(rig, &mut n);
    assert_eq!(n, 1);

    let mut needed = 0usize;
    assert_eq!(smartlid_rig_log_csv(rig, ptr::null_mut(), 0, &mut needed), SmartlidStatus::InvalidArgument);
    let mut buf = vec![0 as std::ffi::c_char; needed];
    assert_eq!(smartlid_rig_log_csv(rig, buf.as_mut_ptr(), buf.len(), &mut needed), SmartlidStatus::Ok);
    let csv = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
    assert!(csv.starts_with("timestamp,temp_c,"));

    assert_eq!(smartlid_rig_set_end_stop_fault(rig, true), SmartlidStatus::Ok);
    assert_eq!(smartlid_rig_aerate(rig), SmartlidStatus::Ok);
    assert_eq!(smartlid_rig_run_until(rig, MAY_1_0800 + 4 * 3600 + 630), SmartlidStatus::Ok);
    smartlid_rig_state(rig, &mut mode, ptr::null_mut());
    assert_eq!(mode, SmartlidMode::Fault);
    assert_eq!(smartlid_rig_aerate(rig), SmartlidStatus::Rejected);
    assert_eq!(last_error(), "controller in FAULT");

    smartlid_rig_set_end_stop_fault(rig, false);
    assert_eq!(smartlid_rig_stop(rig), SmartlidStatus::Ok);
    smartlid_rig_run_until(rig, MAY_1_0800 + 4 * 3600 + 1230);
    smartlid_rig_state(rig, &mut mode, ptr::null_mut());
    assert_eq!(mode, SmartlidMode::Idle);
    smartlid_rig_free(rig);
}
