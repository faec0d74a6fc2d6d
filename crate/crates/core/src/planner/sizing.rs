//! Stokes-drag sizing of the spindle and the XY/spindle stepper check.

use std::f64::consts::PI;

use serde::Serialize;

use super::PlanError;
use crate::model::{SpindleSpec, SubstrateRheology};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DragEstimate {
    pub per_finger_force: f64,
    pub total_force: f64,
    pub required_torque: f64,
}

/// Drag on each finger modelled as a sphere of the finger radius moving at
/// `v` through the substrate: F = 6π·μ·R·v. Torque sums each finger's force
/// times its radial offset.
pub fn stokes_drag(r: &SubstrateRheology, s: &SpindleSpec, v: f64) -> Result<DragEstimate, PlanError> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(PlanError::NonPositive("speed"));
    }
    let per_finger_force = 6.0 * PI * r.dynamic_viscosity * s.finger_radius * v;
    Ok(DragEstimate {
        per_finger_force,
        total_force: s.finger_count as f64 * per_finger_force,
        required_torque: s.finger_offsets.iter().map(|o| per_finger_force * o).sum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub required_torque: f64,
    pub holding_torque: f64,
    pub safety_factor: f64,
    /// `safety_factor * holding_torque`.
    pub usable_torque: f64,
    pub pass: bool,
}

pub fn motor_feasibility(d: &DragEstimate, holding_torque: f64, safety_factor: f64) -> FeasibilityReport {
    let usable_torque = safety_factor * holding_torque;
    FeasibilityReport {
        required_torque: d.required_torque,
        holding_torque,
        safety_factor,
        usable_torque,
        pass: d.required_torque <= usable_torque,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spindle() -> SpindleSpec {
        SpindleSpec {
            finger_count: 8,
            finger_radius: 0.0075,
            finger_offsets: vec![0.026, 0.026, 0.006, 0.006, 0.006, 0.004, 0.004, 0.004],
            spin_rate: 1.0,
            plunge_depth: 0.04,
        }
    }

    fn drag(required_torque: f64) -> DragEstimate {
        DragEstimate { per_finger_force: 0.0, total_force: 0.0, required_torque }
    }

    #[test]
    fn peanut_butter_at_32mm_per_s() {
        let mu = SubstrateRheology { dynamic_viscosity: 250.0 };
        let d = stokes_drag(&mu, &spindle(), 0.032).unwrap();
        // 6π · 250 · 0.0075 · 0.032 = 0.36π
        assert!((d.per_finger_force - 1.131).abs() < 0.001, "{}", d.per_finger_force);
        assert!((d.total_force - 9.048).abs() < 0.01, "{}", d.total_force);
        assert!((d.total_force - 8.0 * d.per_finger_force).abs() < 1e-12);
        assert!((d.required_torque - d.per_finger_force * 0.082).abs() < 1e-12);
    }

    #[test]
    fn zero_speed_is_zero_drag() {
        let mu = SubstrateRheology { dynamic_viscosity: 250.0 };
        let d = stokes_drag(&mu, &spindle(), 0.0).unwrap();
        assert_eq!((d.per_finger_force, d.total_force, d.required_torque), (0.0, 0.0, 0.0));
        assert!(stokes_drag(&mu, &spindle(), -0.1).is_err());
    }

    #[test]
    fn linear_in_each_factor() {
        let s = spindle();
        let base = stokes_drag(&SubstrateRheology { dynamic_viscosity: 250.0 }, &s, 0.02).unwrap().per_finger_force;
        let mu2 = stokes_drag(&SubstrateRheology { dynamic_viscosity: 500.0 }, &s, 0.02).unwrap().per_finger_force;
        let v2 = stokes_drag(&SubstrateRheology { dynamic_viscosity: 250.0 }, &s, 0.04).unwrap().per_finger_force;
        let mut s2 = s.clone();
        s2.finger_radius *= 2.0;
        let r2 = stokes_drag(&SubstrateRheology { dynamic_viscosity: 250.0 }, &s2, 0.02).unwrap().per_finger_force;
        for doubled in [mu2, v2, r2] {
            assert!((doubled - 2.0 * base).abs() < 1e-12 * base.max(1.0));
        }
    }

    #[test]
    fn feasibility_threshold() {
        assert!(motor_feasibility(&drag(0.05), 0.20, 0.5).pass);
        assert!(!motor_feasibility(&drag(0.15), 0.20, 0.5).pass);
        assert!(motor_feasibility(&drag(0.0), 0.20, 0.5).pass);
    }
}
