//! CoreXY belt/Cartesian transforms, stepper quantization and the Z lead screw.
//!
//! Both XY motors are fixed to the frame. Belt travels ΔA and ΔB move the
//! carriage by ΔX = (ΔA + ΔB)/2 and ΔY = (ΔA − ΔB)/2, so any nonzero
//! carriage motion turns both motors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BeltDelta {
    pub delta_a: f64,
    pub delta_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CartesianDelta {
    pub delta_x: f64,
    pub delta_y: f64,
}

impl CartesianDelta {
    pub fn new(delta_x: f64, delta_y: f64) -> Self {
        CartesianDelta { delta_x, delta_y }
    }
}

impl std::ops::Add for CartesianDelta {
    type Output = CartesianDelta;
    fn add(self, o: Self) -> Self {
        CartesianDelta::new(self.delta_x + o.delta_x, self.delta_y + o.delta_y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorSpec {
    pub steps_per_rev: u32,
    /// Belt travel per pulley revolution, meters.
    pub pulley_circumference: f64,
    /// Z travel per lead-screw revolution, meters.
    pub lead_screw_pitch: f64,
}

impl MotorSpec {
    /// Belt travel of one full step.
    pub fn step_length(&self) -> f64 {
        self.pulley_circumference / self.steps_per_rev as f64
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum KinematicsError {
    #[error("depth must be ≥ 0, got {0}")]
    NegativeDepth(f64),
}

pub fn belts_to_cartesian(b: BeltDelta) -> CartesianDelta {
    CartesianDelta {
        delta_x: 0.5 * (b.delta_a + b.delta_b),
        delta_y: 0.5 * (b.delta_a - b.delta_b),
    }
}

pub fn cartesian_to_belts(c: CartesianDelta) -> BeltDelta {
    BeltDelta { delta_a: c.delta_x + c.delta_y, delta_b: c.delta_x - c.delta_y }
}

/// Result of quantizing a carriage move onto the two XY steppers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCommand {
    pub steps_a: i64,
    pub steps_b: i64,
    /// Cartesian travel the emitted steps could not represent. Callers carry
    /// it into the next move so rounding never accumulates.
    pub residual: CartesianDelta,
}

/// Quantizes a move to whole motor steps, rounding half away from zero.
pub fn cartesian_to_steps(c: CartesianDelta, m: &MotorSpec) -> StepCommand {
    let step = m.step_length();
    let belts = cartesian_to_belts(c);
    // f64::round is round-half-away-from-zero.
    let steps_a = (belts.delta_a / step).round() as i64;
    let steps_b = (belts.delta_b / step).round() as i64;
    let emitted = belts_to_cartesian(BeltDelta {
        delta_a: steps_a as f64 * step,
        delta_b: steps_b as f64 * step,
    });
    StepCommand {
        steps_a,
        steps_b,
        residual: CartesianDelta::new(c.delta_x - emitted.delta_x, c.delta_y - emitted.delta_y),
    }
}

/// Lead-screw revolutions needed to plunge `depth` meters.
pub fn z_to_turns(depth: f64, m: &MotorSpec) -> Result<f64, KinematicsError> {
    if depth < 0.0 || depth.is_nan() {
        return Err(KinematicsError::NegativeDepth(depth));
    }
    Ok(depth / m.lead_screw_pitch)
}

/// Streams absolute XY targets as step commands, carrying the residual.
#[derive(Debug, Clone)]
pub struct StepStreamer {
    motor: MotorSpec,
    residual: CartesianDelta,
    pub total_steps_a: i64,
    pub total_steps_b: i64,
}

impl StepStreamer {
    pub fn new(motor: MotorSpec) -> Self {
        StepStreamer { motor, residual: CartesianDelta::default(), total_steps_a: 0, total_steps_b: 0 }
    }

    pub fn push(&mut self, delta: CartesianDelta) -> StepCommand {
        let cmd = cartesian_to_steps(delta + self.residual, &self.motor);
        self.residual = cmd.residual;
        self.total_steps_a += cmd.steps_a;
        self.total_steps_b += cmd.steps_b;
        cmd
    }

    pub fn residual(&self) -> CartesianDelta {
        self.residual
    }
}
