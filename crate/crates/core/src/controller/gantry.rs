use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planner::Point2;
use crate::trace::TraceEvent;

/// Carriage position, meters. `z` is the plunge depth below the substrate
/// surface, positive down, so `z = 0` is fully retracted.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Pose {
    pub fn xy(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EndStops {
    pub x: bool,
    pub y: bool,
    pub z: bool,
}

impl EndStops {
    /// All three switches closed: the carriage is at home.
    pub fn at_home(&self) -> bool {
        self.x && self.y && self.z
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GantryError {
    #[error("gantry is not homed")]
    NotHomed,
    #[error("target ({x:.4}, {y:.4}, {z:.4}) is outside the mechanical limits")]
    OutOfLimits { x: f64, y: f64, z: f64 },
    #[error("{0} must be > 0")]
    BadSpeed(&'static str),
    #[error("end stop did not trigger at home")]
    EndStopNotReached,
}

/// Motion interface the controller drives. Times are Unix seconds; every
/// motion takes its start time and returns its duration in seconds, so a
/// simulated gantry can run faster than real time while a hardware proxy
/// simply blocks or queues.
pub trait Gantry {
    fn pose(&self) -> Pose;
    fn home_pose(&self) -> Pose;
    fn end_stops(&self) -> EndStops;
    fn is_homed(&self) -> bool;
    fn spindle_spinning(&self) -> bool;

    /// Retracts if needed, then travels to the home corner at rapid speed.
    /// The carriage counts as homed only once the end stops close.
    fn home(&mut self, t: f64) -> Result<f64, GantryError>;
    /// Rapid transit to `at`, then lowers the spindle to `depth`.
    fn plunge(&mut self, t: f64, at: Point2, depth: f64) -> Result<f64, GantryError>;
    fn spin(&mut self, t: f64, on: bool, rate: f64);
    fn move_to(&mut self, t: f64, target: Point2, speed: f64) -> Result<f64, GantryError>;
    fn retract(&mut self, t: f64) -> Result<f64, GantryError>;

    /// Events recorded since the last call.
    fn drain_events(&mut self) -> Vec<TraceEvent>;
}
