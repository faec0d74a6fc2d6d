//! Desk-scale stand-in for the bin: larvae density, sensors, thermal camera
//! and a virtual gantry, so the controller runs closed loop without hardware.
//!
//! All biology parameters are synthetic and exist for closed-loop testing
//! only. Every random draw comes from an explicitly seeded generator.

pub mod gantry;
pub mod scenario;
pub mod sensors;
pub mod substrate;
pub mod thermal;

pub use gantry::{gantry_execute, VirtualGantry};
pub use scenario::{Scenario, ScenarioError};
pub use sensors::{sample_sensors, SensorParams};
pub use substrate::{
    apply_spindle, dispersal_index, mix_along, step_biology, swept_cells, swept_fraction, BiologyParams,
    SubstrateState,
};
pub use thermal::{render_thermal, ThermalParams};

use thiserror::Error;

use crate::controller::GantryError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("time step must be > 0 hours, got {0}")]
    BadTimeStep(f64),
    #[error("dispersal index undefined for zero total mass")]
    ZeroMass,
    #[error(transparent)]
    Gantry(#[from] GantryError),
}
