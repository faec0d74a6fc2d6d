pub mod controller;
pub mod kinematics;
pub mod model;
pub mod planner;
pub mod runtime;
pub mod sim;
pub mod telemetry;
pub mod trace;
pub mod vision;
