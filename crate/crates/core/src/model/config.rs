//! TOML configuration document. The schema is documented in
//! `docs/config.md`; the shipped defaults live in `config/default.toml`.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::units::{Dimension, Quantity};
use super::{BinGeometry, SpindleSpec, SubstrateRheology};
use crate::controller::DailyTime;
use crate::kinematics::MotorSpec;

pub const DEFAULT_CONFIG: &str = include_str!("../../config/default.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config schema violation: {0}")]
    Schema(String),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

impl ConfigError {
    fn invalid(field: &str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid { field: field.to_string(), reason: reason.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PathMode {
    Raster,
    Spiral,
    Targeted,
}

impl std::str::FromStr for PathMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "raster" => Ok(PathMode::Raster),
            "spiral" => Ok(PathMode::Spiral),
            "targeted" => Ok(PathMode::Targeted),
            other => Err(format!("unknown path mode {other:?}")),
        }
    }
}

impl std::fmt::Display for PathMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PathMode::Raster => "raster",
            PathMode::Spiral => "spiral",
            PathMode::Targeted => "targeted",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSettings {
    pub aeration_time: DailyTime,
    /// Offset of the local clock from UTC; calendar days are local days.
    pub utc_offset_minutes: i32,
    pub sensor_interval_s: u32,
    pub end_stop_timeout_s: f64,
    /// Time allowed for one aeration pass; sets the travel speed.
    pub time_budget_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerSettings {
    pub mode: PathMode,
    pub raster_pitch: f64,
    pub spiral_radius: f64,
    pub spiral_turns: u32,
    /// Radius constant for targeted spirals: radius = k * sqrt(area_px) * pixel_pitch.
    pub targeted_k: f64,
    pub safety_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisionSettings {
    pub t_lo: f64,
    pub t_hi: f64,
    pub min_component_area: u32,
    /// Inter-frame intensity change (0..=255) above which a pixel counts as mixed.
    pub mix_delta: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GantrySettings {
    /// Lead-screw plunge/retract speed, m/s.
    pub z_speed: f64,
    /// Retracted travel speed used for homing and transits, m/s.
    pub rapid_speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub bin: BinGeometry,
    pub spindle: SpindleSpec,
    pub rheology: SubstrateRheology,
    pub motor: MotorSpec,
    /// Stepper holding torque, N·m.
    pub holding_torque: f64,
    pub gantry: GantrySettings,
    pub schedule: ScheduleSettings,
    pub planner: PlannerSettings,
    pub vision: VisionSettings,
}

impl Config {
    /// The configuration shipped with the crate.
    pub fn shipped() -> Config {
        parse_config(DEFAULT_CONFIG).expect("shipped config is valid")
    }
}

impl Default for Config {
    fn default() -> Self {
        Config::shipped()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    bin: RawBin,
    spindle: RawSpindle,
    substrate: RawSubstrate,
    motor: RawMotor,
    #[serde(default)]
    schedule: RawSchedule,
    #[serde(default)]
    planner: RawPlanner,
    #[serde(default)]
    vision: RawVision,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBin {
    x_len: Quantity,
    y_len: Quantity,
    z_depth: Quantity,
    margin: Quantity,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpindle {
    finger_count: i64,
    finger_radius: Quantity,
    finger_offsets: Vec<Quantity>,
    spin_rate: f64,
    plunge_depth: Quantity,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSubstrate {
    viscosity: Quantity,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMotor {
    steps_per_rev: i64,
    pulley_circumference: Quantity,
    lead_screw_pitch: Quantity,
    holding_torque: Quantity,
    #[serde(default = "default_z_speed")]
    z_speed: Quantity,
    #[serde(default = "default_rapid_speed")]
    rapid_speed: Quantity,
}

fn default_z_speed() -> Quantity {
    Quantity::Number(0.01)
}

fn default_rapid_speed() -> Quantity {
    Quantity::Number(0.05)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSchedule {
    aeration_time: String,
    utc_offset_minutes: i32,
    sensor_interval_s: u32,
    end_stop_timeout_s: f64,
    time_budget_s: f64,
}

impl Default for RawSchedule {
    fn default() -> Self {
        RawSchedule {
            aeration_time: "11:00".into(),
            utc_offset_minutes: 0,
            sensor_interval_s: 300,
            end_stop_timeout_s: 120.0,
            time_budget_s: 60.0,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawPlanner {
    mode: PathMode,
    raster_pitch: Quantity,
    spiral_radius: Quantity,
    spiral_turns: u32,
    targeted_k: f64,
    safety_factor: f64,
}

impl Default for RawPlanner {
    fn default() -> Self {
        RawPlanner {
            mode: PathMode::Raster,
            raster_pitch: Quantity::Number(0.08),
            spiral_radius: Quantity::Number(0.05),
            spiral_turns: 3,
            targeted_k: 1.0,
            safety_factor: 0.5,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawVision {
    t_lo: f64,
    t_hi: f64,
    min_component_area: u32,
    mix_delta: u8,
}

impl Default for RawVision {
    fn default() -> Self {
        RawVision { t_lo: 20.0, t_hi: 45.0, min_component_area: 25, mix_delta: 4 }
    }
}

fn si(q: &Quantity, dim: Dimension, field: &str) -> Result<f64, ConfigError> {
    let v = q.to_si(dim).map_err(|e| ConfigError::invalid(field, e))?;
    if !v.is_finite() {
        return Err(ConfigError::invalid(field, "value must be finite"));
    }
    Ok(v)
}

fn positive(v: f64, field: &str) -> Result<f64, ConfigError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::invalid(field, format!("{} must be > 0", leaf(field))))
    }
}

fn leaf(field: &str) -> &str {
    field.rsplit('.').next().unwrap_or(field)
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Schema(e.message().to_string()))?;

    let bin = BinGeometry {
        x_len: si(&raw.bin.x_len, Dimension::Length, "bin.x_len")?,
        y_len: si(&raw.bin.y_len, Dimension::Length, "bin.y_len")?,
        z_depth: si(&raw.bin.z_depth, Dimension::Length, "bin.z_depth")?,
        margin: si(&raw.bin.margin, Dimension::Length, "bin.margin")?,
    };
    bin.validate().map_err(|e| {
        let field = e.split_whitespace().next().unwrap_or("bin").to_string();
        ConfigError::invalid(&format!("bin.{field}"), e)
    })?;

    if raw.spindle.finger_count < 1 {
        return Err(ConfigError::invalid("spindle.finger_count", "finger_count must be ≥ 1"));
    }
    let finger_offsets = raw
        .spindle
        .finger_offsets
        .iter()
        .map(|q| si(q, Dimension::Length, "spindle.finger_offsets"))
        .collect::<Result<Vec<_>, _>>()?;
    let spindle = SpindleSpec {
        finger_count: u32::try_from(raw.spindle.finger_count)
            .map_err(|_| ConfigError::invalid("spindle.finger_count", "finger_count too large"))?,
        finger_radius: si(&raw.spindle.finger_radius, Dimension::Length, "spindle.finger_radius")?,
        finger_offsets,
        spin_rate: raw.spindle.spin_rate,
        plunge_depth: si(&raw.spindle.plunge_depth, Dimension::Length, "spindle.plunge_depth")?,
    };
    spindle
        .validate(&bin)
        .map_err(|(field, reason)| ConfigError::invalid(&format!("spindle.{field}"), reason))?;

    let rheology = SubstrateRheology::new(si(&raw.substrate.viscosity, Dimension::Viscosity, "substrate.viscosity")?)
        .map_err(|e| ConfigError::invalid("substrate.viscosity", e))?;

    if raw.motor.steps_per_rev <= 0 {
        return Err(ConfigError::invalid("motor.steps_per_rev", "steps_per_rev must be > 0"));
    }
    let motor = MotorSpec {
        steps_per_rev: u32::try_from(raw.motor.steps_per_rev)
            .map_err(|_| ConfigError::invalid("motor.steps_per_rev", "steps_per_rev too large"))?,
        pulley_circumference: positive(
            si(&raw.motor.pulley_circumference, Dimension::Length, "motor.pulley_circumference")?,
            "motor.pulley_circumference",
        )?,
        lead_screw_pitch: positive(
            si(&raw.motor.lead_screw_pitch, Dimension::Length, "motor.lead_screw_pitch")?,
            "motor.lead_screw_pitch",
        )?,
    };
    let holding_torque = positive(
        si(&raw.motor.holding_torque, Dimension::Torque, "motor.holding_torque")?,
        "motor.holding_torque",
    )?;
    let gantry = GantrySettings {
        z_speed: positive(si(&raw.motor.z_speed, Dimension::Speed, "motor.z_speed")?, "motor.z_speed")?,
        rapid_speed: positive(
            si(&raw.motor.rapid_speed, Dimension::Speed, "motor.rapid_speed")?,
            "motor.rapid_speed",
        )?,
    };

    let aeration_time: DailyTime = raw
        .schedule
        .aeration_time
        .parse()
        .map_err(|e: String| ConfigError::invalid("schedule.aeration_time", e))?;
    if raw.schedule.utc_offset_minutes.abs() >= 24 * 60 {
        return Err(ConfigError::invalid("schedule.utc_offset_minutes", "offset must be within ±24 h"));
    }
    if raw.schedule.sensor_interval_s == 0 {
        return Err(ConfigError::invalid("schedule.sensor_interval_s", "sensor_interval_s must be > 0"));
    }
    let schedule = ScheduleSettings {
        aeration_time,
        utc_offset_minutes: raw.schedule.utc_offset_minutes,
        sensor_interval_s: raw.schedule.sensor_interval_s,
        end_stop_timeout_s: positive(raw.schedule.end_stop_timeout_s, "schedule.end_stop_timeout_s")?,
        time_budget_s: positive(raw.schedule.time_budget_s, "schedule.time_budget_s")?,
    };

    let planner = PlannerSettings {
        mode: raw.planner.mode,
        raster_pitch: positive(
            si(&raw.planner.raster_pitch, Dimension::Length, "planner.raster_pitch")?,
            "planner.raster_pitch",
        )?,
        spiral_radius: positive(
            si(&raw.planner.spiral_radius, Dimension::Length, "planner.spiral_radius")?,
            "planner.spiral_radius",
        )?,
        spiral_turns: raw.planner.spiral_turns,
        targeted_k: positive(raw.planner.targeted_k, "planner.targeted_k")?,
        safety_factor: positive(raw.planner.safety_factor, "planner.safety_factor")?,
    };
    if planner.spiral_turns == 0 {
        return Err(ConfigError::invalid("planner.spiral_turns", "spiral_turns must be ≥ 1"));
    }

    if !(raw.vision.t_lo < raw.vision.t_hi) {
        return Err(ConfigError::invalid("vision.t_lo", "t_lo must be < t_hi"));
    }
    let vision = VisionSettings {
        t_lo: raw.vision.t_lo,
        t_hi: raw.vision.t_hi,
        min_component_area: raw.vision.min_component_area,
        mix_delta: raw.vision.mix_delta,
    };

    Ok(Config { bin, spindle, rheology, motor, holding_torque, gantry, schedule, planner, vision })
}

/// Loads and validates the config file at `path`.
pub fn load_config(path: impl AsRef<Path>) -> Result<Config, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config(&text)
}
