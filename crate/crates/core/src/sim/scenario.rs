//! Scenario files for closed-loop runs. See `docs/scenario.md`.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::Deserialize;
use thiserror::Error;

use super::{BiologyParams, SensorParams, ThermalParams};
use crate::model::units::{Dimension, Quantity};
use crate::model::{load_config, parse_iso8601, Config, ConfigError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario schema violation: {0}")]
    Schema(String),
    #[error("invalid scenario `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaultInjection {
    /// From this instant on the end-stop switches never close.
    pub end_stop_fail_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub initial_mass: f64,
    pub days: u32,
    pub start: DateTime<Utc>,
    /// Cell size, meters.
    pub grid_resolution: f64,
    pub initial_clusters: usize,
    pub initial_moisture: f64,
    /// Seconds between thermal frames fed to the vision pipeline.
    pub frame_interval_s: u32,
    pub biology: BiologyParams,
    pub thermal: ThermalParams,
    pub sensors: SensorParams,
    pub fault: FaultInjection,
    pub config: Config,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    seed: u64,
    #[serde(default = "default_mass")]
    initial_mass: f64,
    growth_rate: Option<f64>,
    days: u32,
    #[serde(default = "default_start")]
    start: String,
    #[serde(default = "default_resolution")]
    grid_resolution: Quantity,
    #[serde(default = "default_clusters")]
    initial_clusters: usize,
    #[serde(default = "default_moisture")]
    initial_moisture: f64,
    #[serde(default = "default_frame_interval")]
    frame_interval_s: u32,
    config: Option<String>,
    #[serde(default)]
    biology: BiologyParams,
    #[serde(default)]
    thermal: ThermalParams,
    #[serde(default)]
    sensors: SensorParams,
    #[serde(default)]
    fault: RawFault,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawFault {
    end_stop_fail_at: Option<String>,
}

fn default_mass() -> f64 {
    5760.0
}
fn default_start() -> String {
    "2024-05-01T00:00:00Z".into()
}
fn default_resolution() -> Quantity {
    Quantity::Number(0.005)
}
fn default_clusters() -> usize {
    6
}
fn default_moisture() -> f64 {
    0.65
}
fn default_frame_interval() -> u32 {
    3600
}

impl Scenario {
    /// Parses scenario text. A relative `config` path is resolved against
    /// `base_dir`; without one the shipped configuration is used.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Scenario, ScenarioError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| ScenarioError::Schema(e.to_string()))?;
        let invalid = |field: &'static str, reason: &str| ScenarioError::Invalid { field, reason: reason.into() };
        if !(raw.initial_mass.is_finite() && raw.initial_mass > 0.0) {
            return Err(invalid("initial_mass", "must be > 0"));
        }
        let start = parse_iso8601(&raw.start).ok_or_else(|| invalid("start", "expected ISO-8601 timestamp"))?;
        let grid_resolution =
            raw.grid_resolution.to_si(Dimension::Length).map_err(|e| ScenarioError::Invalid { field: "grid_resolution", reason: e })?;
        if !(grid_resolution.is_finite() && grid_resolution > 0.0) {
            return Err(invalid("grid_resolution", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&raw.initial_moisture) {
            return Err(invalid("initial_moisture", "must be in 0..=1"));
        }
        if raw.frame_interval_s == 0 {
            return Err(invalid("frame_interval_s", "must be > 0"));
        }
        let mut biology = raw.biology;
        if let Some(g) = raw.growth_rate {
            if !g.is_finite() {
                return Err(invalid("growth_rate", "must be finite"));
            }
            biology.growth_rate = g;
        }
        let end_stop_fail_at = match raw.fault.end_stop_fail_at {
            Some(s) => Some(parse_iso8601(&s).ok_or_else(|| invalid("fault.end_stop_fail_at", "expected ISO-8601 timestamp"))?),
            None => None,
        };
        let config = match raw.config {
            Some(p) => {
                let p = PathBuf::from(p);
                load_config(if p.is_absolute() { p } else { base_dir.join(p) })?
            }
            None => Config::shipped(),
        };
        Ok(Scenario {
            seed: raw.seed,
            initial_mass: raw.initial_mass,
            days: raw.days,
            start,
            grid_resolution,
            initial_clusters: raw.initial_clusters,
            initial_moisture: raw.initial_moisture,
            frame_interval_s: raw.frame_interval_s,
            biology,
            thermal: raw.thermal,
            sensors: raw.sensors,
            fault: FaultInjection { end_stop_fail_at },
            config,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        Scenario::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Ten days from the shipped configuration with a fixed seed.
    pub fn reference(seed: u64, days: u32) -> Scenario {
        Scenario::parse(&format!("seed = {seed}\ndays = {days}\n"), Path::new(".")).expect("reference scenario")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scenario_uses_defaults() {
        let s = Scenario::parse("seed = 3\ndays = 2\n", Path::new(".")).unwrap();
        assert_eq!(s.initial_mass, 5760.0);
        assert_eq!(s.grid_resolution, 0.005);
        assert_eq!(s.biology, BiologyParams::default());
        assert_eq!(s.config, Config::shipped());
        assert_eq!(s.fault.end_stop_fail_at, None);
    }

    #[test]
    fn overrides_and_units() {
        let text = r#"
seed = 1
days = 1
growth_rate = 0.01
grid_resolution = "1 cm"
start = "2024-06-01T06:00:00Z"
[fault]
end_stop_fail_at = "2024-06-01T11:00:30Z"
[biology]
cluster_rate = 0.1
"#;
        let s = Scenario::parse(text, Path::new(".")).unwrap();
        assert_eq!(s.biology.growth_rate, 0.01);
        assert_eq!(s.biology.cluster_rate, 0.1);
        assert!((s.grid_resolution - 0.01).abs() < 1e-15);
        assert!(s.fault.end_stop_fail_at.is_some());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(Scenario::parse("seed=1\ndays=1\ninitial_mass=0\n", Path::new(".")), Err(ScenarioError::Invalid { .. })));
        assert!(matches!(Scenario::parse("seed=1\ndays=1\nbogus=2\n", Path::new(".")), Err(ScenarioError::Schema(_))));
        assert!(matches!(Scenario::parse("seed=1\n", Path::new(".")), Err(ScenarioError::Schema(_))));
        assert!(Scenario::load("/nonexistent/scenario.toml").is_err());
    }
}
