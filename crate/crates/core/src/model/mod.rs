//! Shared domain types, configuration loading and raster image I/O.

pub mod config;
pub mod image;
pub mod units;

pub use config::{load_config, parse_config, Config, ConfigError, PathMode, PlannerSettings, ScheduleSettings, VisionSettings};
pub use image::{read_image, write_image, ColorImage, ColorSpace, GrayImage, Image, ImageError};

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Serialize};

/// Interior workspace of the rearing bin, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinGeometry {
    pub x_len: f64,
    pub y_len: f64,
    /// Substrate depth.
    pub z_depth: f64,
    /// Keep-out border between the spindle axis and the walls.
    pub margin: f64,
}

impl BinGeometry {
    pub fn new(x_len: f64, y_len: f64, z_depth: f64, margin: f64) -> Result<Self, String> {
        let g = BinGeometry { x_len, y_len, z_depth, margin };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("x_len", self.x_len),
            ("y_len", self.y_len),
            ("z_depth", self.z_depth),
            ("margin", self.margin),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be > 0"));
            }
        }
        if self.margin >= self.x_len.min(self.y_len) / 2.0 {
            return Err("margin must be < min(x_len, y_len)/2".into());
        }
        Ok(())
    }

    /// Lower-left corner of the area the spindle axis may visit.
    pub fn work_min(&self) -> (f64, f64) {
        (self.margin, self.margin)
    }

    pub fn work_max(&self) -> (f64, f64) {
        (self.x_len - self.margin, self.y_len - self.margin)
    }

    pub fn work_width(&self) -> f64 {
        self.x_len - 2.0 * self.margin
    }

    pub fn work_height(&self) -> f64 {
        self.y_len - 2.0 * self.margin
    }

    /// True when `(x, y)` lies in the working area, with `eps` slack for
    /// accumulated floating point error.
    pub fn contains(&self, x: f64, y: f64, eps: f64) -> bool {
        let (x0, y0) = self.work_min();
        let (x1, y1) = self.work_max();
        x >= x0 - eps && x <= x1 + eps && y >= y0 - eps && y <= y1 + eps
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x_len / 2.0, self.y_len / 2.0)
    }
}

/// Tilling spindle carried by the gantry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpindleSpec {
    pub finger_count: u32,
    /// Tooth radius, meters.
    pub finger_radius: f64,
    /// Radial distance of each finger from the spindle axis, meters.
    pub finger_offsets: Vec<f64>,
    /// Revolutions per second.
    pub spin_rate: f64,
    /// Plunge depth below the substrate surface, meters (positive down).
    pub plunge_depth: f64,
}

impl SpindleSpec {
    pub fn validate(&self, bin: &BinGeometry) -> Result<(), (&'static str, String)> {
        if self.finger_count < 1 {
            return Err(("finger_count", "finger_count must be ≥ 1".into()));
        }
        if !(self.finger_radius.is_finite() && self.finger_radius > 0.0) {
            return Err(("finger_radius", "finger_radius must be > 0".into()));
        }
        if self.finger_offsets.len() != self.finger_count as usize {
            return Err((
                "finger_offsets",
                format!(
                    "finger_offsets has {} entries but finger_count is {}",
                    self.finger_offsets.len(),
                    self.finger_count
                ),
            ));
        }
        if self.finger_offsets.iter().any(|o| !o.is_finite() || *o < 0.0) {
            return Err(("finger_offsets", "finger offsets must be finite and ≥ 0".into()));
        }
        if !(self.spin_rate.is_finite() && self.spin_rate >= 0.0) {
            return Err(("spin_rate", "spin_rate must be ≥ 0".into()));
        }
        if !(self.plunge_depth.is_finite() && self.plunge_depth >= 0.0) {
            return Err(("plunge_depth", "plunge_depth must be ≥ 0".into()));
        }
        if self.plunge_depth > bin.z_depth {
            return Err(("plunge_depth", "plunge_depth must be ≤ bin z_depth".into()));
        }
        Ok(())
    }

    /// Radius of the disc swept by the fingers around the spindle axis.
    pub fn sweep_radius(&self) -> f64 {
        let max_offset = self.finger_offsets.iter().cloned().fold(0.0, f64::max);
        self.finger_radius + max_offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubstrateRheology {
    /// Dynamic viscosity, Pa·s.
    pub dynamic_viscosity: f64,
}

impl SubstrateRheology {
    pub fn new(dynamic_viscosity: f64) -> Result<Self, String> {
        if !(dynamic_viscosity.is_finite() && dynamic_viscosity > 0.0) {
            return Err("dynamic_viscosity must be > 0".into());
        }
        Ok(SubstrateRheology { dynamic_viscosity })
    }
}

/// One time-stamped reading of the environmental sensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    /// UTC seconds since the Unix epoch.
    pub timestamp: i64,
    pub temperature: f64,
    pub humidity: f64,
    /// Volumetric fraction, 0..=1.
    pub moisture: f64,
    pub ph: f64,
    pub co2: f64,
    pub no2: f64,
}

impl SensorFrame {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.moisture) {
            return Err(format!("moisture {} outside 0..=1", self.moisture));
        }
        if !(0.0..=14.0).contains(&self.ph) {
            return Err(format!("ph {} outside 0..=14", self.ph));
        }
        Ok(())
    }

    pub fn datetime(&self) -> DateTime<Utc> {
        utc_from_secs(self.timestamp)
    }
}

pub fn utc_from_secs(secs: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(secs, 0).single().unwrap_or_default()
}

/// ISO-8601 UTC with whole seconds, e.g. `2024-05-01T11:00:00Z`.
pub fn iso8601(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn parse_iso8601(s: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s).ok().map(|t| t.with_timezone(&Utc))
}
