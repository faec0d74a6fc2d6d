//! Operator-facing HTTP+JSON service. The JSON schema is frozen in
//! `docs/telemetry.md`.
//!
//! Request handlers never touch the controller. Reads come from immutable
//! snapshots published after each tick; writes go into a command queue that
//! the tick loop drains in FIFO order.

mod server;

pub use server::{router, serve};

use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, watch};

use crate::controller::{AerationPhase, Command, EndStops, Mode, Pose};
use crate::model::image::encode_pnm;
use crate::model::{iso8601, Image, parse_iso8601, utc_from_secs, PathMode, SensorFrame};
use crate::runtime::BenchRig;

/// Sensor reading as exposed over JSON; names match the CSV log columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorReading {
    pub timestamp: String,
    pub temp_c: f64,
    pub humidity_pct: f64,
    pub moisture: f64,
    pub ph: f64,
    pub co2_ppm: f64,
    pub no2_ppm: f64,
}

impl From<&SensorFrame> for SensorReading {
    fn from(f: &SensorFrame) -> Self {
        SensorReading {
            timestamp: iso8601(utc_from_secs(f.timestamp)),
            temp_c: f.temperature,
            humidity_pct: f.humidity,
            moisture: f.moisture,
            ph: f.ph,
            co2_ppm: f.co2,
            no2_ppm: f.no2,
        }
    }
}

/// Everything `/status` and `/events` report, taken after one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatusSnapshot {
    /// Increments with every published snapshot.
    pub seq: u64,
    pub time: String,
    pub mode: Mode,
    pub aeration_phase: AerationPhase,
    pub pose: Pose,
    pub end_stops: EndStops,
    pub spindle_spinning: bool,
    pub latest_frame: Option<SensorReading>,
    pub growth_proxy: Option<u64>,
    pub schedule: String,
    pub utc_offset_minutes: i32,
    pub path_mode: PathMode,
    pub last_aeration: Option<String>,
    pub fault: Option<String>,
    pub alerts: Vec<String>,
    pub uptime_s: f64,
}

impl StatusSnapshot {
    pub fn from_rig(rig: &BenchRig, seq: u64) -> Self {
        let v = rig.controller.snapshot();
        StatusSnapshot {
            seq,
            time: iso8601(v.now.unwrap_or(rig.now())),
            mode: v.mode,
            aeration_phase: v.aeration_phase,
            pose: v.pose,
            end_stops: v.end_stops,
            spindle_spinning: v.spindle_spinning,
            latest_frame: v.latest_frame.as_ref().map(SensorReading::from),
            growth_proxy: rig.latest_frame().map(|(_, a)| a.growth_proxy),
            schedule: v.schedule.to_string(),
            utc_offset_minutes: rig.controller.config().schedule.utc_offset_minutes,
            path_mode: v.path_mode,
            last_aeration: v.last_aeration.map(iso8601),
            fault: v.fault,
            alerts: v.alerts,
            uptime_s: v.uptime_s,
        }
    }
}

/// Latest frames as PNM bytes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameBytes {
    /// Normalized thermal frame, P5.
    pub thermal: Option<Vec<u8>>,
    /// Heat map with cluster contours, P6.
    pub overlay: Option<Vec<u8>>,
}

/// Read side handed to the HTTP handlers.
#[derive(Clone)]
pub struct Hub {
    commands: mpsc::UnboundedSender<Command>,
    status: watch::Receiver<Arc<StatusSnapshot>>,
    frames: watch::Receiver<Arc<FrameBytes>>,
    log: watch::Receiver<Arc<String>>,
}

impl Hub {
    pub fn status(&self) -> Arc<StatusSnapshot> {
        self.status.borrow().clone()
    }

    pub fn subscribe(&self) -> watch::Receiver<Arc<StatusSnapshot>> {
        self.status.clone()
    }

    pub fn frames(&self) -> Arc<FrameBytes> {
        self.frames.borrow().clone()
    }

    pub fn log(&self) -> Arc<String> {
        self.log.borrow().clone()
    }

    /// Queues a command; false when the tick loop has gone away.
    pub fn enqueue(&self, c: Command) -> bool {
        self.commands.send(c).is_ok()
    }
}

/// Tick-loop side: moves queued commands into the rig and publishes
/// snapshots after each tick.
pub struct Publisher {
    commands: mpsc::UnboundedReceiver<Command>,
    status: watch::Sender<Arc<StatusSnapshot>>,
    frames: watch::Sender<Arc<FrameBytes>>,
    log: watch::Sender<Arc<String>>,
    seq: u64,
    log_rows: usize,
    frame_time: Option<DateTime<Utc>>,
}

pub fn channel(rig: &BenchRig) -> (Hub, Publisher) {
    let (ctx, crx) = mpsc::unbounded_channel();
    let (stx, srx) = watch::channel(Arc::new(StatusSnapshot::from_rig(rig, 0)));
    let (ftx, frx) = watch::channel(Arc::new(FrameBytes::default()));
    let (ltx, lrx) = watch::channel(Arc::new(rig.logger.sink().text.clone()));
    let hub = Hub { commands: ctx, status: srx, frames: frx, log: lrx };
    let publisher =
        Publisher { commands: crx, status: stx, frames: ftx, log: ltx, seq: 0, log_rows: rig.logger.rows(), frame_time: None };
    (hub, publisher)
}

impl Publisher {
    /// Moves every queued command into the rig's FIFO.
    pub fn drain_commands(&mut self, rig: &mut BenchRig) {
        while let Ok(c) = self.commands.try_recv() {
            rig.commands.push_back(c);
        }
    }

    pub fn publish(&mut self, rig: &BenchRig) {
        self.seq += 1;
        self.status.send_replace(Arc::new(StatusSnapshot::from_rig(rig, self.seq)));
        if rig.logger.rows() != self.log_rows {
            self.log_rows = rig.logger.rows();
            self.log.send_replace(Arc::new(rig.logger.sink().text.clone()));
        }
        if let Some((_, a)) = rig.latest_frame() {
            if self.frame_time != rig.frame_time() {
                self.frame_time = rig.frame_time();
                self.frames.send_replace(Arc::new(FrameBytes {
                    thermal: Some(encode_pnm(&Image::Gray(a.normalized.clone()))),
                    overlay: Some(encode_pnm(&Image::Color(a.overlay.clone()))),
                }));
            }
        }
    }

    /// Drains commands, ticks once at `now` and publishes the result.
    pub fn tick(&mut self, rig: &mut BenchRig, now: DateTime<Utc>) -> Result<(), crate::sim::SimError> {
        self.drain_commands(rig);
        rig.step_at(now)?;
        self.publish(rig);
        Ok(())
    }
}

/// Parses an optional ISO-8601 query parameter.
fn parse_bound(v: Option<&str>) -> Result<Option<DateTime<Utc>>, String> {
    match v {
        None | Some("") => Ok(None),
        Some(s) => parse_iso8601(s).map(Some).ok_or_else(|| format!("invalid timestamp {s:?}")),
    }
}
