//! Coverage paths for the aeration spindle and first-principles actuator sizing.

mod sizing;

pub use sizing::{motor_feasibility, stokes_drag, DragEstimate, FeasibilityReport};

use std::fmt::Write as _;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BinGeometry, Config, PathMode};
use crate::vision::ComponentSet;

/// Default travel speed stamped on freshly planned paths: one 1.92 m pass
/// in 60 s.
pub const DEFAULT_TRAVEL_SPEED: f64 = 0.032;

/// Angular step of spiral polylines.
pub const SPIRAL_STEP_DEG: f64 = 10.0;

const EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("pitch {pitch} m must be in (0, {max}] for this geometry")]
    BadPitch { pitch: f64, max: f64 },
    #[error("degenerate spiral: radius must be > 0")]
    DegenerateSpiral,
    #[error("spiral exits working area")]
    SpiralOutOfBounds,
    #[error("spiral needs at least one turn")]
    NoTurns,
    #[error("nothing to target")]
    NothingToTarget,
    #[error("{0} must be > 0 and finite")]
    NonPositive(&'static str),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("cannot parse waypoint line {line}: {text:?}")]
    Parse { line: usize, text: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dist(self, o: Point2) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

/// Ordered waypoints the spindle follows while plunged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolPath {
    pub waypoints: Vec<Point2>,
    pub plunge_depth: f64,
    pub travel_speed: f64,
    pub spindle_spin_rate: f64,
}

impl ToolPath {
    fn from_waypoints(waypoints: Vec<Point2>) -> Self {
        ToolPath { waypoints, plunge_depth: 0.0, travel_speed: DEFAULT_TRAVEL_SPEED, spindle_spin_rate: 0.0 }
    }

    pub fn with_motion(mut self, plunge_depth: f64, travel_speed: f64, spin_rate: f64) -> Self {
        self.plunge_depth = plunge_depth;
        self.travel_speed = travel_speed;
        self.spindle_spin_rate = spin_rate;
        self
    }

    pub fn validate(&self, g: &BinGeometry) -> Result<(), PlanError> {
        if self.waypoints.len() < 2 {
            return Err(PlanError::InvalidPath("need at least 2 waypoints".into()));
        }
        if !(self.travel_speed.is_finite() && self.travel_speed > 0.0) {
            return Err(PlanError::InvalidPath("travel_speed must be > 0".into()));
        }
        if let Some(p) = self.waypoints.iter().find(|p| !g.contains(p.x, p.y, 1e-9)) {
            return Err(PlanError::InvalidPath(format!("waypoint ({:.6}, {:.6}) outside working area", p.x, p.y)));
        }
        Ok(())
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        self.waypoints.windows(2).map(|w| (w[0], w[1]))
    }

    /// Plain-text export: one `x y` line per waypoint, meters, 6 decimals.
    pub fn to_waypoint_text(&self) -> String {
        let mut s = String::new();
        for p in &self.waypoints {
            let _ = writeln!(s, "{:.6} {:.6}", p.x, p.y);
        }
        s
    }

    pub fn parse_waypoint_text(text: &str) -> Result<Vec<Point2>, PlanError> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .map(|(i, l)| {
                let mut it = l.split_whitespace().map(str::parse::<f64>);
                match (it.next(), it.next(), it.next()) {
                    (Some(Ok(x)), Some(Ok(y)), None) => Ok(Point2::new(x, y)),
                    _ => Err(PlanError::Parse { line: i + 1, text: l.to_string() }),
                }
            })
            .collect()
    }
}

/// Boustrophedon raster with lanes parallel to X, starting at the home corner.
///
/// Lanes sit `pitch` apart from the bottom of the working area. When the
/// working height is not a whole number of pitches, one extra lane runs
/// along the top edge so no point is left more than `pitch/2` from a lane.
/// The path length is therefore `lanes * width + height`, which reduces to
/// `n*Lx + (n-1)*pitch` whenever the pitch divides the height.
pub fn plan_raster(g: &BinGeometry, pitch: f64) -> Result<ToolPath, PlanError> {
    let (x0, y0) = g.work_min();
    let (x1, y1) = g.work_max();
    let height = g.work_height();
    if !(pitch.is_finite() && pitch > 0.0 && pitch <= height + EPS) {
        return Err(PlanError::BadPitch { pitch, max: height });
    }
    let full = (height / pitch + EPS).floor() as usize;
    let mut lanes: Vec<f64> = (0..=full).map(|k| y0 + k as f64 * pitch).collect();
    let last = lanes.last_mut().expect("at least one lane");
    if y1 - *last > EPS {
        lanes.push(y1);
    } else {
        *last = y1;
    }
    let mut waypoints = Vec::with_capacity(2 * lanes.len());
    for (k, &y) in lanes.iter().enumerate() {
        if k % 2 == 0 {
            waypoints.push(Point2::new(x0, y));
            waypoints.push(Point2::new(x1, y));
        } else {
            waypoints.push(Point2::new(x1, y));
            waypoints.push(Point2::new(x0, y));
        }
    }
    Ok(ToolPath::from_waypoints(waypoints))
}

/// Number of lanes `plan_raster` produces.
pub fn raster_lane_count(path: &ToolPath) -> usize {
    path.waypoints.len() / 2
}

/// Archimedean spiral from `center` out to `radius`, sampled every 10°.
pub fn plan_spiral(center: Point2, radius: f64, turns: u32, g: &BinGeometry) -> Result<ToolPath, PlanError> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(PlanError::DegenerateSpiral);
    }
    if turns == 0 {
        return Err(PlanError::NoTurns);
    }
    let points = spiral_points(center, radius, turns);
    if points.iter().any(|p| !g.contains(p.x, p.y, EPS)) {
        return Err(PlanError::SpiralOutOfBounds);
    }
    Ok(ToolPath::from_waypoints(points))
}

fn spiral_points(center: Point2, radius: f64, turns: u32) -> Vec<Point2> {
    let steps = (360.0 / SPIRAL_STEP_DEG) as u32 * turns;
    let theta_max = TAU * turns as f64;
    (0..=steps)
        .map(|i| {
            let theta = theta_max * i as f64 / steps as f64;
            let r = radius * i as f64 / steps as f64;
            Point2::new(center.x + r * theta.cos(), center.y + r * theta.sin())
        })
        .collect()
}

/// Maps image pixel coordinates onto bin coordinates (meters). Pixel
/// `(row, col)` centers land at `origin + ((col + 0.5) * pitch_x, (row + 0.5) * pitch_y)`;
/// a negative `pitch_y` flips the vertical axis for top-down camera frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageToBin {
    pub origin: Point2,
    pub pitch_x: f64,
    pub pitch_y: f64,
}

impl ImageToBin {
    /// Identity mapping for simulator frames, one pixel per grid cell.
    pub fn for_grid(resolution: f64) -> Self {
        ImageToBin { origin: Point2::new(0.0, 0.0), pitch_x: resolution, pitch_y: resolution }
    }

    /// Stretches a `width`×`height` top-down frame over the whole bin.
    pub fn fit(width: usize, height: usize, g: &BinGeometry) -> Self {
        ImageToBin {
            origin: Point2::new(0.0, g.y_len),
            pitch_x: g.x_len / width as f64,
            pitch_y: -g.y_len / height as f64,
        }
    }

    pub fn map(&self, row: f64, col: f64) -> Point2 {
        Point2::new(self.origin.x + (col + 0.5) * self.pitch_x, self.origin.y + (row + 0.5) * self.pitch_y)
    }

    /// Mean linear size of one pixel.
    pub fn pixel_pitch(&self) -> f64 {
        0.5 * (self.pitch_x.abs() + self.pitch_y.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpiral {
    pub label: u32,
    pub center: Point2,
    pub radius: f64,
}

/// One spiral per cluster, largest cluster first. Radius is
/// `k * sqrt(area_px) * pixel_pitch`; a spiral that would leave the working
/// area has its center pulled inward, and its radius capped at half the
/// smaller working dimension.
pub fn targeted_spirals(
    clusters: &ComponentSet,
    g: &BinGeometry,
    map: &ImageToBin,
    k: f64,
) -> Result<Vec<TargetSpiral>, PlanError> {
    if clusters.components.is_empty() {
        return Err(PlanError::NothingToTarget);
    }
    let mut order: Vec<_> = clusters.components.iter().collect();
    order.sort_by(|a, b| b.area.cmp(&a.area).then(a.label.cmp(&b.label)));
    let (x0, y0) = g.work_min();
    let (x1, y1) = g.work_max();
    let cap = 0.5 * g.work_width().min(g.work_height());
    Ok(order
        .into_iter()
        .map(|c| {
            let radius = (k * (c.area as f64).sqrt() * map.pixel_pitch()).min(cap);
            let p = map.map(c.centroid.0, c.centroid.1);
            let center = Point2::new(p.x.clamp(x0 + radius, x1 - radius), p.y.clamp(y0 + radius, y1 - radius));
            TargetSpiral { label: c.label, center, radius }
        })
        .collect())
}

/// Local spirals over the detected clusters joined by straight transits.
pub fn plan_targeted(
    clusters: &ComponentSet,
    g: &BinGeometry,
    map: &ImageToBin,
    k: f64,
    turns: u32,
) -> Result<ToolPath, PlanError> {
    if turns == 0 {
        return Err(PlanError::NoTurns);
    }
    let spirals = targeted_spirals(clusters, g, map, k)?;
    let mut waypoints = Vec::new();
    for s in spirals {
        if s.radius <= 0.0 {
            continue;
        }
        waypoints.extend(spiral_points(s.center, s.radius, turns));
    }
    if waypoints.len() < 2 {
        return Err(PlanError::NothingToTarget);
    }
    Ok(ToolPath::from_waypoints(waypoints))
}

/// Sum of Euclidean segment lengths.
pub fn path_length(p: &ToolPath) -> f64 {
    p.segments().map(|(a, b)| a.dist(b)).sum()
}

/// Slowest speed that covers `length` within `time_budget`. Returns the
/// exact quotient; 1.92 m in 60 s gives 0.032 m/s.
pub fn min_speed(length: f64, time_budget: f64) -> Result<f64, PlanError> {
    if !(length.is_finite() && length > 0.0) {
        return Err(PlanError::NonPositive("length"));
    }
    if !(time_budget.is_finite() && time_budget > 0.0) {
        return Err(PlanError::NonPositive("time_budget"));
    }
    Ok(length / time_budget)
}

/// Plans a complete aeration path for `mode` with the motion parameters
/// taken from `cfg`. Targeted mode falls back to raster when there is
/// nothing to target.
pub fn plan_for_config(
    cfg: &Config,
    mode: PathMode,
    clusters: Option<(&ComponentSet, &ImageToBin)>,
) -> Result<ToolPath, PlanError> {
    let g = &cfg.bin;
    let raw = match mode {
        PathMode::Raster => plan_raster(g, cfg.planner.raster_pitch)?,
        PathMode::Spiral => {
            let (cx, cy) = g.center();
            plan_spiral(Point2::new(cx, cy), cfg.planner.spiral_radius, cfg.planner.spiral_turns, g)?
        }
        PathMode::Targeted => match clusters {
            Some((cs, map)) => match plan_targeted(cs, g, map, cfg.planner.targeted_k, cfg.planner.spiral_turns) {
                Ok(p) => p,
                Err(PlanError::NothingToTarget) => plan_raster(g, cfg.planner.raster_pitch)?,
                Err(e) => return Err(e),
            },
            None => plan_raster(g, cfg.planner.raster_pitch)?,
        },
    };
    let len = path_length(&raw);
    let speed = if len > 0.0 { min_speed(len, cfg.schedule.time_budget_s)? } else { DEFAULT_TRAVEL_SPEED };
    Ok(raw.with_motion(cfg.spindle.plunge_depth, speed, cfg.spindle.spin_rate))
}
