use super::SimError;
use crate::controller::{EndStops, Gantry, GantryError, Pose};
use crate::kinematics::{CartesianDelta, MotorSpec, StepStreamer};
use crate::model::{BinGeometry, Config};
use crate::planner::{Point2, ToolPath};
use crate::trace::{Event, TraceEvent};

const LIMIT_EPS: f64 = 1e-9;

/// Simulated CoreXY carriage with a lead-screw Z axis.
///
/// Mechanical limits are the working area in XY and `0..=z_depth` in Z.
/// The end stops sit at the home corner `(x_min, y_min, z = 0)` and read
/// true exactly when the carriage is there, unless `end_stop_fault` is set,
/// in which case they never close.
#[derive(Debug, Clone)]
pub struct VirtualGantry {
    bin: BinGeometry,
    z_speed: f64,
    rapid_speed: f64,
    pose: Pose,
    homed: bool,
    spinning: bool,
    streamer: StepStreamer,
    /// Plunged polylines since the last `take_track`.
    track: Vec<Vec<Point2>>,
    events: Vec<TraceEvent>,
    pub end_stop_fault: bool,
}

impl VirtualGantry {
    pub fn new(bin: BinGeometry, motor: MotorSpec, z_speed: f64, rapid_speed: f64) -> Self {
        let (x, y) = bin.work_min();
        VirtualGantry {
            bin,
            z_speed,
            rapid_speed,
            pose: Pose { x, y, z: 0.0 },
            homed: false,
            spinning: false,
            streamer: StepStreamer::new(motor),
            track: Vec::new(),
            events: Vec::new(),
            end_stop_fault: false,
        }
    }

    pub fn from_config(cfg: &Config) -> Self {
        VirtualGantry::new(cfg.bin, cfg.motor, cfg.gantry.z_speed, cfg.gantry.rapid_speed)
    }

    /// Moves the carriage without homing, e.g. to model a power cut mid-run.
    pub fn place(&mut self, pose: Pose) -> Result<(), GantryError> {
        self.check(pose.x, pose.y, pose.z)?;
        self.pose = pose;
        Ok(())
    }

    pub fn take_track(&mut self) -> Vec<Vec<Point2>> {
        std::mem::take(&mut self.track)
    }

    pub fn steps(&self) -> (i64, i64) {
        (self.streamer.total_steps_a, self.streamer.total_steps_b)
    }

    fn check(&self, x: f64, y: f64, z: f64) -> Result<(), GantryError> {
        let ok = self.bin.contains(x, y, LIMIT_EPS) && z >= -LIMIT_EPS && z <= self.bin.z_depth + LIMIT_EPS;
        if ok {
            Ok(())
        } else {
            Err(GantryError::OutOfLimits { x, y, z })
        }
    }

    fn travel(&mut self, target: Point2) {
        let d = CartesianDelta::new(target.x - self.pose.x, target.y - self.pose.y);
        self.streamer.push(d);
        self.pose.x = target.x;
        self.pose.y = target.y;
    }

    fn emit(&mut self, t: f64, e: Event) {
        self.events.push(TraceEvent::new(t, e));
    }
}

impl Gantry for VirtualGantry {
    fn pose(&self) -> Pose {
        self.pose
    }

    fn home_pose(&self) -> Pose {
        let (x, y) = self.bin.work_min();
        Pose { x, y, z: 0.0 }
    }

    fn end_stops(&self) -> EndStops {
        if self.end_stop_fault {
            return EndStops::default();
        }
        let h = self.home_pose();
        EndStops {
            x: (self.pose.x - h.x).abs() <= LIMIT_EPS,
            y: (self.pose.y - h.y).abs() <= LIMIT_EPS,
            z: self.pose.z.abs() <= LIMIT_EPS,
        }
    }

    fn is_homed(&self) -> bool {
        self.homed
    }

    fn spindle_spinning(&self) -> bool {
        self.spinning
    }

    fn home(&mut self, t: f64) -> Result<f64, GantryError> {
        let mut dur = 0.0;
        if self.pose.z > 0.0 {
            dur += self.retract(t)?;
        }
        let h = self.home_pose();
        dur += self.pose.xy().dist(h.xy()) / self.rapid_speed;
        self.travel(h.xy());
        if self.end_stops().at_home() {
            self.homed = true;
            self.emit(t + dur, Event::EndStop { x: h.x, y: h.y });
            self.emit(t + dur, Event::Home { x: h.x, y: h.y });
        } else {
            self.homed = false;
        }
        Ok(dur)
    }

    fn plunge(&mut self, t: f64, at: Point2, depth: f64) -> Result<f64, GantryError> {
        if !self.homed {
            return Err(GantryError::NotHomed);
        }
        self.check(at.x, at.y, depth)?;
        let mut dur = 0.0;
        if self.pose.z > 0.0 {
            dur += self.retract(t)?;
        }
        dur += self.pose.xy().dist(at) / self.rapid_speed;
        self.travel(at);
        self.emit(t + dur, Event::Plunge { x: at.x, y: at.y, depth });
        dur += depth / self.z_speed;
        self.pose.z = depth;
        if depth > 0.0 {
            self.track.push(vec![at]);
        }
        Ok(dur)
    }

    fn spin(&mut self, t: f64, on: bool, rate: f64) {
        if on != self.spinning {
            self.spinning = on;
            self.emit(t, if on { Event::SpinOn { rate } } else { Event::SpinOff });
        }
    }

    fn move_to(&mut self, t: f64, target: Point2, speed: f64) -> Result<f64, GantryError> {
        if !self.homed {
            return Err(GantryError::NotHomed);
        }
        if !(speed.is_finite() && speed > 0.0) {
            return Err(GantryError::BadSpeed("speed"));
        }
        self.check(target.x, target.y, self.pose.z)?;
        let dur = self.pose.xy().dist(target) / speed;
        self.travel(target);
        if self.pose.z > 0.0 {
            if let Some(line) = self.track.last_mut() {
                line.push(target);
            }
        }
        self.emit(t, Event::Move { x: target.x, y: target.y });
        Ok(dur)
    }

    fn retract(&mut self, t: f64) -> Result<f64, GantryError> {
        let dur = self.pose.z / self.z_speed;
        self.pose.z = 0.0;
        self.emit(t, Event::Retract);
        Ok(dur)
    }

    fn drain_events(&mut self) -> Vec<TraceEvent> {
        std::mem::take(&mut self.events)
    }
}

/// Runs `path` open loop on a homed gantry starting at time `t0` and
/// returns the event trace: PLUNGE, SPIN_ON, one MOVE per segment,
/// SPIN_OFF, RETRACT, END_STOP, HOME.
pub fn gantry_execute(gv: &mut VirtualGantry, path: &ToolPath, t0: f64) -> Result<Vec<TraceEvent>, SimError> {
    if !gv.is_homed() {
        return Err(GantryError::NotHomed.into());
    }
    for p in &path.waypoints {
        gv.check(p.x, p.y, path.plunge_depth)?;
    }
    let first = *path.waypoints.first().ok_or(GantryError::OutOfLimits { x: f64::NAN, y: f64::NAN, z: 0.0 })?;
    gv.drain_events();
    let mut t = t0;
    t += gv.plunge(t, first, path.plunge_depth)?;
    gv.spin(t, true, path.spindle_spin_rate);
    for (_, b) in path.segments() {
        t += gv.move_to(t, b, path.travel_speed)?;
    }
    gv.spin(t, false, 0.0);
    t += gv.retract(t)?;
    gv.home(t)?;
    if !gv.end_stops().at_home() {
        return Err(GantryError::EndStopNotReached.into());
    }
    Ok(gv.drain_events())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{plan_raster, raster_lane_count};

    fn gantry() -> (Config, VirtualGantry) {
        let cfg = Config::shipped();
        let gv = VirtualGantry::from_config(&cfg);
        (cfg, gv)
    }

    fn path(cfg: &Config) -> ToolPath {
        plan_raster(&cfg.bin, cfg.planner.raster_pitch).unwrap().with_motion(0.04, 0.032, 1.0)
    }

    #[test]
    fn raster_trace_shape() {
        let (cfg, mut gv) = gantry();
        gv.home(0.0).unwrap();
        let p = path(&cfg);
        let n = raster_lane_count(&p);
        let trace = gantry_execute(&mut gv, &p, 100.0).unwrap();
        let names: Vec<&str> = trace.iter().map(|e| e.event.name()).collect();
        assert_eq!(names.first(), Some(&"PLUNGE"));
        assert_eq!(names.last(), Some(&"HOME"));
        assert_eq!(names.iter().filter(|&&n| n == "MOVE").count(), 2 * n - 1);
        let tail = &names[names.len() - 4..];
        assert_eq!(tail, ["SPIN_OFF", "RETRACT", "END_STOP", "HOME"]);
        assert_eq!(names[1], "SPIN_ON");
        assert_eq!(gv.pose(), gv.home_pose());
        assert!(gv.end_stops().at_home());
        assert!(trace.windows(2).all(|w| w[0].t <= w[1].t));
    }

    #[test]
    fn unhomed_gantry_refuses() {
        let (cfg, mut gv) = gantry();
        assert_eq!(gantry_execute(&mut gv, &path(&cfg), 0.0).unwrap_err(), SimError::Gantry(GantryError::NotHomed));
    }

    #[test]
    fn out_of_limits_path() {
        let (cfg, mut gv) = gantry();
        gv.home(0.0).unwrap();
        let mut p = path(&cfg);
        p.waypoints[3].x = 0.47;
        assert!(matches!(gantry_execute(&mut gv, &p, 0.0), Err(SimError::Gantry(GantryError::OutOfLimits { .. }))));
    }

    #[test]
    fn end_stops_follow_pose() {
        let (_, mut gv) = gantry();
        gv.home(0.0).unwrap();
        assert!(gv.end_stops().at_home());
        gv.move_to(0.0, Point2::new(0.1, 0.03), 0.05).unwrap();
        assert_eq!(gv.end_stops(), EndStops { x: false, y: true, z: true });
        gv.plunge(0.0, Point2::new(0.1, 0.1), 0.02).unwrap();
        assert_eq!(gv.end_stops(), EndStops { x: false, y: false, z: false });
    }

    #[test]
    fn stuck_end_stop_is_reported() {
        let (cfg, mut gv) = gantry();
        gv.home(0.0).unwrap();
        gv.end_stop_fault = true;
        assert_eq!(
            gantry_execute(&mut gv, &path(&cfg), 0.0).unwrap_err(),
            SimError::Gantry(GantryError::EndStopNotReached)
        );
        assert!(!gv.is_homed());
    }

    #[test]
    fn track_records_plunged_motion() {
        let (cfg, mut gv) = gantry();
        gv.home(0.0).unwrap();
        let p = path(&cfg);
        gantry_execute(&mut gv, &p, 0.0).unwrap();
        let track = gv.take_track();
        assert_eq!(track.len(), 1);
        assert_eq!(track[0], p.waypoints);
    }
}
