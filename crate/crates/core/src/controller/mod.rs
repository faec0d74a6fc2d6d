//! The rearing state machine: daily timer-driven aeration, periodic sensor
//! logging, operator commands and the aeration sequence itself.
//!
//! `Controller::tick` is the only mutator. Each call makes exactly one
//! transition (possibly a self-transition) and reports at most one action.
//! Commands are consumed one per tick in FIFO order.

pub mod gantry;
pub mod log;
pub mod schedule;

pub use gantry::{EndStops, Gantry, GantryError, Pose};
pub use log::{parse_log, slice_log, CsvLogger, FileSink, LogError, LogSink, MemorySink, LOG_HEADER};
pub use schedule::{schedule_due, DailyTime, Schedule};

use std::collections::VecDeque;
use std::fmt;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::model::{Config, PathMode, SensorFrame};
use crate::planner::{path_length, plan_for_config, ImageToBin, ToolPath};
use crate::trace::{Event, TraceEvent};
use crate::vision::ComponentSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Idle,
    Aerating,
    Sensing,
    Fault,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Idle => "IDLE",
            Mode::Aerating => "AERATING",
            Mode::Sensing => "SENSING",
            Mode::Fault => "FAULT",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AerationPhase {
    Homing,
    Plunging,
    Mixing,
    Retracting,
    Returning,
    None,
}

impl fmt::Display for AerationPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AerationPhase::Homing => "HOMING",
            AerationPhase::Plunging => "PLUNGING",
            AerationPhase::Mixing => "MIXING",
            AerationPhase::Retracting => "RETRACTING",
            AerationPhase::Returning => "RETURNING",
            AerationPhase::None => "NONE",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    AerateNow,
    SetSchedule(DailyTime),
    SetPathMode(PathMode),
    Stop,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    StartAeration,
    LogFrame(SensorFrame),
    EmitTelemetry,
}

#[derive(Debug, Clone, Default)]
pub struct TickInputs {
    /// Latest sensor reading, if one is available this tick.
    pub sensor: Option<SensorFrame>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub from: (Mode, AerationPhase),
    pub to: (Mode, AerationPhase),
    pub action: Option<Action>,
    /// Command consumed this tick, if any.
    pub command: Option<Command>,
}

/// Acceptable sensor ranges. Readings outside them raise alerts in the
/// status snapshot; aeration is never withheld because of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvLimits {
    pub temperature: (f64, f64),
    pub moisture: (f64, f64),
    pub ph: (f64, f64),
    pub co2_max: f64,
    pub no2_max: f64,
}

impl Default for EnvLimits {
    fn default() -> Self {
        EnvLimits { temperature: (20.0, 40.0), moisture: (0.3, 0.8), ph: (6.0, 9.0), co2_max: 5000.0, no2_max: 1.0 }
    }
}

impl EnvLimits {
    pub fn alerts(&self, f: &SensorFrame) -> Vec<String> {
        let mut out = Vec::new();
        let mut range = |name: &str, v: f64, (lo, hi): (f64, f64)| {
            if v < lo || v > hi {
                out.push(format!("{name} {v:.2} outside {lo}..{hi}"));
            }
        };
        range("temperature", f.temperature, self.temperature);
        range("moisture", f.moisture, self.moisture);
        range("ph", f.ph, self.ph);
        if f.co2 > self.co2_max {
            out.push(format!("co2 {:.0} ppm above {}", f.co2, self.co2_max));
        }
        if f.no2 > self.no2_max {
            out.push(format!("no2 {:.3} ppm above {}", f.no2, self.no2_max));
        }
        out
    }
}

fn secs(t: DateTime<Utc>) -> f64 {
    t.timestamp_millis() as f64 / 1000.0
}

#[derive(Debug, Clone)]
struct Run {
    path: ToolPath,
    /// Sim time at which the current gantry operation completes.
    busy_until: f64,
    phase_started: f64,
    next_segment: usize,
}

pub struct Controller<G: Gantry> {
    cfg: Config,
    gantry: G,
    schedule: Schedule,
    path_mode: PathMode,
    mode: Mode,
    phase: AerationPhase,
    last_aeration: Option<DateTime<Utc>>,
    now: Option<DateTime<Utc>>,
    boot: Option<DateTime<Utc>>,
    next_log: Option<DateTime<Utc>>,
    latest_frame: Option<SensorFrame>,
    alerts: Vec<String>,
    limits: EnvLimits,
    fault: Option<String>,
    clusters: Option<(ComponentSet, ImageToBin)>,
    run: Option<Run>,
    last_path: Option<ToolPath>,
    trace: Vec<TraceEvent>,
}

impl<G: Gantry> Controller<G> {
    pub fn new(cfg: Config, gantry: G) -> Self {
        let schedule = Schedule::new(cfg.schedule.aeration_time, cfg.schedule.utc_offset_minutes);
        let path_mode = cfg.planner.mode;
        Controller {
            cfg,
            gantry,
            schedule,
            path_mode,
            mode: Mode::Idle,
            phase: AerationPhase::None,
            last_aeration: None,
            now: None,
            boot: None,
            next_log: None,
            latest_frame: None,
            alerts: Vec::new(),
            limits: EnvLimits::default(),
            fault: None,
            clusters: None,
            run: None,
            last_path: None,
            trace: Vec::new(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }
    pub fn phase(&self) -> AerationPhase {
        self.phase
    }
    pub fn schedule(&self) -> Schedule {
        self.schedule
    }
    pub fn path_mode(&self) -> PathMode {
        self.path_mode
    }
    pub fn last_aeration(&self) -> Option<DateTime<Utc>> {
        self.last_aeration
    }
    pub fn now(&self) -> Option<DateTime<Utc>> {
        self.now
    }
    pub fn boot_time(&self) -> Option<DateTime<Utc>> {
        self.boot
    }
    pub fn latest_frame(&self) -> Option<&SensorFrame> {
        self.latest_frame.as_ref()
    }
    pub fn alerts(&self) -> &[String] {
        &self.alerts
    }
    pub fn fault(&self) -> Option<&str> {
        self.fault.as_deref()
    }
    pub fn config(&self) -> &Config {
        &self.cfg
    }
    pub fn gantry(&self) -> &G {
        &self.gantry
    }
    pub fn gantry_mut(&mut self) -> &mut G {
        &mut self.gantry
    }
    /// Path of the current or most recent aeration.
    pub fn last_path(&self) -> Option<&ToolPath> {
        self.last_path.as_ref()
    }
    pub fn set_limits(&mut self, limits: EnvLimits) {
        self.limits = limits;
    }

    /// Latest cluster map from the vision pipeline, used by targeted mode.
    pub fn observe_clusters(&mut self, clusters: ComponentSet, map: ImageToBin) {
        self.clusters = Some((clusters, map));
    }

    /// Controller and gantry events since the last call, in time order.
    pub fn drain_trace(&mut self) -> Vec<TraceEvent> {
        self.collect_gantry_events();
        let mut out = std::mem::take(&mut self.trace);
        out.sort_by(|a, b| a.t.total_cmp(&b.t));
        out
    }

    fn collect_gantry_events(&mut self) {
        let ev = self.gantry.drain_events();
        self.trace.extend(ev);
    }

    fn emit(&mut self, t: f64, e: Event) {
        self.collect_gantry_events();
        self.trace.push(TraceEvent::new(t, e));
    }

    /// Without a recorded run, a trigger instant before boot does not count
    /// as missed; only instants the controller was up for are caught up.
    /// A boot landing exactly on the trigger still fires.
    fn schedule_due(&self, now: DateTime<Utc>) -> bool {
        let watermark = self.last_aeration.or(self.boot.map(|b| b - Duration::milliseconds(1)));
        schedule_due(&self.schedule, watermark, now)
    }

    /// Next instant at which `tick` has something to do while idle: the
    /// next sensor log or the next scheduled aeration.
    pub fn next_wakeup(&self, now: DateTime<Utc>) -> DateTime<Utc> {
        let trigger = if self.schedule_due(now) {
            now
        } else {
            self.schedule.next_trigger_after(now)
        };
        self.next_log.map_or(trigger, |l| l.min(trigger)).max(now)
    }

    fn next_log_after(&self, t: DateTime<Utc>, inclusive: bool) -> DateTime<Utc> {
        let every = self.cfg.schedule.sensor_interval_s.max(1) as i64;
        let s = t.timestamp();
        let mut k = s.div_euclid(every) * every;
        if k < s || (k == s && !inclusive) {
            k += every;
        }
        crate::model::utc_from_secs(k)
    }

    pub fn tick(&mut self, now: DateTime<Utc>, inputs: TickInputs, commands: &mut VecDeque<Command>) -> Transition {
        // The injected clock must be monotone; a regression is treated as no elapsed time.
        let now = match self.now {
            Some(prev) if now < prev => prev,
            _ => now,
        };
        if self.boot.is_none() {
            self.boot = Some(now);
            // The boot tick only settles the clock; logging starts at the next slot.
            self.next_log = Some(self.next_log_after(now, false));
        }
        self.now = Some(now);
        if let Some(f) = inputs.sensor {
            self.alerts = self.limits.alerts(&f);
            self.latest_frame = Some(f);
        }
        let from = (self.mode, self.phase);
        let command = commands.pop_front();
        let action = match self.mode {
            Mode::Idle | Mode::Sensing => self.tick_idle(now, command.clone()),
            Mode::Aerating => self.tick_aerating(now, command.clone()),
            Mode::Fault => self.tick_fault(now, command.clone()),
        };
        let to = (self.mode, self.phase);
        if from.0 != to.0 {
            self.emit(secs(now), Event::ModeChange { from: from.0, to: to.0 });
        }
        let action = action.or(if from != to { Some(Action::EmitTelemetry) } else { None });
        Transition { from, to, action, command }
    }

    fn apply_setting(&mut self, c: &Command) -> bool {
        match c {
            Command::SetSchedule(t) => {
                self.schedule = Schedule::new(*t, self.cfg.schedule.utc_offset_minutes);
                true
            }
            Command::SetPathMode(m) => {
                self.path_mode = *m;
                true
            }
            _ => false,
        }
    }

    fn tick_idle(&mut self, now: DateTime<Utc>, command: Option<Command>) -> Option<Action> {
        let mut settings_changed = false;
        match &command {
            Some(Command::AerateNow) => return Some(self.start_aeration(now)),
            Some(c) => settings_changed = self.apply_setting(c),
            None => {}
        }
        if self.schedule_due(now) {
            return Some(self.start_aeration(now));
        }
        if self.mode == Mode::Sensing {
            self.mode = Mode::Idle;
            return None;
        }
        if let (Some(next), Some(frame)) = (self.next_log, self.latest_frame) {
            if now >= next {
                self.next_log = Some(self.next_log_after(now, false));
                self.mode = Mode::Sensing;
                self.emit(secs(now), Event::LogFrame);
                return Some(Action::LogFrame(frame));
            }
        }
        settings_changed.then_some(Action::EmitTelemetry)
    }

    fn tick_fault(&mut self, now: DateTime<Utc>, command: Option<Command>) -> Option<Action> {
        match &command {
            Some(Command::Stop) => {
                self.emit(secs(now), Event::Stop);
                self.fault = None;
                let t = secs(now);
                self.run = Some(Run {
                    path: self.last_path.clone().unwrap_or_else(|| ToolPath {
                        waypoints: Vec::new(),
                        plunge_depth: 0.0,
                        travel_speed: self.cfg.gantry.rapid_speed,
                        spindle_spin_rate: 0.0,
                    }),
                    busy_until: t,
                    phase_started: t,
                    next_segment: 0,
                });
                self.mode = Mode::Aerating;
                self.enter_phase(AerationPhase::Retracting, t);
                None
            }
            Some(c) => {
                self.apply_setting(c);
                None
            }
            None => {
                // Keep logging while faulted; the mode itself does not change.
                if let (Some(next), Some(frame)) = (self.next_log, self.latest_frame) {
                    if now >= next {
                        self.next_log = Some(self.next_log_after(now, false));
                        self.emit(secs(now), Event::LogFrame);
                        return Some(Action::LogFrame(frame));
                    }
                }
                None
            }
        }
    }

    fn start_aeration(&mut self, now: DateTime<Utc>) -> Action {
        let t = secs(now);
        self.last_aeration = Some(now);
        let clusters = self.clusters.as_ref().map(|(c, m)| (c, m));
        let planned = plan_for_config(&self.cfg, self.path_mode, clusters);
        self.mode = Mode::Aerating;
        match planned {
            Ok(path) => {
                self.emit(
                    t,
                    Event::StartAeration { mode: self.path_mode, length: path_length(&path), speed: path.travel_speed },
                );
                self.last_path = Some(path.clone());
                self.run = Some(Run {
                    path,
                    busy_until: t,
                    phase_started: t,
                    next_segment: 0,
                });
                self.enter_phase(AerationPhase::Homing, t);
            }
            Err(e) => {
                self.emit(t, Event::StartAeration { mode: self.path_mode, length: 0.0, speed: 0.0 });
                self.enter_fault(t, format!("planning failed: {e}"));
            }
        }
        Action::StartAeration
    }

    fn enter_fault(&mut self, t: f64, cause: String) {
        self.gantry.spin(t, false, 0.0);
        self.emit(t, Event::Fault { cause: cause.clone() });
        self.fault = Some(cause);
        self.mode = Mode::Fault;
        self.phase = AerationPhase::None;
        self.run = None;
    }

    /// Enters `phase` and issues its first gantry operation at time `t`.
    fn enter_phase(&mut self, phase: AerationPhase, t: f64) {
        self.phase = phase;
        self.emit(t, Event::Phase(phase));
        let Some(mut run) = self.run.take() else { return };
        run.phase_started = t;
        run.busy_until = t;
        let g = &mut self.gantry;
        let result = match phase {
            AerationPhase::Homing => g.home(t),
            AerationPhase::Plunging => match run.path.waypoints.first() {
                Some(&start) => g.plunge(t, start, run.path.plunge_depth).inspect(|&d| {
                    g.spin(t + d, true, run.path.spindle_spin_rate);
                }),
                None => Ok(0.0),
            },
            AerationPhase::Mixing => {
                run.next_segment = 1;
                Ok(0.0)
            }
            AerationPhase::Retracting => {
                g.spin(t, false, 0.0);
                g.retract(t)
            }
            AerationPhase::Returning => g.home(t),
            AerationPhase::None => Ok(0.0),
        };
        match result {
            Ok(d) => {
                run.busy_until = t + d;
                self.run = Some(run);
            }
            Err(e) => self.enter_fault(t, format!("{phase}: {e}")),
        }
    }

    fn tick_aerating(&mut self, now: DateTime<Utc>, command: Option<Command>) -> Option<Action> {
        let t = secs(now);
        match &command {
            Some(Command::Stop) => {
                self.emit(t, Event::Stop);
                if matches!(self.phase, AerationPhase::Homing | AerationPhase::Plunging | AerationPhase::Mixing) {
                    // Safe abort: lift the spindle before travelling home.
                    self.enter_phase(AerationPhase::Retracting, t);
                    return None;
                }
            }
            Some(c) => {
                // AERATE_NOW while already aerating is a no-op.
                self.apply_setting(c);
            }
            None => {}
        }
        let run = self.run.as_ref().expect("aerating without a run");
        let (busy_until, phase_started) = (run.busy_until, run.phase_started);
        let timeout = self.cfg.schedule.end_stop_timeout_s;
        match self.phase {
            AerationPhase::Homing | AerationPhase::Returning => {
                if t < busy_until {
                    return None;
                }
                if self.gantry.end_stops().at_home() && self.gantry.is_homed() {
                    let done_at = busy_until;
                    if self.phase == AerationPhase::Homing {
                        self.enter_phase(AerationPhase::Plunging, done_at.max(phase_started));
                    } else {
                        self.finish_run();
                    }
                } else if t - phase_started >= timeout {
                    let phase = self.phase;
                    self.enter_fault(t, format!("end stop not reached during {phase} within {timeout} s"));
                }
                None
            }
            AerationPhase::Plunging => {
                if t >= busy_until {
                    self.enter_phase(AerationPhase::Mixing, busy_until);
                }
                None
            }
            AerationPhase::Mixing => {
                self.stream_segments(t);
                let run = self.run.as_ref()?;
                if run.next_segment >= run.path.waypoints.len() && t >= run.busy_until {
                    let at = run.busy_until;
                    self.enter_phase(AerationPhase::Retracting, at);
                }
                None
            }
            AerationPhase::Retracting => {
                if t >= busy_until {
                    self.enter_phase(AerationPhase::Returning, busy_until);
                }
                None
            }
            AerationPhase::None => None,
        }
    }

    /// Issues every path segment whose start time has arrived.
    fn stream_segments(&mut self, t: f64) {
        let Some(mut run) = self.run.take() else { return };
        while run.next_segment < run.path.waypoints.len() && run.busy_until <= t {
            let target = run.path.waypoints[run.next_segment];
            match self.gantry.move_to(run.busy_until, target, run.path.travel_speed) {
                Ok(d) => {
                    run.busy_until += d;
                    run.next_segment += 1;
                }
                Err(e) => {
                    self.enter_fault(t, format!("MIXING: {e}"));
                    return;
                }
            }
        }
        self.run = Some(run);
    }

    fn finish_run(&mut self) {
        self.run = None;
        self.phase = AerationPhase::None;
        self.mode = Mode::Idle;
    }

    /// Immutable view of the controller after the latest tick.
    pub fn snapshot(&self) -> ControllerView {
        ControllerView {
            mode: self.mode,
            aeration_phase: self.phase,
            pose: self.gantry.pose(),
            end_stops: self.gantry.end_stops(),
            spindle_spinning: self.gantry.spindle_spinning(),
            latest_frame: self.latest_frame,
            schedule: self.schedule.time,
            path_mode: self.path_mode,
            last_aeration: self.last_aeration,
            fault: self.fault.clone(),
            alerts: self.alerts.clone(),
            now: self.now,
            uptime_s: match (self.boot, self.now) {
                (Some(b), Some(n)) => (n - b).num_milliseconds() as f64 / 1000.0,
                _ => 0.0,
            },
        }
    }
}

/// Controller fields exposed to telemetry.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerView {
    pub mode: Mode,
    pub aeration_phase: AerationPhase,
    pub pose: Pose,
    pub end_stops: EndStops,
    pub spindle_spinning: bool,
    pub latest_frame: Option<SensorFrame>,
    pub schedule: DailyTime,
    pub path_mode: PathMode,
    pub last_aeration: Option<DateTime<Utc>>,
    pub fault: Option<String>,
    pub alerts: Vec<String>,
    pub now: Option<DateTime<Utc>>,
    pub uptime_s: f64,
}

/// One tick per `step` from `from` until `until`, collecting transitions.
/// Handy for tests and scripted runs where no world model is needed.
pub fn run_ticks<G: Gantry>(
    c: &mut Controller<G>,
    from: DateTime<Utc>,
    until: DateTime<Utc>,
    step: Duration,
    commands: &mut VecDeque<Command>,
) -> Vec<Transition> {
    let mut out = Vec::new();
    let mut t = from;
    while t <= until {
        out.push(c.tick(t, TickInputs::default(), commands));
        t += step;
    }
    out
}
