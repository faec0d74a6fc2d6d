//! Closed-loop bench rig: the controller driving a virtual gantry over a
//! simulated bin, with sensor logging and thermal frames in the loop.

use std::collections::VecDeque;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::controller::log::quantize;
use crate::controller::{Action, Command, Controller, CsvLogger, MemorySink, Mode, TickInputs, Transition};
use crate::model::{iso8601, write_image, Image, PathMode};
use crate::planner::{path_length, ImageToBin};
use crate::sim::{
    dispersal_index, mix_along, render_thermal, sample_sensors, step_biology, swept_cells, Scenario, SimError,
    SubstrateState, VirtualGantry,
};
use crate::trace::TraceEvent;
use crate::vision::{analyze_frame, analyze_mixing, FrameAnalysis, MixReport, RawThermal};

/// Biology is integrated in chunks of at most this many hours.
const BIOLOGY_CHUNK_H: f64 = 1.0;

#[derive(Debug, Clone, Serialize)]
pub struct AerationRecord {
    pub start: String,
    pub end: String,
    /// Mode the controller settled in: `IDLE` or `FAULT`.
    pub outcome: Mode,
    pub path_mode: PathMode,
    pub path_length_m: f64,
    pub dispersal_before: f64,
    pub dispersal_after: f64,
    /// Fraction of grid cells inside the spindle sweep of the plunged track.
    pub swept_fraction: f64,
    pub mix: Option<MixReport>,
    pub growth_proxy_before: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub start: String,
    pub end: String,
    pub start_aerations: usize,
    pub faults: usize,
    pub log_rows: usize,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub aerations: Vec<AerationRecord>,
}

struct Pending {
    start: DateTime<Utc>,
    before: FrameAnalysis,
    dispersal: f64,
}

/// Saved frame pair of one aeration.
#[derive(Debug, Clone)]
pub struct AerationFrames {
    pub before: FrameAnalysis,
    pub after: FrameAnalysis,
}

pub struct BenchRig {
    pub scenario: Scenario,
    pub controller: Controller<VirtualGantry>,
    pub world: SubstrateState,
    pub logger: CsvLogger<MemorySink>,
    pub commands: VecDeque<Command>,
    trace: Vec<TraceEvent>,
    aerations: Vec<AerationRecord>,
    frames: Vec<AerationFrames>,
    latest: Option<(RawThermal, FrameAnalysis)>,
    latest_at: Option<DateTime<Utc>>,
    rng: ChaCha8Rng,
    now: DateTime<Utc>,
    pending_hours: f64,
    next_frame: DateTime<Utc>,
    pending: Option<Pending>,
    start_count: usize,
    fault_count: usize,
    fault_injected: bool,
    booted: bool,
}

impl BenchRig {
    pub fn new(scenario: Scenario) -> Self {
        let cfg = scenario.config.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        let world = SubstrateState::seeded_clusters(
            &cfg.bin,
            scenario.grid_resolution,
            scenario.initial_mass,
            scenario.initial_moisture,
            scenario.initial_clusters,
            &mut rng,
        );
        let gantry = VirtualGantry::from_config(&cfg);
        let now = scenario.start;
        BenchRig {
            controller: Controller::new(cfg, gantry),
            world,
            logger: CsvLogger::new(MemorySink::default()).expect("empty memory log"),
            commands: VecDeque::new(),
            trace: Vec::new(),
            aerations: Vec::new(),
            frames: Vec::new(),
            latest: None,
            latest_at: None,
            rng,
            now,
            pending_hours: 0.0,
            next_frame: now,
            pending: None,
            start_count: 0,
            fault_count: 0,
            fault_injected: false,
            booted: false,
            scenario,
        }
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.now
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn aerations(&self) -> &[AerationRecord] {
        &self.aerations
    }

    pub fn aeration_frames(&self) -> &[AerationFrames] {
        &self.frames
    }

    pub fn latest_frame(&self) -> Option<&(RawThermal, FrameAnalysis)> {
        self.latest.as_ref()
    }

    pub fn frame_time(&self) -> Option<DateTime<Utc>> {
        self.latest_at
    }

    pub fn start_count(&self) -> usize {
        self.start_count
    }

    fn frame_seed(&self, t: DateTime<Utc>) -> u64 {
        self.scenario.seed.rotate_left(17) ^ t.timestamp() as u64
    }

    fn flush_biology(&mut self) -> Result<(), SimError> {
        while self.pending_hours > 0.0 {
            let dt = self.pending_hours.min(BIOLOGY_CHUNK_H);
            self.world = step_biology(&self.world, dt, &self.scenario.biology, &mut self.rng)?;
            self.pending_hours -= dt;
            if self.pending_hours < 1e-12 {
                self.pending_hours = 0.0;
            }
        }
        Ok(())
    }

    fn capture(&mut self, t: DateTime<Utc>) -> Result<(RawThermal, FrameAnalysis), SimError> {
        self.flush_biology()?;
        let raw = render_thermal(&self.world, &self.scenario.thermal, self.frame_seed(t));
        let analysis = analyze_frame(&raw, &self.scenario.config.vision).expect("valid vision settings");
        Ok((raw, analysis))
    }

    /// Next instant the rig needs to tick at.
    fn next_instant(&self) -> DateTime<Utc> {
        if !self.booted {
            return self.now;
        }
        let busy = matches!(self.controller.mode(), Mode::Aerating | Mode::Sensing) || !self.commands.is_empty();
        if busy {
            return self.now + Duration::seconds(1);
        }
        let mut next = self.controller.next_wakeup(self.now).min(self.next_frame);
        if let Some(f) = self.scenario.fault.end_stop_fail_at {
            if !self.fault_injected && f > self.now {
                next = next.min(f);
            }
        }
        next.max(self.now + Duration::seconds(1))
    }

    /// Advances to the next instant of interest and ticks the controller once.
    pub fn step(&mut self) -> Result<Transition, SimError> {
        let next = self.next_instant();
        self.step_at(next)
    }

    /// Ticks once at `at` (clamped so the clock never runs backwards). Used
    /// when a wall clock, not the rig, decides when ticks happen.
    pub fn step_at(&mut self, at: DateTime<Utc>) -> Result<Transition, SimError> {
        let next = at.max(self.now);
        let dt_h = (next - self.now).num_milliseconds() as f64 / 3_600_000.0;
        self.pending_hours += dt_h;
        if self.pending_hours >= BIOLOGY_CHUNK_H {
            self.flush_biology()?;
        }
        self.now = next;
        self.booted = true;

        if let Some(f) = self.scenario.fault.end_stop_fail_at {
            if !self.fault_injected && next >= f {
                self.controller.gantry_mut().end_stop_fault = true;
                self.fault_injected = true;
            }
        }
        if next >= self.next_frame {
            let (raw, a) = self.capture(next)?;
            self.controller.observe_clusters(a.components.clone(), ImageToBin::for_grid(self.world.resolution));
            self.latest = Some((raw, a));
            self.latest_at = Some(next);
            while self.next_frame <= next {
                self.next_frame += Duration::seconds(self.scenario.frame_interval_s as i64);
            }
        }

        let sensor = sample_sensors(&self.world, next.timestamp(), &self.scenario.sensors, self.scenario.seed);
        let tr = self.controller.tick(next, TickInputs { sensor: Some(sensor) }, &mut self.commands);

        match &tr.action {
            Some(Action::StartAeration) => {
                self.start_count += 1;
                let (_, before) = self.capture(next)?;
                let dispersal = dispersal_index(&self.world)?;
                self.pending = Some(Pending { start: next, before, dispersal });
            }
            Some(Action::LogFrame(f)) => {
                self.logger.log_frame(&quantize(f), tr.from.0).expect("monotone sim clock");
            }
            _ => {}
        }
        if tr.from.0 == Mode::Aerating && tr.to.0 != Mode::Aerating {
            if tr.to.0 == Mode::Fault {
                self.fault_count += 1;
            }
            self.finish_aeration(next, tr.to.0)?;
        } else if tr.to.0 == Mode::Fault && tr.from.0 != Mode::Fault {
            self.fault_count += 1;
        }
        self.trace.extend(self.controller.drain_trace());
        Ok(tr)
    }

    fn finish_aeration(&mut self, t: DateTime<Utc>, outcome: Mode) -> Result<(), SimError> {
        let track = self.controller.gantry_mut().take_track();
        let spec = self.scenario.config.spindle.clone();
        let mut swept = vec![false; self.world.density.len()];
        for line in &track {
            self.world = mix_along(&self.world, line, &spec);
            for (s, c) in swept.iter_mut().zip(swept_cells(&self.world, line, spec.sweep_radius())) {
                *s |= c;
            }
        }
        let Some(p) = self.pending.take() else { return Ok(()) };
        let (_, after) = self.capture(t)?;
        let mix = analyze_mixing(&p.before.normalized, &after.normalized, None, self.scenario.config.vision.mix_delta, None).ok();
        let path = self.controller.last_path();
        self.aerations.push(AerationRecord {
            start: iso8601(p.start),
            end: iso8601(t),
            outcome,
            path_mode: self.controller.path_mode(),
            path_length_m: path.map_or(0.0, path_length),
            dispersal_before: p.dispersal,
            dispersal_after: dispersal_index(&self.world)?,
            swept_fraction: swept.iter().filter(|&&b| b).count() as f64 / swept.len() as f64,
            mix,
            growth_proxy_before: p.before.growth_proxy,
        });
        self.frames.push(AerationFrames { before: p.before, after });
        Ok(())
    }

    /// Runs until `until`, ticking as needed.
    pub fn run_until(&mut self, until: DateTime<Utc>) -> Result<(), SimError> {
        while self.next_instant() <= until {
            self.step()?;
        }
        // Account for growth in the quiet tail.
        self.pending_hours += (until - self.now).num_milliseconds() as f64 / 3_600_000.0;
        self.now = until;
        self.flush_biology()
    }

    pub fn run_days(&mut self, days: u32) -> Result<(), SimError> {
        let until = self.scenario.start + Duration::days(days as i64);
        self.run_until(until)
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            seed: self.scenario.seed,
            start: iso8601(self.scenario.start),
            end: iso8601(self.now),
            start_aerations: self.start_count,
            faults: self.fault_count,
            log_rows: self.logger.rows(),
            initial_mass: self.scenario.initial_mass,
            final_mass: self.world.total_mass,
            aerations: self.aerations.clone(),
        }
    }

    /// Writes `log.csv`, `trace.txt`, `summary.json` and per-aeration
    /// before/after frames (normalized P5 and overlay P6) into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir.join("frames"))?;
        std::fs::write(dir.join("log.csv"), &self.logger.sink().text)?;
        std::fs::write(dir.join("trace.txt"), crate::trace::to_text(&self.trace))?;
        let summary = serde_json::to_string_pretty(&self.summary()).map_err(std::io::Error::other)?;
        std::fs::write(dir.join("summary.json"), summary + "\n")?;
        let save = |img: Image, name: String| write_image(&img, dir.join("frames").join(name)).map_err(std::io::Error::other);
        for (i, f) in self.frames.iter().enumerate() {
            let n = i + 1;
            save(Image::Gray(f.before.normalized.clone()), format!("aeration_{n:02}_before.pgm"))?;
            save(Image::Gray(f.after.normalized.clone()), format!("aeration_{n:02}_after.pgm"))?;
            save(Image::Color(f.before.overlay.clone()), format!("aeration_{n:02}_before_overlay.ppm"))?;
            save(Image::Color(f.after.overlay.clone()), format!("aeration_{n:02}_after_overlay.ppm"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::AerationPhase;

    #[test]
    fn two_day_run() {
        let mut rig = BenchRig::new(Scenario::reference(4, 2));
        let m0 = rig.world.mass();
        rig.run_days(2).unwrap();
        assert_eq!(rig.start_count(), 2);
        let s = rig.summary();
        assert_eq!(s.faults, 0);
        // 2 days · 288 log slots; the slot during each aeration is logged late
        assert!((570..=578).contains(&s.log_rows), "{}", s.log_rows);
        for a in &s.aerations {
            assert!(a.dispersal_after < a.dispersal_before);
            assert!(a.swept_fraction >= 0.84, "{}", a.swept_fraction);
            assert_eq!(a.outcome, Mode::Idle);
        }
        let growth = (std::f64::consts::LN_10 / 288.0 * 48.0).exp();
        assert!((rig.world.total_mass / (m0 * growth) - 1.0).abs() < 1e-9);
        assert!((rig.world.mass() / rig.world.total_mass - 1.0).abs() < 1e-9);
        use AerationPhase::*;
        let phases = crate::trace::phase_sequence(rig.trace());
        assert_eq!(phases, [Homing, Plunging, Mixing, Retracting, Returning].repeat(2));
    }

    #[test]
    fn injected_fault() {
        let text = "seed = 2\ndays = 1\n[fault]\nend_stop_fail_at = \"2024-05-01T11:00:20Z\"\n";
        let mut rig = BenchRig::new(Scenario::parse(text, Path::new(".")).unwrap());
        rig.run_days(1).unwrap();
        assert_eq!(rig.controller.mode(), Mode::Fault);
        assert_eq!(rig.summary().faults, 1);
        assert_eq!(rig.aerations()[0].outcome, Mode::Fault);
    }
}
