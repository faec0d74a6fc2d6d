//! Line-oriented event traces: `t_event EVENT args`, one event per line,
//! `t_event` in Unix seconds with millisecond precision.

use std::fmt;

use crate::controller::{AerationPhase, Mode};
use crate::model::PathMode;

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    StartAeration { mode: PathMode, length: f64, speed: f64 },
    Phase(AerationPhase),
    Plunge { x: f64, y: f64, depth: f64 },
    SpinOn { rate: f64 },
    Move { x: f64, y: f64 },
    SpinOff,
    Retract,
    EndStop { x: f64, y: f64 },
    Home { x: f64, y: f64 },
    Fault { cause: String },
    Stop,
    LogFrame,
    ModeChange { from: Mode, to: Mode },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::StartAeration { .. } => "START_AERATION",
            Event::Phase(_) => "PHASE",
            Event::Plunge { .. } => "PLUNGE",
            Event::SpinOn { .. } => "SPIN_ON",
            Event::Move { .. } => "MOVE",
            Event::SpinOff => "SPIN_OFF",
            Event::Retract => "RETRACT",
            Event::EndStop { .. } => "END_STOP",
            Event::Home { .. } => "HOME",
            Event::Fault { .. } => "FAULT",
            Event::Stop => "STOP",
            Event::LogFrame => "LOG_FRAME",
            Event::ModeChange { .. } => "MODE",
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())?;
        match self {
            Event::StartAeration { mode, length, speed } => write!(f, " {mode} {length:.6} {speed:.6}"),
            Event::Phase(p) => write!(f, " {p}"),
            Event::Plunge { x, y, depth } => write!(f, " {x:.6} {y:.6} {depth:.6}"),
            Event::SpinOn { rate } => write!(f, " {rate:.3}"),
            Event::Move { x, y } | Event::EndStop { x, y } | Event::Home { x, y } => write!(f, " {x:.6} {y:.6}"),
            Event::Fault { cause } => write!(f, " {cause}"),
            Event::ModeChange { from, to } => write!(f, " {from} {to}"),
            Event::SpinOff | Event::Retract | Event::Stop | Event::LogFrame => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    /// Unix seconds.
    pub t: f64,
    pub event: Event,
}

impl TraceEvent {
    pub fn new(t: f64, event: Event) -> Self {
        TraceEvent { t, event }
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} {}", self.t, self.event)
    }
}

pub fn to_text(events: &[TraceEvent]) -> String {
    let mut s = String::new();
    for e in events {
        s.push_str(&e.to_string());
        s.push('\n');
    }
    s
}

/// Phase names in the order they appear in a trace.
pub fn phase_sequence(events: &[TraceEvent]) -> Vec<AerationPhase> {
    events
        .iter()
        .filter_map(|e| match e.event {
            Event::Phase(p) => Some(p),
            _ => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_format() {
        let e = TraceEvent::new(1714561200.0, Event::Move { x: 0.45, y: 0.03 });
        assert_eq!(e.to_string(), "1714561200.000 MOVE 0.450000 0.030000");
        let p = TraceEvent::new(1.5, Event::Phase(AerationPhase::Mixing));
        assert_eq!(p.to_string(), "1.500 PHASE MIXING");
        assert_eq!(to_text(&[p.clone(), p]).lines().count(), 2);
    }
}
