//! Append-only CSV sensor log.
//!
//! Columns and precision: `timestamp` ISO-8601 UTC to the second,
//! `temp_c` 2 decimals, `humidity_pct` 2, `moisture` 4, `ph` 3,
//! `co2_ppm` 1, `no2_ppm` 4, and `mode` is the controller mode the frame
//! was captured in.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use thiserror::Error;

use super::Mode;
use crate::model::{iso8601, parse_iso8601, utc_from_secs, SensorFrame};

pub const LOG_HEADER: &str = "timestamp,temp_c,humidity_pct,moisture,ph,co2_ppm,no2_ppm,mode";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("frame at {got} is older than the last logged frame at {last}")]
    OutOfOrder { last: String, got: String },
    #[error("frame has a non-finite field")]
    NonFinite,
    #[error("log sink write failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed log line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Storage behind a `CsvLogger`.
pub trait LogSink {
    fn read_all(&self) -> std::io::Result<String>;
    /// Appends `text` in one write.
    fn append(&mut self, text: &str) -> std::io::Result<()>;
}

#[derive(Debug, Default, Clone)]
pub struct MemorySink {
    pub text: String,
}

impl LogSink for MemorySink {
    fn read_all(&self) -> std::io::Result<String> {
        Ok(self.text.clone())
    }

    fn append(&mut self, text: &str) -> std::io::Result<()> {
        self.text.push_str(text);
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FileSink {
    path: PathBuf,
}

impl FileSink {
    pub fn new(path: impl AsRef<Path>) -> Self {
        FileSink { path: path.as_ref().to_path_buf() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl LogSink for FileSink {
    fn read_all(&self) -> std::io::Result<String> {
        match std::fs::read_to_string(&self.path) {
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(String::new()),
            other => other,
        }
    }

    fn append(&mut self, text: &str) -> std::io::Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        f.write_all(text.as_bytes())?;
        f.flush()
    }
}

/// Rounds every field to the precision the log stores, so a quantized
/// frame survives a write/parse round trip unchanged.
pub fn quantize(f: &SensorFrame) -> SensorFrame {
    let q = |v: f64, d: i32| {
        let s = 10f64.powi(d);
        (v * s).round() / s
    };
    SensorFrame {
        timestamp: f.timestamp,
        temperature: q(f.temperature, 2),
        humidity: q(f.humidity, 2),
        moisture: q(f.moisture, 4),
        ph: q(f.ph, 3),
        co2: q(f.co2, 1),
        no2: q(f.no2, 4),
    }
}

pub fn format_row(f: &SensorFrame, mode: Mode) -> String {
    format!(
        "{},{:.2},{:.2},{:.4},{:.3},{:.1},{:.4},{}\n",
        iso8601(utc_from_secs(f.timestamp)),
        f.temperature,
        f.humidity,
        f.moisture,
        f.ph,
        f.co2,
        f.no2,
        mode
    )
}

pub struct CsvLogger<S: LogSink> {
    sink: S,
    last: Option<i64>,
    rows: usize,
}

impl<S: LogSink> CsvLogger<S> {
    /// Wraps `sink`, picking up the last timestamp of any existing log.
    pub fn new(sink: S) -> Result<Self, LogError> {
        let existing = sink.read_all()?;
        let rows = parse_log(&existing)?;
        let last = rows.last().map(|(f, _)| f.timestamp);
        Ok(CsvLogger { sink, last, rows: rows.len() })
    }

    /// Appends one row; the header is written first when the log is empty.
    /// Equal timestamps are accepted, older ones rejected.
    pub fn log_frame(&mut self, frame: &SensorFrame, mode: Mode) -> Result<(), LogError> {
        if let Some(last) = self.last {
            if frame.timestamp < last {
                return Err(LogError::OutOfOrder {
                    last: iso8601(utc_from_secs(last)),
                    got: iso8601(utc_from_secs(frame.timestamp)),
                });
            }
        }
        let fields = [frame.temperature, frame.humidity, frame.moisture, frame.ph, frame.co2, frame.no2];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(LogError::NonFinite);
        }
        let mut text = String::new();
        if self.rows == 0 && self.sink.read_all()?.is_empty() {
            text.push_str(LOG_HEADER);
            text.push('\n');
        }
        text.push_str(&format_row(frame, mode));
        self.sink.append(&text)?;
        self.last = Some(frame.timestamp);
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn sink(&self) -> &S {
        &self.sink
    }
}

fn parse_mode(s: &str) -> Option<Mode> {
    Some(match s {
        "IDLE" => Mode::Idle,
        "AERATING" => Mode::Aerating,
        "SENSING" => Mode::Sensing,
        "FAULT" => Mode::Fault,
        _ => return None,
    })
}

/// Parses a whole log. An empty text is an empty log.
pub fn parse_log(text: &str) -> Result<Vec<(SensorFrame, Mode)>, LogError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        None => return Ok(Vec::new()),
        Some((_, h)) if h == LOG_HEADER => {}
        Some((_, h)) => return Err(LogError::Parse { line: 1, reason: format!("unexpected header {h:?}") }),
    }
    lines
        .map(|(i, l)| {
            let err = |reason: &str| LogError::Parse { line: i + 1, reason: reason.to_string() };
            let cols: Vec<&str> = l.split(',').collect();
            if cols.len() != 8 {
                return Err(err("expected 8 columns"));
            }
            let ts = parse_iso8601(cols[0]).ok_or_else(|| err("bad timestamp"))?;
            let num = |j: usize| cols[j].parse::<f64>().map_err(|_| err("bad number"));
            let frame = SensorFrame {
                timestamp: ts.timestamp(),
                temperature: num(1)?,
                humidity: num(2)?,
                moisture: num(3)?,
                ph: num(4)?,
                co2: num(5)?,
                no2: num(6)?,
            };
            let mode = parse_mode(cols[7]).ok_or_else(|| err("bad mode"))?;
            Ok((frame, mode))
        })
        .collect()
}

/// Rows with `since <= timestamp < until`. The header is included only when
/// `since` is absent, so adjacent windows concatenate to the full log.
pub fn slice_log(text: &str, since: Option<DateTime<Utc>>, until: Option<DateTime<Utc>>) -> String {
    let mut out = String::new();
    for (i, line) in text.split_inclusive('\n').enumerate() {
        if i == 0 {
            if since.is_none() {
                out.push_str(line);
            }
            continue;
        }
        let ts = line.split(',').next().and_then(parse_iso8601);
        let keep = match ts {
            Some(t) => since.is_none_or(|s| t >= s) && until.is_none_or(|u| t < u),
            None => false,
        };
        if keep {
            out.push_str(line);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(t: i64) -> SensorFrame {
        SensorFrame { timestamp: t, temperature: 27.31, humidity: 61.5, moisture: 0.6123, ph: 7.25, co2: 812.4, no2: 0.0312 }
    }

    #[test]
    fn first_frame_writes_header() {
        let mut log = CsvLogger::new(MemorySink::default()).unwrap();
        log.log_frame(&frame(1714561200), Mode::Idle).unwrap();
        assert_eq!(
            log.sink().text,
            format!("{LOG_HEADER}\n2024-05-01T11:00:00Z,27.31,61.50,0.6123,7.250,812.4,0.0312,IDLE\n")
        );
    }

    #[test]
    fn equal_timestamps_accepted_older_rejected() {
        let mut log = CsvLogger::new(MemorySink::default()).unwrap();
        log.log_frame(&frame(100), Mode::Idle).unwrap();
        log.log_frame(&frame(100), Mode::Fault).unwrap();
        assert!(matches!(log.log_frame(&frame(99), Mode::Idle), Err(LogError::OutOfOrder { .. })));
        let rows = parse_log(&log.sink().text).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].1, Mode::Fault);
    }

    #[test]
    fn file_sink_resumes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        CsvLogger::new(FileSink::new(&path)).unwrap().log_frame(&frame(100), Mode::Idle).unwrap();
        let mut again = CsvLogger::new(FileSink::new(&path)).unwrap();
        assert_eq!(again.rows(), 1);
        assert!(again.log_frame(&frame(50), Mode::Idle).is_err());
        again.log_frame(&frame(200), Mode::Idle).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().filter(|l| *l == LOG_HEADER).count(), 1);
        assert_eq!(parse_log(&text).unwrap().len(), 2);
    }

    #[test]
    fn unwritable_sink_errors() {
        let mut log = CsvLogger::new(FileSink::new("/nonexistent-dir/x/log.csv")).unwrap();
        assert!(matches!(log.log_frame(&frame(1), Mode::Idle), Err(LogError::Io(_))));
    }

    #[test]
    fn rejects_non_finite() {
        let mut log = CsvLogger::new(MemorySink::default()).unwrap();
        let mut f = frame(1);
        f.co2 = f64::NAN;
        assert!(matches!(log.log_frame(&f, Mode::Idle), Err(LogError::NonFinite)));
    }

    fn arb_frame() -> impl Strategy<Value = SensorFrame> {
        (0i64..4_000_000_000, -20.0..60.0f64, 0.0..100.0f64, 0.0..1.0f64, 0.0..14.0f64, 0.0..20000.0f64, 0.0..5.0f64)
            .prop_map(|(t, a, b, c, d, e, g)| quantize(&SensorFrame { timestamp: t, temperature: a, humidity: b, moisture: c, ph: d, co2: e, no2: g }))
    }

    proptest! {
        #[test]
        fn rows_round_trip(mut frames in proptest::collection::vec(arb_frame(), 1..40)) {
            frames.sort_by_key(|f| f.timestamp);
            let mut log = CsvLogger::new(MemorySink::default()).unwrap();
            for f in &frames {
                log.log_frame(f, Mode::Idle).unwrap();
            }
            let back: Vec<SensorFrame> = parse_log(&log.sink().text).unwrap().into_iter().map(|(f, _)| f).collect();
            prop_assert_eq!(back, frames);
        }

        #[test]
        fn windows_concatenate(ts in proptest::collection::vec(0i64..100_000, 0..30), cuts in proptest::collection::vec(0i64..100_000, 0..5)) {
            let mut ts = ts;
            ts.sort();
            let mut log = CsvLogger::new(MemorySink::default()).unwrap();
            for &t in &ts {
                log.log_frame(&frame(t), Mode::Idle).unwrap();
            }
            let text = log.sink().text.clone();
            let mut cuts = cuts;
            cuts.sort();
            let bounds: Vec<Option<DateTime<Utc>>> = std::iter::once(None)
                .chain(cuts.iter().map(|&c| Some(utc_from_secs(c))))
                .chain(std::iter::once(None))
                .collect();
            let joined: String = bounds.windows(2).map(|w| slice_log(&text, w[0], w[1])).collect();
            prop_assert_eq!(joined, text);
        }
    }
}
