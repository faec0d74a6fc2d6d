use chrono::{DateTime, Duration, FixedOffset, NaiveTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

/// Local wall-clock time of the daily aeration, `HH:MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DailyTime {
    pub hour: u8,
    pub minute: u8,
}

impl DailyTime {
    pub fn new(hour: u8, minute: u8) -> Result<Self, String> {
        if hour > 23 || minute > 59 {
            return Err(format!("{hour:02}:{minute:02} is not a valid time of day"));
        }
        Ok(DailyTime { hour, minute })
    }
}

impl std::str::FromStr for DailyTime {
    type Err = String;

    /// Accepts `H:M` with one or two digits per field.
    fn from_str(s: &str) -> Result<Self, String> {
        let (h, m) = s.trim().split_once(':').ok_or_else(|| format!("expected HH:MM, got {s:?}"))?;
        let field = |f: &str| -> Result<u8, String> {
            if f.is_empty() || f.len() > 2 || !f.bytes().all(|b| b.is_ascii_digit()) {
                return Err(format!("expected HH:MM, got {s:?}"));
            }
            f.parse().map_err(|_| format!("expected HH:MM, got {s:?}"))
        };
        DailyTime::new(field(h)?, field(m)?)
    }
}

impl std::fmt::Display for DailyTime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:02}:{:02}", self.hour, self.minute)
    }
}

impl Serialize for DailyTime {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DailyTime {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Daily trigger in a fixed local time zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub time: DailyTime,
    pub offset: FixedOffset,
}

impl Schedule {
    pub fn new(time: DailyTime, utc_offset_minutes: i32) -> Self {
        let offset = FixedOffset::east_opt(utc_offset_minutes * 60).unwrap_or_else(|| FixedOffset::east_opt(0).unwrap());
        Schedule { time, offset }
    }

    pub fn utc(time: DailyTime) -> Self {
        Schedule::new(time, 0)
    }

    /// The trigger instant on the local calendar day containing `now`.
    pub fn trigger_on_day_of(&self, now: DateTime<Utc>) -> DateTime<Utc> {
        let local_day = now.with_timezone(&self.offset).date_naive();
        let t = NaiveTime::from_hms_opt(self.time.hour as u32, self.time.minute as u32, 0).expect("validated");
        self.offset
            .from_local_datetime(&local_day.and_time(t))
            .single()
            .expect("fixed offsets are unambiguous")
            .with_timezone(&Utc)
    }

    /// First trigger instant strictly after `now`.
    pub fn next_trigger_after(&self, now: DateTime<Utc>) -> DateTime<Utc> {
        let today = self.trigger_on_day_of(now);
        if today > now {
            today
        } else {
            today + Duration::days(1)
        }
    }

    pub fn local_day(&self, t: DateTime<Utc>) -> chrono::NaiveDate {
        t.with_timezone(&self.offset).date_naive()
    }
}

/// True when today's trigger instant has passed and no aeration has run
/// since it. A skipped instant (clock jump, power loss) is caught up once;
/// recording the run moves `last_aeration` past the instant so the rest of
/// the day stays false.
pub fn schedule_due(schedule: &Schedule, last_aeration: Option<DateTime<Utc>>, now: DateTime<Utc>) -> bool {
    let trigger = schedule.trigger_on_day_of(now);
    now >= trigger && last_aeration.is_none_or(|last| last < trigger)
}
