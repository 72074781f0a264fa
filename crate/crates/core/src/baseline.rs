//! Occupancy schedule, the rule-based baseline and constant reference policies.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::plant::ComfortPolicy;

pub const MINUTES_PER_DAY: f64 = 1440.0;
pub const MINUTES_PER_WEEK: f64 = 7.0 * MINUTES_PER_DAY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weekday {
    Mon,
    Tue,
    Wed,
    Thu,
    Fri,
    Sat,
    Sun,
}

impl Weekday {
    pub const ALL: [Weekday; 7] = [Weekday::Mon, Weekday::Tue, Weekday::Wed, Weekday::Thu, Weekday::Fri, Weekday::Sat, Weekday::Sun];

    /// Day 0 of an episode is a Monday.
    pub fn of_day(day: u64) -> Weekday {
        Self::ALL[(day % 7) as usize]
    }
}

/// Minutes after midnight, written `HH:MM` in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ClockTime(pub u32);

impl ClockTime {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("invalid clock time {s:?}, expected HH:MM"));
        let (h, m) = s.trim().split_once(':').ok_or_else(bad)?;
        let h: u32 = h.parse().map_err(|_| bad())?;
        let m: u32 = m.parse().map_err(|_| bad())?;
        if h > 24 || m > 59 || (h == 24 && m != 0) {
            return Err(bad());
        }
        Ok(ClockTime(h * 60 + m))
    }
}

impl std::fmt::Display for ClockTime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:02}:{:02}", self.0 / 60, self.0 % 60)
    }
}

impl Serialize for ClockTime {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClockTime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        ClockTime::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub work_start: ClockTime,
    pub work_end: ClockTime,
    pub workdays: Vec<Weekday>,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { work_start: ClockTime(480), work_end: ClockTime(1020), workdays: Weekday::ALL[..5].to_vec() }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if self.work_start >= self.work_end {
            return Err(Error::Config(format!("schedule: work_start {} must precede work_end {}", self.work_start, self.work_end)));
        }
        if self.workdays.is_empty() {
            return Err(Error::Config("schedule: workdays must not be empty".into()));
        }
        Ok(())
    }

    /// Whether `clock` (minutes since episode start, Monday 00:00) is work time.
    /// The interval is half-open: `[work_start, work_end)`.
    pub fn is_work_time(&self, clock: f64) -> bool {
        let week = clock.rem_euclid(MINUTES_PER_WEEK);
        let day = (week / MINUTES_PER_DAY).floor() as u64;
        let minute = week - day as f64 * MINUTES_PER_DAY;
        self.workdays.contains(&Weekday::of_day(day)) && minute >= self.work_start.0 as f64 && minute < self.work_end.0 as f64
    }
}

/// Comfort on everywhere during work time, off otherwise.
pub fn rbc_policy(clock: f64, schedule: &Schedule, zones: usize) -> Vec<ComfortPolicy> {
    vec![ComfortPolicy::from_bit(schedule.is_work_time(clock)); zones]
}

pub fn always_on_policy(zones: usize) -> Vec<ComfortPolicy> {
    vec![ComfortPolicy::On; zones]
}

pub fn always_off_policy(zones: usize) -> Vec<ComfortPolicy> {
    vec![ComfortPolicy::Off; zones]
}
