//! UTC millisecond timestamps with local-time helpers.
//!
//! Every event carries a fixed UTC offset (minutes) so that "before bedtime"
//! style predicates are evaluated on the wall clock of the person, not UTC.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const MINUTE_MS: i64 = 60_000;
pub const HOUR_MS: i64 = 60 * MINUTE_MS;
pub const DAY_MS: i64 = 24 * HOUR_MS;
pub const MINUTES_PER_DAY: i64 = 1440;

/// Milliseconds since the Unix epoch, UTC.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn from_millis(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub fn millis(self) -> i64 {
        self.0
    }

    /// Midnight UTC of the given calendar date.
    pub fn from_date(date: NaiveDate) -> Self {
        let dt = date.and_hms_opt(0, 0, 0).expect("midnight is valid").and_utc();
        Timestamp(dt.timestamp_millis())
    }

    pub fn plus_ms(self, ms: i64) -> Self {
        Timestamp(self.0 + ms)
    }

    /// Days since the epoch on the local calendar.
    pub fn local_day(self, tz_offset_min: i32) -> i64 {
        (self.0 + tz_offset_min as i64 * MINUTE_MS).div_euclid(DAY_MS)
    }

    /// Minute of the local day in `0..1440`.
    pub fn local_minute_of_day(self, tz_offset_min: i32) -> i64 {
        (self.0 + tz_offset_min as i64 * MINUTE_MS).rem_euclid(DAY_MS) / MINUTE_MS
    }

    /// Saturday or Sunday on the local calendar.
    pub fn is_local_weekend(self, tz_offset_min: i32) -> bool {
        let day = self.local_day(tz_offset_min);
        // 1970-01-01 was a Thursday; Monday = 0.
        let weekday = (day + 3).rem_euclid(7);
        weekday >= 5
    }

    /// Start of the given local day, as a UTC instant.
    pub fn local_day_start(day: i64, tz_offset_min: i32) -> Self {
        Timestamp(day * DAY_MS - tz_offset_min as i64 * MINUTE_MS)
    }

    pub fn to_rfc3339(self) -> String {
        match DateTime::<Utc>::from_timestamp_millis(self.0) {
            Some(dt) => dt.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string(),
            None => format!("{}ms", self.0),
        }
    }

    pub fn date_string(self, tz_offset_min: i32) -> String {
        let local = Timestamp(self.0 + tz_offset_min as i64 * MINUTE_MS);
        match DateTime::<Utc>::from_timestamp_millis(local.0) {
            Some(dt) => format!("{:04}-{:02}-{:02}", dt.year(), dt.month(), dt.day()),
            None => String::new(),
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_rfc3339())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid timestamp `{0}`: expected RFC 3339")]
pub struct TimestampParseError(pub String);

impl FromStr for Timestamp {
    type Err = TimestampParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            return Ok(Timestamp(dt.timestamp_millis()));
        }
        if let Ok(date) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            return Ok(Timestamp::from_date(date));
        }
        Err(TimestampParseError(s.to_string()))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_rfc3339())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses durations like `90m`, `12h`, `2d`, `45min` or a bare number of minutes.
pub fn parse_duration_ms(s: &str) -> Option<i64> {
    let s = s.trim();
    let split = s.find(|c: char| !(c.is_ascii_digit() || c == '.')).unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let value: f64 = num.parse().ok()?;
    let scale = match unit.trim() {
        "" | "m" | "min" | "mins" => MINUTE_MS,
        "ms" => 1,
        "s" => 1000,
        "h" | "hr" | "hrs" => HOUR_MS,
        "d" | "day" | "days" => DAY_MS,
        _ => return None,
    };
    let ms = value * scale as f64;
    if ms.is_finite() && ms >= 0.0 {
        Some(ms.round() as i64)
    } else {
        None
    }
}

/// Minutes after local noon; evening and early-morning clock times stay
/// contiguous, which is what bedtime arithmetic needs.
pub fn minutes_after_noon(minute_of_day: i64) -> i64 {
    (minute_of_day - 720).rem_euclid(MINUTES_PER_DAY)
}

pub fn minute_of_day_from_after_noon(after_noon: i64) -> i64 {
    (after_noon + 720).rem_euclid(MINUTES_PER_DAY)
}
