//! Time-ordered multi-stream event log for one person.

mod event;
mod jsonl;

pub use event::*;
pub use jsonl::{event_from_value, event_to_value, export_jsonl, import_jsonl, parse_event_line, SCHEMA_VERSION};

use thiserror::Error;

use crate::time::Timestamp;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChronicleError {
    #[error("duplicate event id `{0}`")]
    DuplicateId(String),
    #[error("invalid event: {}", .0.join("; "))]
    InvalidEvent(Vec<String>),
    #[error("invalid range: from {from} is after to {to}")]
    InvalidRange { from: Timestamp, to: Timestamp },
    #[error("line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("line {line}: schema_version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { line: usize, found: i64, expected: i64 },
    #[error("io: {0}")]
    Io(String),
}

/// Events sorted by `(start, event_id)` with unique ids.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Chronicle {
    user_id: String,
    events: Vec<Event>,
}

impl Chronicle {
    pub fn new(user_id: &str) -> Self {
        Chronicle {
            user_id: user_id.into(),
            events: Vec::new(),
        }
    }

    /// Builds a chronicle from events in any order.
    pub fn from_events(user_id: &str, events: impl IntoIterator<Item = Event>) -> Result<Self, ChronicleError> {
        let mut c = Chronicle::new(user_id);
        for e in events {
            c.append(e)?;
        }
        Ok(c)
    }

    pub fn user_id(&self) -> &str {
        &self.user_id
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn get(&self, event_id: &str) -> Option<&Event> {
        self.events.iter().find(|e| e.id() == event_id)
    }

    pub fn contains_id(&self, event_id: &str) -> bool {
        self.get(event_id).is_some()
    }

    /// Checks an event against the type invariants and this chronicle.
    pub fn check(&self, event: &Event) -> Result<(), ChronicleError> {
        let mut violations = event.validate();
        if !self.user_id.is_empty() && event.user_id() != self.user_id {
            violations.push(format!("user_id `{}` does not match chronicle `{}`", event.user_id(), self.user_id));
        }
        if !violations.is_empty() {
            return Err(ChronicleError::InvalidEvent(violations));
        }
        if self.contains_id(event.id()) {
            return Err(ChronicleError::DuplicateId(event.id().to_string()));
        }
        Ok(())
    }

    pub fn append(&mut self, event: Event) -> Result<(), ChronicleError> {
        self.check(&event)?;
        if self.user_id.is_empty() {
            self.user_id = event.user_id().to_string();
        }
        let key = (event.start(), event.id().to_string());
        let at = self
            .events
            .partition_point(|e| (e.start(), e.id()) < (key.0, key.1.as_str()));
        self.events.insert(at, event);
        Ok(())
    }

    /// Non-mutating append.
    pub fn appended(&self, event: Event) -> Result<Chronicle, ChronicleError> {
        let mut next = self.clone();
        next.append(event)?;
        Ok(next)
    }

    /// Events with start in `[from, to)`, optionally restricted to streams.
    pub fn window_query(
        &self,
        from: Timestamp,
        to: Timestamp,
        streams: Option<&[Stream]>,
    ) -> Result<Vec<&Event>, ChronicleError> {
        if from > to {
            return Err(ChronicleError::InvalidRange { from, to });
        }
        let lo = self.events.partition_point(|e| e.start() < from);
        let hi = self.events.partition_point(|e| e.start() < to);
        Ok(self.events[lo..hi]
            .iter()
            .filter(|e| streams.is_none_or(|s| s.contains(&e.stream())))
            .collect())
    }

    /// First and last start time.
    pub fn span(&self) -> Option<(Timestamp, Timestamp)> {
        Some((self.events.first()?.start(), self.events.last()?.start()))
    }

    /// Number of distinct local calendar days between first and last event, inclusive.
    pub fn span_days(&self) -> i64 {
        match (self.events.first(), self.events.last()) {
            (Some(a), Some(b)) => b.start().local_day(b.tz_offset_min()) - a.start().local_day(a.tz_offset_min()) + 1,
            _ => 0,
        }
    }

    /// Replaces an event in place, keeping order. The id must already exist.
    pub fn replace(&mut self, event: Event) -> Result<(), ChronicleError> {
        let violations = event.validate();
        if !violations.is_empty() {
            return Err(ChronicleError::InvalidEvent(violations));
        }
        let idx = self
            .events
            .iter()
            .position(|e| e.id() == event.id())
            .ok_or_else(|| ChronicleError::InvalidEvent(vec![format!("unknown event id `{}`", event.id())]))?;
        self.events.remove(idx);
        self.append(event)
    }
}
