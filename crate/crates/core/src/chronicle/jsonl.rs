//! JSON Lines codec. One canonical record per line, each carrying
//! `schema_version` and `type`.

use std::io::{BufRead, Write};

use serde_json::{Map, Value};

use super::{Chronicle, ChronicleError, Event, FoodEvent, LifeEvent};

pub const SCHEMA_VERSION: i64 = 1;

pub fn event_to_value(event: &Event) -> Value {
    let (kind, body) = match event {
        Event::Food(f) => ("food", crate::canonical::to_canonical_value(f)),
        Event::Life(l) => ("life", crate::canonical::to_canonical_value(l)),
    };
    let mut map = match body.expect("events serialize") {
        Value::Object(m) => m,
        _ => unreachable!("events serialize to objects"),
    };
    map.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
    map.insert("type".into(), Value::from(kind));
    Value::Object(map)
}

/// Parses one record. `line` is only used in error messages.
pub fn event_from_value(value: Value, line: usize) -> Result<Event, ChronicleError> {
    let parse_err = |reason: String| ChronicleError::ParseError { line, reason };
    let mut map: Map<String, Value> = match value {
        Value::Object(m) => m,
        _ => return Err(parse_err("record is not a JSON object".into())),
    };
    match map.remove("schema_version") {
        None => return Err(parse_err("missing field `schema_version`".into())),
        Some(v) => match v.as_i64() {
            Some(SCHEMA_VERSION) => {}
            Some(found) => {
                return Err(ChronicleError::SchemaVersionMismatch {
                    line,
                    found,
                    expected: SCHEMA_VERSION,
                })
            }
            None => return Err(parse_err("schema_version must be an integer".into())),
        },
    }
    let kind = match map.remove("type") {
        Some(Value::String(s)) => s,
        Some(_) => return Err(parse_err("type must be a string".into())),
        None => return Err(parse_err("missing field `type`".into())),
    };
    let body = Value::Object(map);
    let event = match kind.as_str() {
        "food" => Event::Food(serde_json::from_value::<FoodEvent>(body).map_err(|e| parse_err(e.to_string()))?),
        "life" => Event::Life(serde_json::from_value::<LifeEvent>(body).map_err(|e| parse_err(e.to_string()))?),
        other => return Err(parse_err(format!("unknown type `{other}` (expected food or life)"))),
    };
    Ok(event)
}

impl serde::Serialize for Event {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        event_to_value(self).serialize(serializer)
    }
}

impl<'de> serde::Deserialize<'de> for Event {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        event_from_value(value, 0).map_err(serde::de::Error::custom)
    }
}

pub fn parse_event_line(text: &str, line: usize) -> Result<Event, ChronicleError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ChronicleError::ParseError {
        line,
        reason: e.to_string(),
    })?;
    event_from_value(value, line)
}

/// Reads a chronicle. Blank lines are skipped; line numbers are 1-based.
pub fn import_jsonl<R: BufRead>(reader: R) -> Result<Chronicle, ChronicleError> {
    let mut chronicle = Chronicle::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|e| ChronicleError::Io(e.to_string()))?;
        if text.trim().is_empty() {
            continue;
        }
        let event = parse_event_line(&text, line_no)?;
        chronicle.append(event).map_err(|e| match e {
            ChronicleError::InvalidEvent(v) => ChronicleError::ParseError {
                line: line_no,
                reason: v.join("; "),
            },
            ChronicleError::DuplicateId(id) => ChronicleError::ParseError {
                line: line_no,
                reason: format!("duplicate event id `{id}`"),
            },
            other => other,
        })?;
    }
    Ok(chronicle)
}

pub fn export_jsonl<W: Write>(chronicle: &Chronicle, mut out: W) -> Result<(), ChronicleError> {
    for event in chronicle.events() {
        let line = serde_json::to_string(&event_to_value(event)).expect("values serialize");
        writeln!(out, "{line}").map_err(|e| ChronicleError::Io(e.to_string()))?;
    }
    Ok(())
}
