//! Canonical JSON: sorted object keys, compact separators, integral floats
//! written as integers.
//!
//! `serde_json::Map` is a `BTreeMap` unless the `preserve_order` feature is
//! enabled somewhere in the build, so going through `Value` sorts keys.

use serde::Serialize;
use serde_json::{Number, Value};

const MAX_SAFE_INT: f64 = 9_007_199_254_740_991.0;

fn normalize(v: Value) -> Value {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() && f.fract() == 0.0 && f.abs() <= MAX_SAFE_INT => {
                // -0.0 becomes 0
                Value::Number(Number::from(f as i64))
            }
            _ => Value::Number(n),
        },
        Value::Array(items) => Value::Array(items.into_iter().map(normalize).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, normalize(v))).collect()),
        other => other,
    }
}

pub fn to_canonical_value<T: Serialize>(value: &T) -> serde_json::Result<Value> {
    serde_json::to_value(value).map(normalize)
}

/// Compact canonical encoding, no trailing newline.
pub fn to_canonical_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    serde_json::to_string(&to_canonical_value(value)?)
}

/// Re-serializes arbitrary JSON text in canonical form.
pub fn canonicalize_str(text: &str) -> serde_json::Result<String> {
    let v: Value = serde_json::from_str(text)?;
    serde_json::to_string(&normalize(v))
}
