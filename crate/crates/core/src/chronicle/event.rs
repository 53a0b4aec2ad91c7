//! Food and life events.
//!
//! A food event follows the how/what/when/where/who/why layout; each field
//! can carry a provenance tag saying whether it was sensed, derived from a
//! knowledge source, or reported by the person.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::enrichment::{NutritionFacts, Weather};
use crate::taste::TasteRegion;
use crate::time::{Timestamp, MINUTE_MS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProvenanceKind {
    Observed,
    Derived,
    Subjective,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: ProvenanceKind,
    pub source: String,
}

impl Provenance {
    pub fn observed(source: &str) -> Self {
        Provenance {
            kind: ProvenanceKind::Observed,
            source: source.into(),
        }
    }

    pub fn derived(source: &str) -> Self {
        Provenance {
            kind: ProvenanceKind::Derived,
            source: source.into(),
        }
    }

    pub fn subjective(source: &str) -> Self {
        Provenance {
            kind: ProvenanceKind::Subjective,
            source: source.into(),
        }
    }
}

/// Event stream. Serialized as a bare string; custom streams as `custom:<label>`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stream {
    Food,
    Sleep,
    Exercise,
    Steps,
    Stress,
    Custom(String),
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stream::Food => f.write_str("food"),
            Stream::Sleep => f.write_str("sleep"),
            Stream::Exercise => f.write_str("exercise"),
            Stream::Steps => f.write_str("steps"),
            Stream::Stress => f.write_str("stress"),
            Stream::Custom(label) => write!(f, "custom:{label}"),
        }
    }
}

impl FromStr for Stream {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "food" => Stream::Food,
            "sleep" => Stream::Sleep,
            "exercise" => Stream::Exercise,
            "steps" => Stream::Steps,
            "stress" => Stream::Stress,
            other => match other.strip_prefix("custom:") {
                Some(label) if !label.is_empty() => Stream::Custom(label.to_string()),
                _ => return Err(format!("unknown stream `{other}`")),
            },
        })
    }
}

impl Serialize for Stream {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Stream {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ingredient {
    pub item_id: String,
    pub grams: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct What {
    #[serde(default)]
    pub dish: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barcode: Option<String>,
    /// Catalog item the dish or barcode resolved to during enrichment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ingredients: Vec<Ingredient>,
    #[serde(default)]
    pub quantity_g: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct When {
    pub eaten_at: Timestamp,
    pub logged_at: Timestamp,
    #[serde(default)]
    pub tz_offset_min: i32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Place {
    #[serde(default)]
    pub place: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Who {
    #[serde(default)]
    pub companions: u32,
    #[serde(default)]
    pub social: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputChannel {
    #[default]
    Text,
    Barcode,
    Api,
    Ui,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Why {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nutrition: Option<NutritionFacts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taste: Option<TasteRegion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weather: Option<Weather>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoodEvent {
    pub event_id: String,
    pub user_id: String,
    pub what: What,
    pub when: When,
    #[serde(rename = "where", default)]
    pub place: Place,
    #[serde(default)]
    pub who: Who,
    #[serde(default)]
    pub how: InputChannel,
    #[serde(default)]
    pub why: Why,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<u8>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub provenance: BTreeMap<String, Provenance>,
    /// Unknown fields, preserved verbatim.
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl FoodEvent {
    /// Heatmap label: the resolved item when known, else the dish name.
    pub fn category(&self) -> String {
        match &self.what.item_id {
            Some(id) => id.clone(),
            None => crate::enrichment::normalize_query(&self.what.dish),
        }
    }

    /// A text-logged meal eaten and logged at the same instant.
    pub fn new(event_id: &str, user_id: &str, dish: &str, eaten_at: Timestamp, tz_offset_min: i32) -> Self {
        FoodEvent {
            event_id: event_id.into(),
            user_id: user_id.into(),
            what: What {
                dish: dish.into(),
                ..Default::default()
            },
            when: When {
                eaten_at,
                logged_at: eaten_at,
                tz_offset_min,
            },
            place: Place::default(),
            who: Who::default(),
            how: InputChannel::Text,
            why: Why::default(),
            rating: None,
            provenance: BTreeMap::new(),
            extra: BTreeMap::new(),
        }
    }

    /// Sets a rating and tags it as person-reported.
    pub fn rated(mut self, rating: u8) -> Self {
        self.rating = Some(rating);
        self.provenance.insert("rating".into(), Provenance::subjective("user-prompt"));
        self
    }

    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.event_id.is_empty() {
            out.push("event_id must not be empty".into());
        }
        if self.when.eaten_at > self.when.logged_at {
            out.push("eating time is after logging time".into());
        }
        if !(self.what.quantity_g.is_finite() && self.what.quantity_g >= 0.0) {
            out.push("quantity_g must be >= 0".into());
        }
        for ing in &self.what.ingredients {
            if !(ing.grams.is_finite() && ing.grams >= 0.0) {
                out.push(format!("ingredient {} grams must be >= 0", ing.item_id));
            }
        }
        if let Some(r) = self.rating {
            if !(1..=5).contains(&r) {
                out.push(format!("rating {r} outside 1..=5"));
            }
        }
        if let Some(n) = &self.why.nutrition {
            out.extend(n.violations());
        }
        if let Some(t) = &self.why.taste {
            out.extend(t.violations());
        }
        if let Some(p) = self.provenance.get("rating") {
            if p.kind != ProvenanceKind::Subjective {
                out.push("rating provenance must be subjective".into());
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub value: f64,
    pub unit: String,
}

impl Measurement {
    pub fn new(value: f64, unit: &str) -> Self {
        Measurement {
            value,
            unit: unit.into(),
        }
    }
}

/// Metrics with a declared unit. Anything else is free-form.
pub const KNOWN_METRICS: [(&str, &str); 8] = [
    ("sleep_quality", "score"),
    ("sleep_latency", "min"),
    ("duration", "min"),
    ("kcal_burned", "kcal"),
    ("steps", "count"),
    ("stress_level", "score"),
    ("heart_rate", "bpm"),
    ("bedtime", "min_after_noon"),
];

pub fn known_metric_unit(metric: &str) -> Option<&'static str> {
    KNOWN_METRICS.iter().find(|(m, _)| *m == metric).map(|(_, u)| *u)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifeEvent {
    pub event_id: String,
    pub user_id: String,
    pub stream: Stream,
    pub start: Timestamp,
    pub end: Timestamp,
    #[serde(default)]
    pub tz_offset_min: i32,
    #[serde(default)]
    pub attributes: BTreeMap<String, Measurement>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl LifeEvent {
    pub fn new(event_id: &str, user_id: &str, stream: Stream, start: Timestamp, end: Timestamp, tz_offset_min: i32) -> Self {
        LifeEvent {
            event_id: event_id.into(),
            user_id: user_id.into(),
            stream,
            start,
            end,
            tz_offset_min,
            attributes: BTreeMap::new(),
            extra: BTreeMap::new(),
        }
    }

    pub fn with(mut self, metric: &str, value: f64) -> Self {
        let unit = known_metric_unit(metric).unwrap_or("");
        self.attributes.insert(metric.into(), Measurement::new(value, unit));
        self
    }

    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.event_id.is_empty() {
            out.push("event_id must not be empty".into());
        }
        if self.start > self.end {
            out.push("start is after end".into());
        }
        if self.stream == Stream::Food {
            out.push("life events cannot use the food stream".into());
        }
        for (name, m) in &self.attributes {
            if !m.value.is_finite() {
                out.push(format!("metric {name} must be finite"));
            }
            if let Some(unit) = known_metric_unit(name) {
                if m.unit != unit {
                    out.push(format!("metric {name} must be in {unit}, got `{}`", m.unit));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    Food(FoodEvent),
    Life(LifeEvent),
}

impl Event {
    pub fn id(&self) -> &str {
        match self {
            Event::Food(f) => &f.event_id,
            Event::Life(l) => &l.event_id,
        }
    }

    pub fn user_id(&self) -> &str {
        match self {
            Event::Food(f) => &f.user_id,
            Event::Life(l) => &l.user_id,
        }
    }

    pub fn start(&self) -> Timestamp {
        match self {
            Event::Food(f) => f.when.eaten_at,
            Event::Life(l) => l.start,
        }
    }

    pub fn end(&self) -> Timestamp {
        match self {
            Event::Food(f) => f.when.eaten_at,
            Event::Life(l) => l.end,
        }
    }

    pub fn stream(&self) -> Stream {
        match self {
            Event::Food(_) => Stream::Food,
            Event::Life(l) => l.stream.clone(),
        }
    }

    pub fn tz_offset_min(&self) -> i32 {
        match self {
            Event::Food(f) => f.when.tz_offset_min,
            Event::Life(l) => l.tz_offset_min,
        }
    }

    pub fn as_food(&self) -> Option<&FoodEvent> {
        match self {
            Event::Food(f) => Some(f),
            Event::Life(_) => None,
        }
    }

    pub fn validate(&self) -> Vec<String> {
        match self {
            Event::Food(f) => f.validate(),
            Event::Life(l) => l.validate(),
        }
    }

    /// Sort key: start time, then id.
    pub fn order_key(&self) -> (Timestamp, &str) {
        (self.start(), self.id())
    }

    /// Numeric attribute by name.
    ///
    /// Food: any nutrition field (`kcal`, `sugar_g`, `micro.<name>`, ...),
    /// `quantity_g`, `rating`, `companions`, `taste.<channel>` (centroid).
    /// Life: any recorded metric; `duration` falls back to end - start and
    /// `bedtime` to the local start time in minutes after noon.
    pub fn attr(&self, name: &str) -> Option<f64> {
        match self {
            Event::Food(f) => match name {
                "quantity_g" => Some(f.what.quantity_g),
                "rating" => f.rating.map(f64::from),
                "companions" => Some(f64::from(f.who.companions)),
                other => {
                    if let Some(channel) = other.strip_prefix("taste.") {
                        let c = crate::taste::Channel::from_name(channel)?;
                        return f.why.taste.as_ref().map(|t| t.centroid.get(c));
                    }
                    f.why.nutrition.as_ref().and_then(|n| n.field(other))
                }
            },
            Event::Life(l) => match l.attributes.get(name) {
                Some(m) => Some(m.value),
                None => match name {
                    "duration" => Some((l.end.millis() - l.start.millis()) as f64 / MINUTE_MS as f64),
                    "bedtime" => Some(crate::time::minutes_after_noon(l.start.local_minute_of_day(l.tz_offset_min)) as f64),
                    _ => None,
                },
            },
        }
    }

    /// Item ids the event contains: resolved item, dish name, ingredient ids.
    pub fn contains_item(&self, item: &str) -> bool {
        match self {
            Event::Food(f) => {
                let item = crate::enrichment::normalize_query(item);
                f.what.item_id.as_deref() == Some(item.as_str())
                    || crate::enrichment::normalize_query(&f.what.dish) == item
                    || f.what
                        .ingredients
                        .iter()
                        .any(|i| crate::enrichment::normalize_query(&i.item_id) == item)
            }
            Event::Life(_) => false,
        }
    }
}

impl From<FoodEvent> for Event {
    fn from(f: FoodEvent) -> Self {
        Event::Food(f)
    }
}

impl From<LifeEvent> for Event {
    fn from(l: LifeEvent) -> Self {
        Event::Life(l)
    }
}
