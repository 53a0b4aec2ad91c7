//! Temporal event patterns: a sequence of step predicates joined by gap
//! constraints.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chronicle::{Chronicle, Event, Stream};
use crate::enrichment::NUTRITION_FIELDS;
use crate::time::{minutes_after_noon, HOUR_MS, MINUTE_MS};

/// 23:00 local, used when a chronicle has no sleep events.
pub const DEFAULT_BEDTIME_AFTER_NOON: i64 = 11 * 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cmp {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "==")]
    Eq,
}

impl Cmp {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Cmp::Gt => lhs > rhs,
            Cmp::Ge => lhs >= rhs,
            Cmp::Lt => lhs < rhs,
            Cmp::Le => lhs <= rhs,
            Cmp::Eq => (lhs - rhs).abs() <= 1e-9,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Absolute,
    /// `value` is a fraction of the person's mean daily total of the attribute.
    DailyMeanFraction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttrConstraint {
    pub attr: String,
    pub op: Cmp,
    pub value: f64,
    #[serde(default, skip_serializing_if = "is_absolute")]
    pub scale: Scale,
}

fn is_absolute(s: &Scale) -> bool {
    *s == Scale::Absolute
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeWindow {
    /// Local clock minutes `[from_min, to_min)`; wraps past midnight when
    /// `from_min > to_min`.
    Local { from_min: i64, to_min: i64 },
    /// Within `hours` before the person's usual bedtime.
    BeforeBedtime { hours: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Step {
    /// `None` matches any stream.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream: Option<Stream>,
    /// Dish name or ingredient id the food event must contain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attrs: Vec<AttrConstraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_of_day: Option<TimeWindow>,
}

impl Step {
    pub fn stream(stream: Stream) -> Self {
        Step {
            stream: Some(stream),
            ..Default::default()
        }
    }
}

/// Allowed delay from one step's start to the next, in minutes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    #[serde(default)]
    pub min_minutes: f64,
    pub max_minutes: f64,
}

impl Gap {
    pub fn within(max_minutes: f64) -> Self {
        Gap {
            min_minutes: 0.0,
            max_minutes,
        }
    }

    fn bounds_ms(&self) -> (i64, i64) {
        (
            (self.min_minutes * MINUTE_MS as f64).round() as i64,
            (self.max_minutes * MINUTE_MS as f64).round() as i64,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventPattern {
    pub steps: Vec<Step>,
    /// One entry per consecutive step pair.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gaps: Vec<Gap>,
}

impl EventPattern {
    pub fn single(step: Step) -> Self {
        EventPattern {
            steps: vec![step],
            gaps: Vec::new(),
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.steps.is_empty() {
            out.push("pattern needs at least one step".into());
        }
        if self.gaps.len() + 1 != self.steps.len().max(1) {
            out.push(format!(
                "pattern with {} steps needs {} gaps, got {}",
                self.steps.len(),
                self.steps.len().saturating_sub(1),
                self.gaps.len()
            ));
        }
        for (i, g) in self.gaps.iter().enumerate() {
            if !(g.min_minutes >= 0.0 && g.max_minutes >= g.min_minutes && g.max_minutes.is_finite()) {
                out.push(format!("gap {i} must satisfy 0 <= min_minutes <= max_minutes"));
            }
        }
        for (i, s) in self.steps.iter().enumerate() {
            for c in &s.attrs {
                if c.attr.is_empty() || !c.value.is_finite() {
                    out.push(format!("step {i} has a malformed attribute constraint"));
                }
            }
            if let Some(TimeWindow::BeforeBedtime { hours }) = &s.time_of_day {
                if !(*hours > 0.0 && *hours <= 24.0) {
                    out.push(format!("step {i} before_bedtime hours must be in (0, 24]"));
                }
            }
            if let Some(TimeWindow::Local { from_min, to_min }) = &s.time_of_day {
                if !(0..1440).contains(from_min) || !(0..=1440).contains(to_min) {
                    out.push(format!("step {i} local window must use minutes of day"));
                }
            }
        }
        out
    }

    pub(crate) fn gap_ms(&self, k: usize) -> (i64, i64) {
        self.gaps[k].bounds_ms()
    }
}

/// Per-person reference values that relative predicates resolve against.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChronicleStats {
    /// Median local sleep start, minutes after noon.
    pub usual_bedtime: i64,
    /// Mean daily total per food attribute, over days with any food event.
    pub daily_means: BTreeMap<String, f64>,
}

impl ChronicleStats {
    pub fn compute(chronicle: &Chronicle) -> Self {
        let mut bedtimes: Vec<i64> = chronicle
            .events()
            .iter()
            .filter(|e| e.stream() == Stream::Sleep)
            .map(|e| minutes_after_noon(e.start().local_minute_of_day(e.tz_offset_min())))
            .collect();
        bedtimes.sort_unstable();
        let usual_bedtime = match bedtimes.len() {
            0 => DEFAULT_BEDTIME_AFTER_NOON,
            n if n % 2 == 1 => bedtimes[n / 2],
            n => (bedtimes[n / 2 - 1] + bedtimes[n / 2]) / 2,
        };

        let mut day_totals: BTreeMap<i64, BTreeMap<String, f64>> = BTreeMap::new();
        for e in chronicle.events() {
            let Event::Food(f) = e else { continue };
            let day = day_totals.entry(e.start().local_day(f.when.tz_offset_min)).or_default();
            *day.entry("quantity_g".into()).or_default() += f.what.quantity_g;
            if let Some(n) = &f.why.nutrition {
                for name in NUTRITION_FIELDS {
                    if let Some(v) = n.field(name) {
                        *day.entry(name.to_string()).or_default() += v;
                    }
                }
                for (m, amount) in &n.micronutrients {
                    *day.entry(format!("micro.{m}")).or_default() += amount.amount;
                }
            }
        }
        let n_days = day_totals.len() as f64;
        let mut daily_means: BTreeMap<String, f64> = BTreeMap::new();
        for totals in day_totals.values() {
            for (k, v) in totals {
                *daily_means.entry(k.clone()).or_default() += v / n_days;
            }
        }
        ChronicleStats {
            usual_bedtime,
            daily_means,
        }
    }
}

/// Derived per-event attributes plus the reference stats, computed once per
/// chronicle so predicates are cheap to evaluate.
pub struct PatternContext<'a> {
    pub events: &'a [Event],
    pub stats: ChronicleStats,
    prev_food: Vec<Option<usize>>,
    day_kcal: Vec<f64>,
}

impl<'a> PatternContext<'a> {
    pub fn new(chronicle: &'a Chronicle) -> Self {
        Self::with_stats(chronicle.events(), ChronicleStats::compute(chronicle))
    }

    /// Uses externally supplied stats, e.g. from the full history when
    /// matching a hypothetical event against a short recent window.
    pub fn with_stats(events: &'a [Event], stats: ChronicleStats) -> Self {
        let mut prev_food = Vec::with_capacity(events.len());
        let mut last = None;
        let mut day_sum: BTreeMap<i64, f64> = BTreeMap::new();
        for (i, e) in events.iter().enumerate() {
            prev_food.push(last);
            if let Event::Food(f) = e {
                last = Some(i);
                let kcal = f.why.nutrition.as_ref().map_or(0.0, |n| n.kcal);
                *day_sum.entry(e.start().local_day(e.tz_offset_min())).or_default() += kcal;
            }
        }
        let day_kcal = events
            .iter()
            .map(|e| day_sum.get(&e.start().local_day(e.tz_offset_min())).copied().unwrap_or(0.0))
            .collect();
        PatternContext {
            events,
            stats,
            prev_food,
            day_kcal,
        }
    }

    /// Event attribute including derived food attributes
    /// `day_total_kcal` and `hours_since_previous_meal`.
    pub fn attr(&self, idx: usize, name: &str) -> Option<f64> {
        let e = &self.events[idx];
        match name {
            "day_total_kcal" if matches!(e, Event::Food(_)) => Some(self.day_kcal[idx]),
            "hours_since_previous_meal" if matches!(e, Event::Food(_)) => self.prev_food[idx]
                .map(|p| (e.start().millis() - self.events[p].start().millis()) as f64 / HOUR_MS as f64),
            _ => e.attr(name),
        }
    }

    pub fn step_matches(&self, step: &Step, idx: usize) -> bool {
        let e = &self.events[idx];
        if let Some(s) = &step.stream {
            if e.stream() != *s {
                return false;
            }
        }
        if let Some(item) = &step.item {
            if !e.contains_item(item) {
                return false;
            }
        }
        for c in &step.attrs {
            let Some(lhs) = self.attr(idx, &c.attr) else {
                return false;
            };
            let rhs = match c.scale {
                Scale::Absolute => c.value,
                Scale::DailyMeanFraction => match self.stats.daily_means.get(&c.attr) {
                    Some(mean) => c.value * mean,
                    None => return false,
                },
            };
            if !c.op.holds(lhs, rhs) {
                return false;
            }
        }
        if let Some(w) = &step.time_of_day {
            let minute = e.start().local_minute_of_day(e.tz_offset_min());
            let inside = match *w {
                TimeWindow::Local { from_min, to_min } => {
                    if from_min <= to_min {
                        minute >= from_min && minute < to_min
                    } else {
                        minute >= from_min || minute < to_min
                    }
                }
                TimeWindow::BeforeBedtime { hours } => {
                    let m = minutes_after_noon(minute);
                    let lead = (hours * 60.0).round() as i64;
                    m >= self.stats.usual_bedtime - lead && m < self.stats.usual_bedtime
                }
            };
            if !inside {
                return false;
            }
        }
        true
    }
}
