//! Contextual matching: partition units by confounder signature.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stats::{bin_index, equal_frequency_boundaries};
use super::MiningError;
use crate::chronicle::{Event, Stream};
use crate::time::{Timestamp, DAY_MS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Confounder {
    /// `weekday` or `weekend` on the local calendar.
    DayType,
    /// Sum of a metric over the 24 hours before the unit's anchor (0 if none).
    DailyTotal { stream: Stream, metric: String },
    /// Number of stream events in the 24 hours before the anchor.
    DailyCount { stream: Stream },
    /// Most recent value of a metric before the anchor, e.g. last night's sleep.
    PreviousValue { stream: Stream, metric: String },
}

impl Confounder {
    pub fn label(&self) -> String {
        match self {
            Confounder::DayType => "day_type".into(),
            Confounder::DailyTotal { stream, metric } => format!("{stream}.{metric}.daily_total"),
            Confounder::DailyCount { stream } => format!("{stream}.daily_count"),
            Confounder::PreviousValue { stream, metric } => format!("{stream}.{metric}.previous"),
        }
    }

    pub fn is_numeric(&self) -> bool {
        !matches!(self, Confounder::DayType)
    }

    /// Value at `anchor` given events sorted by start. Only events that
    /// start before the anchor are considered.
    pub fn value_at(&self, events: &[Event], anchor: Timestamp, tz_offset_min: i32) -> Option<ConfounderValue> {
        let before = events.partition_point(|e| e.start() < anchor);
        let recent = || {
            let from = anchor.millis() - DAY_MS;
            events[..before].iter().rev().take_while(move |e| e.start().millis() >= from)
        };
        match self {
            Confounder::DayType => Some(ConfounderValue::Category(
                if anchor.is_local_weekend(tz_offset_min) { "weekend" } else { "weekday" }.into(),
            )),
            Confounder::DailyTotal { stream, metric } => Some(ConfounderValue::Number(
                recent().filter(|e| e.stream() == *stream).filter_map(|e| e.attr(metric)).sum(),
            )),
            Confounder::DailyCount { stream } => {
                Some(ConfounderValue::Number(recent().filter(|e| e.stream() == *stream).count() as f64))
            }
            Confounder::PreviousValue { stream, metric } => events[..before]
                .iter()
                .rev()
                .filter(|e| e.stream() == *stream)
                .find_map(|e| e.attr(metric))
                .map(ConfounderValue::Number),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConfounderValue {
    Number(f64),
    Category(String),
}

impl ConfounderValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            ConfounderValue::Number(x) => Some(*x),
            ConfounderValue::Category(_) => None,
        }
    }
}

/// A treated or control unit with its outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub unit_id: String,
    pub treated: bool,
    pub anchor: Timestamp,
    pub outcome_event: String,
    pub outcome: f64,
    pub confounders: Vec<Option<ConfounderValue>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatchStrategy {
    /// Every distinct value is its own context.
    Exact,
    /// Numeric confounders in `k` equal-frequency bins, categoricals exact.
    #[default]
    EqualFrequencyBins,
}

/// How one confounder's values map to signature labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Binning {
    Categorical,
    Exact,
    Bins { boundaries: Vec<f64> },
}

impl Binning {
    pub fn label(&self, value: &ConfounderValue) -> String {
        match (self, value) {
            (_, ConfounderValue::Category(c)) => c.clone(),
            (Binning::Bins { boundaries }, ConfounderValue::Number(x)) => {
                format!("bin{}/{}", bin_index(*x, boundaries) + 1, boundaries.len() + 1)
            }
            (_, ConfounderValue::Number(x)) => format!("{x}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextGroup {
    pub signature: Vec<String>,
    pub treated: Vec<(String, f64)>,
    pub control: Vec<(String, f64)>,
    pub low_power: bool,
}

/// Fits the per-confounder binning over all units.
pub fn fit_binning(units: &[Unit], confounders: &[Confounder], strategy: MatchStrategy, k: usize) -> Vec<Binning> {
    confounders
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            if !c.is_numeric() {
                return Binning::Categorical;
            }
            match strategy {
                MatchStrategy::Exact => Binning::Exact,
                MatchStrategy::EqualFrequencyBins => {
                    let values: Vec<f64> = units
                        .iter()
                        .filter_map(|u| u.confounders.get(ci).and_then(|v| v.as_ref()).and_then(|v| v.as_number()))
                        .collect();
                    Binning::Bins {
                        boundaries: equal_frequency_boundaries(&values, k),
                    }
                }
            }
        })
        .collect()
}

pub fn signature(values: &[Option<ConfounderValue>], binning: &[Binning]) -> Option<Vec<String>> {
    values
        .iter()
        .zip(binning)
        .map(|(v, b)| v.as_ref().map(|v| b.label(v)))
        .collect()
}

/// Partitions units into context groups, ordered by signature.
pub fn contextual_match(
    units: &[Unit],
    confounders: &[Confounder],
    strategy: MatchStrategy,
    k: usize,
    min_group_size: usize,
) -> Result<(Vec<ContextGroup>, Vec<Binning>), MiningError> {
    for u in units {
        if u.confounders.len() != confounders.len() || u.confounders.iter().any(|v| v.is_none()) {
            return Err(MiningError::MissingConfounderValue(u.unit_id.clone()));
        }
    }
    let binning = fit_binning(units, confounders, strategy, k);
    let mut groups: BTreeMap<Vec<String>, ContextGroup> = BTreeMap::new();
    for u in units {
        let sig = signature(&u.confounders, &binning).expect("values checked above");
        let g = groups.entry(sig.clone()).or_insert_with(|| ContextGroup {
            signature: sig,
            treated: Vec::new(),
            control: Vec::new(),
            low_power: false,
        });
        let arm = if u.treated { &mut g.treated } else { &mut g.control };
        arm.push((u.unit_id.clone(), u.outcome));
    }
    let mut out: Vec<ContextGroup> = groups.into_values().collect();
    for g in &mut out {
        g.low_power = g.treated.len() < min_group_size || g.control.len() < min_group_size;
    }
    Ok((out, binning))
}
