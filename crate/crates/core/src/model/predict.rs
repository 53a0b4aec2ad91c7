//! Outcome prediction for a hypothetical food event.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PersonalFoodModel;
use crate::chronicle::Event;
use crate::mining::matching::signature;
use crate::mining::{matches_ending_at, ConfounderValue, Hypothesis, PatternContext};

/// What is known around the hypothetical event: recent history (for
/// multi-step patterns and derived attributes) and confounder values keyed
/// by confounder label. Confounders missing from the map are computed from
/// `recent_events`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionContext {
    #[serde(default)]
    pub recent_events: Vec<Event>,
    #[serde(default)]
    pub confounders: BTreeMap<String, ConfounderValue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub rule_id: String,
    pub delta: f64,
    pub validity: f64,
    pub prior_only: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomePrediction {
    pub metric: String,
    pub delta: f64,
    pub confidence: f64,
    pub contributions: Vec<Contribution>,
}

fn context_values(
    h: &Hypothesis,
    events: &[Event],
    idx: usize,
    given: &BTreeMap<String, ConfounderValue>,
) -> Vec<Option<ConfounderValue>> {
    let e = &events[idx];
    h.confounders
        .iter()
        .map(|c| {
            given
                .get(&c.label())
                .cloned()
                .or_else(|| c.value_at(events, e.start(), e.tz_offset_min()))
        })
        .collect()
}

/// Predictions per outcome metric, sorted by metric. Rules contribute when
/// their input pattern can end at the hypothetical event; verified rules
/// also need a matching context and contribute `validity * effect`, while
/// prior-only rules contribute their literature direction times the
/// configured prior magnitude.
pub fn predict_outcome(model: &PersonalFoodModel, event: &Event, ctx: &PredictionContext) -> Vec<OutcomePrediction> {
    let mut events: Vec<Event> = ctx
        .recent_events
        .iter()
        .filter(|e| e.id() != event.id() && e.start() <= event.start())
        .cloned()
        .collect();
    events.push(event.clone());
    events.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
    let idx = events.iter().position(|e| e.id() == event.id()).expect("event inserted");
    let pctx = PatternContext::with_stats(&events, model.stats.clone());

    let mut by_metric: BTreeMap<String, Vec<Contribution>> = BTreeMap::new();
    for rule in &model.biological.verified {
        let h = &rule.verified.hypothesis;
        if !matches_ending_at(&h.input, &pctx, idx) {
            continue;
        }
        let values = context_values(h, &events, idx, &ctx.confounders);
        let Some(sig) = signature(&values, &rule.verified.binning) else {
            continue;
        };
        let Some(c) = rule.verified.context(&sig) else {
            continue;
        };
        by_metric.entry(h.outcome.metric.clone()).or_default().push(Contribution {
            rule_id: rule.rule_id.clone(),
            delta: c.validity * c.effect,
            validity: c.validity,
            prior_only: false,
            context: Some(sig),
        });
    }
    for p in &model.biological.prior_only {
        let Ok(h) = p.rule.instantiate() else {
            continue;
        };
        if !matches_ending_at(&h.input, &pctx, idx) {
            continue;
        }
        by_metric.entry(h.outcome.metric.clone()).or_default().push(Contribution {
            rule_id: p.rule.rule_id.clone(),
            delta: p.rule.prior_direction.sign() * model.settings.prior_magnitude(),
            validity: 0.0,
            prior_only: true,
            context: None,
        });
    }

    by_metric
        .into_iter()
        .map(|(metric, mut contributions)| {
            contributions.sort_by(|a, b| a.rule_id.cmp(&b.rule_id));
            let delta = contributions.iter().map(|c| c.delta).sum();
            let confidence = contributions.iter().map(|c| c.validity).sum::<f64>() / contributions.len() as f64;
            OutcomePrediction {
                metric,
                delta,
                confidence,
                contributions,
            }
        })
        .collect()
}
