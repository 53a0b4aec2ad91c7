//! Hypothesis verification over one chronicle.
//!
//! Treated units are pattern occurrences linked to the first outcome event
//! inside the temporal window. Control units are evenings without any
//! occurrence, anchored at the median treated clock time and linked to an
//! outcome the same way. Units are matched on confounders, each context is
//! tested with a label permutation test, and a stratified permutation test
//! over the adequately powered contexts gives the overall estimate.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::matching::{contextual_match, Binning, Confounder, ConfounderValue, MatchStrategy, Unit};
use super::occurrences::find_occurrences_in;
use super::pattern::{EventPattern, PatternContext};
use super::stats::{benjamini_hochberg, bootstrap_validity, mean_difference, permutation_test, rng_for, stratified_permutation_test, variance};
use super::MiningError;
use crate::chronicle::{Chronicle, Event, Stream};
use crate::config::MiningConfig;
use crate::time::{minute_of_day_from_after_noon, minutes_after_noon, Timestamp, HOUR_MS, MINUTE_MS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSelector {
    pub stream: Stream,
    pub metric: String,
}

/// Links an input occurrence to its outcome: the first outcome event that
/// starts after the anchor and no later than `within_minutes` after it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalCondition {
    pub within_minutes: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub input: EventPattern,
    pub outcome: OutcomeSelector,
    /// Required; an empty list is an explicit "no confounders".
    pub confounders: Vec<Confounder>,
    pub temporal: TemporalCondition,
    #[serde(default)]
    pub strategy: MatchStrategy,
}

impl Hypothesis {
    pub fn violations(&self) -> Vec<String> {
        let mut out = self.input.violations();
        if self.outcome.metric.is_empty() {
            out.push("outcome metric must be named".into());
        }
        if self.outcome.stream == Stream::Food {
            out.push("outcome must be a life-stream metric".into());
        }
        if !(self.temporal.within_minutes > 0.0 && self.temporal.within_minutes.is_finite()) {
            out.push("temporal.within_minutes must be > 0".into());
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyParams {
    pub alpha: f64,
    pub n_permutations: usize,
    pub n_bootstrap: usize,
    pub min_effect: f64,
    pub bins: usize,
    pub min_group_size: usize,
    pub seed: u64,
}

impl VerifyParams {
    pub fn from_config(cfg: &MiningConfig, seed: u64) -> Self {
        VerifyParams {
            alpha: cfg.alpha,
            n_permutations: cfg.n_permutations,
            n_bootstrap: cfg.n_bootstrap,
            min_effect: cfg.min_effect,
            bins: cfg.bins,
            min_group_size: cfg.min_group_size,
            seed,
        }
    }
}

impl Default for VerifyParams {
    fn default() -> Self {
        Self::from_config(&MiningConfig::default(), crate::config::DEFAULT_SEED)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increase,
    Decrease,
    Mixed,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextResult {
    pub signature: Vec<String>,
    /// mean(treated) - mean(control), outcome units.
    pub effect: f64,
    pub p_value: f64,
    pub adjusted_p: f64,
    pub n_treated: usize,
    pub n_control: usize,
    pub validity: f64,
    pub low_power: bool,
    /// All outcomes in the context are equal.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifiedRule {
    pub hypothesis: Hypothesis,
    pub contexts: Vec<ContextResult>,
    pub binning: Vec<Binning>,
    pub overall_effect: Option<f64>,
    pub overall_p: f64,
    pub overall_direction: Direction,
    pub n_occurrences: usize,
    pub n_treated: usize,
    pub n_control: usize,
    /// Units dropped for a missing confounder value or a context lacking one arm.
    pub n_excluded: usize,
    pub alpha: f64,
    pub n_permutations: usize,
    pub seed: u64,
}

impl VerifiedRule {
    pub fn context(&self, signature: &[String]) -> Option<&ContextResult> {
        self.contexts.iter().find(|c| c.signature == signature)
    }
}

/// Treated and control units before matching.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitSet {
    pub units: Vec<Unit>,
    pub n_occurrences: usize,
}

/// Local "evening day": the calendar day of `t - 12h`, so a late snack at
/// 00:30 belongs to the previous evening.
fn evening_day(t: Timestamp, tz: i32) -> i64 {
    t.plus_ms(-12 * HOUR_MS).local_day(tz)
}

fn first_outcome(events: &[Event], anchor: Timestamp, window_ms: i64, outcome: &OutcomeSelector) -> Option<(usize, f64)> {
    let from = events.partition_point(|e| e.start() <= anchor);
    events[from..]
        .iter()
        .enumerate()
        .take_while(|(_, e)| e.start().millis() <= anchor.millis() + window_ms)
        .filter(|(_, e)| e.stream() == outcome.stream)
        .find_map(|(i, e)| e.attr(&outcome.metric).map(|v| (from + i, v)))
}

pub fn build_units(hypothesis: &Hypothesis, chronicle: &Chronicle) -> Result<UnitSet, MiningError> {
    let violations = hypothesis.violations();
    if !violations.is_empty() {
        return Err(MiningError::InvalidHypothesis(violations));
    }
    let events = chronicle.events();
    if events.is_empty() {
        return Err(MiningError::EmptyChronicle);
    }
    let ctx = PatternContext::new(chronicle);
    let occurrences = find_occurrences_in(&hypothesis.input, &ctx);
    if occurrences.is_empty() {
        return Err(MiningError::NoOccurrences);
    }
    let window_ms = (hypothesis.temporal.within_minutes * MINUTE_MS as f64).round() as i64;
    let conf_values = |anchor: Timestamp, tz: i32| -> Vec<Option<ConfounderValue>> {
        hypothesis.confounders.iter().map(|c| c.value_at(events, anchor, tz)).collect()
    };

    let mut used_outcomes: BTreeSet<usize> = BTreeSet::new();
    let mut treated_days: BTreeSet<i64> = BTreeSet::new();
    let mut anchor_minutes: Vec<i64> = Vec::new();
    let mut units = Vec::new();
    for occ in &occurrences {
        let last = *occ.indices.last().expect("non-empty occurrence");
        let anchor = events[last].start();
        let tz = events[last].tz_offset_min();
        treated_days.insert(evening_day(anchor, tz));
        let Some((oi, value)) = first_outcome(events, anchor, window_ms, &hypothesis.outcome) else {
            continue;
        };
        if !used_outcomes.insert(oi) {
            continue;
        }
        anchor_minutes.push(minutes_after_noon(anchor.local_minute_of_day(tz)));
        units.push(Unit {
            unit_id: occ.event_ids.join("+"),
            treated: true,
            anchor,
            outcome_event: events[oi].id().to_string(),
            outcome: value,
            confounders: conf_values(anchor, tz),
        });
    }
    if units.is_empty() {
        return Err(MiningError::NoOutcomes);
    }

    anchor_minutes.sort_unstable();
    let median_after_noon = anchor_minutes[(anchor_minutes.len() - 1) / 2];
    let clock = minute_of_day_from_after_noon(median_after_noon);

    // evening day -> offset of the first event seen that evening
    let mut day_tz: BTreeMap<i64, i32> = BTreeMap::new();
    for e in events {
        day_tz.entry(evening_day(e.start(), e.tz_offset_min())).or_insert(e.tz_offset_min());
    }
    let first_day = *day_tz.keys().next().expect("non-empty chronicle");
    let last_day = *day_tz.keys().next_back().expect("non-empty chronicle");
    let mut tz = day_tz[&first_day];
    for day in first_day..=last_day {
        if let Some(t) = day_tz.get(&day) {
            tz = *t;
        }
        if treated_days.contains(&day) {
            continue;
        }
        // anchor on the evening-day clock: minutes after noon from `day`
        let day_start = Timestamp::local_day_start(day, tz);
        let offset_min = if clock >= 12 * 60 { clock } else { clock + 24 * 60 };
        let anchor = day_start.plus_ms(offset_min * MINUTE_MS);
        let Some((oi, value)) = first_outcome(events, anchor, window_ms, &hypothesis.outcome) else {
            continue;
        };
        if !used_outcomes.insert(oi) {
            continue;
        }
        units.push(Unit {
            unit_id: format!("control:{}", day_start.date_string(tz)),
            treated: false,
            anchor,
            outcome_event: events[oi].id().to_string(),
            outcome: value,
            confounders: conf_values(anchor, tz),
        });
    }
    if !units.iter().any(|u| !u.treated) {
        return Err(MiningError::NoControls);
    }
    Ok(UnitSet {
        units,
        n_occurrences: occurrences.len(),
    })
}

pub fn verify(hypothesis: &Hypothesis, chronicle: &Chronicle, params: &VerifyParams) -> Result<VerifiedRule, MiningError> {
    if !(params.alpha > 0.0 && params.alpha < 1.0) {
        return Err(MiningError::InvalidParameter("alpha must be in (0, 1)".into()));
    }
    if params.n_permutations < 200 {
        return Err(MiningError::InvalidParameter("n_permutations must be >= 200".into()));
    }
    let set = build_units(hypothesis, chronicle)?;
    let total_units = set.units.len();
    let complete: Vec<Unit> = set
        .units
        .into_iter()
        .filter(|u| u.confounders.iter().all(|v| v.is_some()))
        .collect();
    let (groups, binning) = contextual_match(
        &complete,
        &hypothesis.confounders,
        hypothesis.strategy,
        params.bins,
        params.min_group_size,
    )?;

    let mut contexts = Vec::new();
    let mut arms: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for (gi, g) in groups.iter().enumerate() {
        if g.treated.is_empty() || g.control.is_empty() {
            continue;
        }
        let t: Vec<f64> = g.treated.iter().map(|(_, v)| *v).collect();
        let c: Vec<f64> = g.control.iter().map(|(_, v)| *v).collect();
        let all: Vec<f64> = t.iter().chain(&c).copied().collect();
        let degenerate = variance(&all) == 0.0 && all.windows(2).all(|w| w[0] == w[1]);
        let effect = mean_difference(&t, &c);
        let (p, validity) = if degenerate {
            (1.0, 0.0)
        } else {
            let p = permutation_test(&t, &c, params.n_permutations, &mut rng_for(params.seed, 2 * gi as u64));
            let v = bootstrap_validity(
                &t,
                &c,
                effect,
                params.min_effect,
                params.n_bootstrap,
                &mut rng_for(params.seed, 2 * gi as u64 + 1),
            );
            (p, v)
        };
        contexts.push(ContextResult {
            signature: g.signature.clone(),
            effect,
            p_value: p,
            adjusted_p: p,
            n_treated: t.len(),
            n_control: c.len(),
            validity,
            low_power: g.low_power,
            degenerate,
        });
        arms.push((t, c));
    }
    let adjusted = benjamini_hochberg(&contexts.iter().map(|c| c.p_value).collect::<Vec<_>>());
    for (c, a) in contexts.iter_mut().zip(adjusted) {
        c.adjusted_p = a;
    }

    let powered: Vec<(Vec<f64>, Vec<f64>)> = contexts
        .iter()
        .zip(&arms)
        .filter(|(c, _)| !c.low_power && !c.degenerate)
        .map(|(_, a)| a.clone())
        .collect();
    let (overall_effect, overall_p) = if powered.is_empty() {
        (None, 1.0)
    } else {
        let (e, p) = stratified_permutation_test(&powered, params.n_permutations, &mut rng_for(params.seed, u64::MAX));
        (e.is_finite().then_some(e), p)
    };
    let overall_direction = direction(&contexts, overall_effect, overall_p, params.alpha);
    let n_treated = contexts.iter().map(|c| c.n_treated).sum();
    let n_control = contexts.iter().map(|c| c.n_control).sum::<usize>();
    Ok(VerifiedRule {
        hypothesis: hypothesis.clone(),
        contexts,
        binning,
        overall_effect,
        overall_p,
        overall_direction,
        n_occurrences: set.n_occurrences,
        n_treated,
        n_control,
        n_excluded: total_units - n_treated - n_control,
        alpha: params.alpha,
        n_permutations: params.n_permutations,
        seed: params.seed,
    })
}

fn direction(contexts: &[ContextResult], overall_effect: Option<f64>, overall_p: f64, alpha: f64) -> Direction {
    let significant: Vec<f64> = contexts
        .iter()
        .filter(|c| !c.low_power && !c.degenerate && c.adjusted_p < alpha)
        .map(|c| c.effect)
        .collect();
    let up = significant.iter().any(|e| *e > 0.0);
    let down = significant.iter().any(|e| *e < 0.0);
    let sign = |e: f64| if e > 0.0 { Direction::Increase } else { Direction::Decrease };
    match (up, down, overall_effect) {
        (true, true, _) => Direction::Mixed,
        (_, _, Some(e)) if overall_p < alpha && e != 0.0 => sign(e),
        (true, false, _) => Direction::Increase,
        (false, true, _) => Direction::Decrease,
        _ => Direction::Inconclusive,
    }
}
