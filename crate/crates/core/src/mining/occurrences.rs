//! Pattern occurrence search.
//!
//! An occurrence is an index tuple `i_1 < ... < i_k` where event `i_j`
//! satisfies step `j` and each consecutive start-time delay lies inside its
//! gap. Occurrences are picked greedily: the lexicographically smallest tuple
//! whose first index is at or after a cursor, then the cursor moves past the
//! tuple's last event.

use serde::{Deserialize, Serialize};

use super::pattern::{EventPattern, PatternContext};
use crate::chronicle::Chronicle;
use crate::time::Timestamp;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Occurrence {
    pub event_ids: Vec<String>,
    #[serde(skip)]
    pub indices: Vec<usize>,
    pub start: Timestamp,
    pub end: Timestamp,
}

pub fn find_occurrences(pattern: &EventPattern, chronicle: &Chronicle) -> Vec<Occurrence> {
    let ctx = PatternContext::new(chronicle);
    find_occurrences_in(pattern, &ctx)
}

pub fn find_occurrences_in(pattern: &EventPattern, ctx: &PatternContext<'_>) -> Vec<Occurrence> {
    let n = ctx.events.len();
    let k = pattern.steps.len();
    if k == 0 || pattern.gaps.len() + 1 != k {
        return Vec::new();
    }
    // step match table, computed once
    let table: Vec<Vec<bool>> = pattern
        .steps
        .iter()
        .map(|s| (0..n).map(|i| ctx.step_matches(s, i)).collect())
        .collect();

    let mut out = Vec::new();
    let mut cursor = 0;
    let mut tuple = Vec::with_capacity(k);
    while cursor < n {
        let mut found = false;
        for first in cursor..n {
            if !table[0][first] {
                continue;
            }
            tuple.clear();
            tuple.push(first);
            if extend(pattern, ctx, &table, &mut tuple) {
                found = true;
                break;
            }
        }
        if !found {
            break;
        }
        let last = *tuple.last().expect("non-empty tuple");
        out.push(Occurrence {
            event_ids: tuple.iter().map(|&i| ctx.events[i].id().to_string()).collect(),
            indices: tuple.clone(),
            start: ctx.events[tuple[0]].start(),
            end: ctx.events[last].end(),
        });
        cursor = last + 1;
    }
    out
}

/// Depth-first search in ascending index order, so the first complete
/// tuple is the lexicographically smallest one with the given prefix.
fn extend(pattern: &EventPattern, ctx: &PatternContext<'_>, table: &[Vec<bool>], tuple: &mut Vec<usize>) -> bool {
    let depth = tuple.len();
    if depth == pattern.steps.len() {
        return true;
    }
    let prev = tuple[depth - 1];
    let t_prev = ctx.events[prev].start().millis();
    let (lo, hi) = pattern.gap_ms(depth - 1);
    for next in prev + 1..ctx.events.len() {
        let dt = ctx.events[next].start().millis() - t_prev;
        if dt > hi {
            break;
        }
        if dt < lo || !table[depth][next] {
            continue;
        }
        tuple.push(next);
        if extend(pattern, ctx, table, tuple) {
            return true;
        }
        tuple.pop();
    }
    false
}

/// Whether some match of the pattern uses event `idx` for its last step,
/// regardless of how greedy selection would pick occurrences.
pub fn matches_ending_at(pattern: &EventPattern, ctx: &PatternContext<'_>, idx: usize) -> bool {
    let k = pattern.steps.len();
    if k == 0 || pattern.gaps.len() + 1 != k || !ctx.step_matches(&pattern.steps[k - 1], idx) {
        return false;
    }
    back(pattern, ctx, k - 1, idx)
}

fn back(pattern: &EventPattern, ctx: &PatternContext<'_>, step: usize, idx: usize) -> bool {
    if step == 0 {
        return true;
    }
    let t = ctx.events[idx].start().millis();
    let (lo, hi) = pattern.gap_ms(step - 1);
    (0..idx).rev().any(|prev| {
        let dt = t - ctx.events[prev].start().millis();
        dt >= lo && dt <= hi && ctx.step_matches(&pattern.steps[step - 1], prev) && back(pattern, ctx, step - 1, prev)
    })
}
