//! Random inputs and brute-force reference implementations shared by the
//! integration and acceptance tests. Nothing here calls the engine's own
//! search or geometry code.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use pfm_core::chronicle::{Chronicle, Event, FoodEvent, Ingredient, LifeEvent, Stream};
use pfm_core::enrichment::NutritionFacts;
use pfm_core::mining::{AttrConstraint, CategorySpec, Cmp, EventPattern, Gap, Scale, Step, TimeWindow};
use pfm_core::taste::{RecipePart, TasteRegion, TasteVector};
use pfm_core::time::Timestamp;
use rand::seq::IndexedRandom;
use rand::Rng;

pub const MINUTE: i64 = 60_000;
pub const DAY: i64 = 1_440 * MINUTE;
pub const DISHES: [&str; 6] = ["pasta", "large pizza", "kiwi", "oatmeal", "curry", "salad"];
pub const INGREDIENTS: [&str; 6] = ["peanut", "milk", "wheat", "kiwi", "egg", "tomato"];
const LIFE: [Stream; 3] = [Stream::Sleep, Stream::Exercise, Stream::Stress];
const TZ: [i32; 5] = [-300, 0, 60, 330, -600];

/// 2024-01-01T00:00:00Z
pub const EPOCH_2024: i64 = 1_704_067_200_000;

/// A chronicle of up to `max_events` food and life events spread over a few
/// days, minute resolution, with deliberate start-time ties.
pub fn random_chronicle<R: Rng>(rng: &mut R, max_events: usize) -> Chronicle {
    let n = rng.random_range(0..=max_events);
    let days = rng.random_range(1..=6);
    let tz = *TZ.choose(rng).unwrap();
    let mut events: Vec<Event> = Vec::with_capacity(n);
    for i in 0..n {
        let minute = if i > 0 && rng.random_bool(0.1) {
            (events[rng.random_range(0..i)].start().millis() - EPOCH_2024) / MINUTE
        } else {
            rng.random_range(0..days * 1440)
        };
        let t = Timestamp(EPOCH_2024 + minute * MINUTE);
        let id = format!("e{i:03}");
        if rng.random_bool(0.6) {
            let dish = DISHES.choose(rng).unwrap();
            let mut f = FoodEvent::new(&id, "u", dish, t, tz);
            f.what.quantity_g = rng.random_range(50.0..600.0);
            if rng.random_bool(0.15) {
                // a resolved catalog item that differs from the logged name
                f.what.item_id = Some(DISHES.choose(rng).unwrap().to_string());
            }
            for ing in INGREDIENTS {
                if rng.random_bool(0.2) {
                    f.what.ingredients.push(Ingredient {
                        item_id: ing.to_string(),
                        grams: 10.0,
                    });
                }
            }
            f.why.nutrition = Some(NutritionFacts {
                kcal: rng.random_range(0..1400) as f64,
                sugar_g: Some(rng.random_range(0..60) as f64),
                ..Default::default()
            });
            events.push(f.into());
        } else {
            let stream = LIFE.choose(rng).unwrap().clone();
            let dur = rng.random_range(0..600) * MINUTE;
            let mut l = LifeEvent::new(&id, "u", stream, t, t.plus_ms(dur), tz);
            l = l.with("sleep_quality", rng.random_range(30..100) as f64);
            events.push(l.into());
        }
    }
    Chronicle::from_events("u", events).expect("valid random chronicle")
}

pub fn random_step<R: Rng>(rng: &mut R) -> Step {
    let mut step = Step::default();
    match rng.random_range(0..5) {
        0 => {}
        1 | 2 => step.stream = Some(Stream::Food),
        _ => step.stream = Some(LIFE.choose(rng).unwrap().clone()),
    }
    if step.stream == Some(Stream::Food) {
        if rng.random_bool(0.3) {
            let pool: Vec<&str> = DISHES.iter().chain(INGREDIENTS.iter()).copied().collect();
            step.item = Some(pool.choose(rng).unwrap().to_string());
        }
        if rng.random_bool(0.5) {
            let scale = if rng.random_bool(0.5) { Scale::DailyMeanFraction } else { Scale::Absolute };
            let value = match scale {
                Scale::DailyMeanFraction => rng.random_range(1..8) as f64 / 10.0,
                Scale::Absolute => rng.random_range(0..1400) as f64,
            };
            let op = *[Cmp::Gt, Cmp::Ge, Cmp::Lt, Cmp::Le].choose(rng).unwrap();
            step.attrs.push(AttrConstraint {
                attr: "kcal".into(),
                op,
                value,
                scale,
            });
        }
    }
    match rng.random_range(0..4) {
        0 => {
            step.time_of_day = Some(TimeWindow::Local {
                from_min: rng.random_range(0..1440),
                to_min: rng.random_range(0..=1440),
            })
        }
        1 => {
            step.time_of_day = Some(TimeWindow::BeforeBedtime {
                hours: rng.random_range(1..=6) as f64,
            })
        }
        _ => {}
    }
    step
}

pub fn random_pattern<R: Rng>(rng: &mut R) -> EventPattern {
    let k = rng.random_range(1..=3);
    let steps = (0..k).map(|_| random_step(rng)).collect();
    let gaps = (1..k)
        .map(|_| {
            let lo = if rng.random_bool(0.3) { rng.random_range(0..120) } else { 0 };
            let hi = lo + rng.random_range(0..1440);
            Gap {
                min_minutes: lo as f64,
                max_minutes: hi as f64,
            }
        })
        .collect();
    EventPattern { steps, gaps }
}

fn local_minute(e: &Event) -> i64 {
    (e.start().millis() + e.tz_offset_min() as i64 * MINUTE).rem_euclid(DAY) / MINUTE
}

fn local_day(e: &Event) -> i64 {
    (e.start().millis() + e.tz_offset_min() as i64 * MINUTE).div_euclid(DAY)
}

fn after_noon(minute: i64) -> i64 {
    (minute + 720) % 1440
}

fn kcal(e: &Event) -> Option<f64> {
    match e {
        Event::Food(f) => f.why.nutrition.as_ref().map(|n| n.kcal),
        Event::Life(_) => None,
    }
}

/// Reference step predicate over a plain event list.
pub struct StepOracle {
    bedtime: i64,
    mean_kcal: Option<f64>,
}

impl StepOracle {
    /// Uses given reference values instead of deriving them from events.
    pub fn from_stats(bedtime_after_noon: i64, mean_kcal: Option<f64>) -> Self {
        StepOracle {
            bedtime: bedtime_after_noon,
            mean_kcal,
        }
    }

    pub fn new(events: &[Event]) -> Self {
        let mut beds: Vec<i64> = events
            .iter()
            .filter(|e| e.stream() == Stream::Sleep)
            .map(|e| after_noon(local_minute(e)))
            .collect();
        beds.sort();
        let bedtime = match beds.len() {
            0 => 660,
            n if n % 2 == 1 => beds[n / 2],
            n => (beds[n / 2 - 1] + beds[n / 2]) / 2,
        };
        let mut per_day: BTreeMap<i64, f64> = BTreeMap::new();
        for e in events {
            if let Some(k) = kcal(e) {
                *per_day.entry(local_day(e)).or_default() += k;
            }
        }
        let mean_kcal = (!per_day.is_empty()).then(|| per_day.values().sum::<f64>() / per_day.len() as f64);
        StepOracle { bedtime, mean_kcal }
    }

    pub fn matches(&self, step: &Step, e: &Event) -> bool {
        if step.stream.as_ref().is_some_and(|s| *s != e.stream()) {
            return false;
        }
        if let Some(item) = &step.item {
            let Event::Food(f) = e else { return false };
            if f.what.dish != *item && f.what.item_id.as_deref() != Some(item.as_str()) && !f.what.ingredients.iter().any(|i| i.item_id == *item) {
                return false;
            }
        }
        for c in &step.attrs {
            let Some(v) = kcal(e) else { return false };
            let rhs = match c.scale {
                Scale::Absolute => c.value,
                Scale::DailyMeanFraction => match self.mean_kcal {
                    Some(m) => c.value * m,
                    None => return false,
                },
            };
            let ok = match c.op {
                Cmp::Gt => v > rhs,
                Cmp::Ge => v >= rhs,
                Cmp::Lt => v < rhs,
                Cmp::Le => v <= rhs,
                Cmp::Eq => (v - rhs).abs() <= 1e-9,
            };
            if !ok {
                return false;
            }
        }
        match &step.time_of_day {
            None => true,
            Some(TimeWindow::Local { from_min, to_min }) => {
                let m = local_minute(e);
                if from_min <= to_min {
                    *from_min <= m && m < *to_min
                } else {
                    m >= *from_min || m < *to_min
                }
            }
            Some(TimeWindow::BeforeBedtime { hours }) => {
                let m = after_noon(local_minute(e));
                let lead = (*hours * 60.0) as i64;
                self.bedtime - lead <= m && m < self.bedtime
            }
        }
    }
}

/// Every valid index tuple in lexicographic order, by exhaustive nested
/// enumeration, then greedy leftmost non-overlapping selection.
pub fn brute_occurrences(pattern: &EventPattern, chronicle: &Chronicle) -> Vec<Vec<String>> {
    let events = chronicle.events();
    let oracle = StepOracle::new(events);
    let hits: Vec<Vec<usize>> = pattern
        .steps
        .iter()
        .map(|s| (0..events.len()).filter(|&i| oracle.matches(s, &events[i])).collect())
        .collect();
    let mut all: Vec<Vec<usize>> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    fn rec(
        depth: usize,
        pattern: &EventPattern,
        events: &[Event],
        hits: &[Vec<usize>],
        stack: &mut Vec<usize>,
        all: &mut Vec<Vec<usize>>,
    ) {
        if depth == hits.len() {
            all.push(stack.clone());
            return;
        }
        for &i in &hits[depth] {
            if let Some(&prev) = stack.last() {
                if i <= prev {
                    continue;
                }
                let dt = events[i].start().millis() - events[prev].start().millis();
                let g = pattern.gaps[depth - 1];
                if dt < (g.min_minutes as i64) * MINUTE || dt > (g.max_minutes as i64) * MINUTE {
                    continue;
                }
            }
            stack.push(i);
            rec(depth + 1, pattern, events, hits, stack, all);
            stack.pop();
        }
    }
    rec(0, pattern, events, &hits, &mut stack, &mut all);
    let mut out = Vec::new();
    let mut cursor = 0;
    for t in all {
        if t[0] >= cursor {
            cursor = t[t.len() - 1] + 1;
            out.push(t.iter().map(|&i| events[i].id().to_string()).collect());
        }
    }
    out
}

fn cut_label(attr: &str, cuts: &[f64], v: f64) -> String {
    let n = |x: f64| format!("{x}");
    let below = cuts.iter().filter(|c| v >= **c).count();
    if below == 0 {
        format!("{attr}<{}", n(cuts[0]))
    } else if below == cuts.len() {
        format!("{attr}>={}", n(cuts[below - 1]))
    } else {
        format!("{attr}[{},{})", n(cuts[below - 1]), n(cuts[below]))
    }
}

fn oracle_label(spec: &CategorySpec, e: &Event) -> Option<String> {
    match spec {
        CategorySpec::Dishes => e.as_food().map(|f| f.what.item_id.clone().unwrap_or(f.what.dish.clone())),
        CategorySpec::Stream(s) => (e.stream() == *s).then(|| s.to_string()),
        CategorySpec::Binned { stream, attr, cuts } => {
            if e.stream() != *stream {
                return None;
            }
            let v = match (e, attr.as_str()) {
                (Event::Food(f), "kcal") => f.why.nutrition.as_ref()?.kcal,
                (Event::Life(l), a) => l.attributes.get(a)?.value,
                _ => return None,
            };
            Some(cut_label(attr, cuts, v))
        }
    }
}

/// Pair counts by exhaustive double loop, keyed by (row label, column label).
pub fn brute_matrix(rows: &CategorySpec, cols: &CategorySpec, window_ms: i64, c: &Chronicle) -> BTreeMap<(String, String), u64> {
    let mut out = BTreeMap::new();
    for a in c.events() {
        let Some(ra) = oracle_label(rows, a) else { continue };
        for b in c.events() {
            let (ta, tb) = (a.start().millis(), b.start().millis());
            if !(ta < tb && tb <= ta + window_ms) {
                continue;
            }
            if let Some(cb) = oracle_label(cols, b) {
                *out.entry((ra.clone(), cb)).or_insert(0) += 1;
            }
        }
    }
    out
}

/// Labels the oracle expects on an axis.
pub fn oracle_labels(spec: &CategorySpec, c: &Chronicle) -> Vec<String> {
    match spec {
        CategorySpec::Dishes => c
            .events()
            .iter()
            .filter_map(|e| e.as_food().map(|f| f.what.item_id.clone().unwrap_or(f.what.dish.clone())))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
        CategorySpec::Stream(s) => vec![s.to_string()],
        CategorySpec::Binned { attr, cuts, .. } => {
            let mut probes = vec![cuts[0] - 1.0];
            probes.extend(cuts.iter().copied());
            probes.iter().map(|v| cut_label(attr, cuts, *v)).collect()
        }
    }
}

pub fn random_spec<R: Rng>(rng: &mut R) -> CategorySpec {
    match rng.random_range(0..4) {
        0 => CategorySpec::Dishes,
        1 => CategorySpec::Stream(LIFE.choose(rng).unwrap().clone()),
        2 => CategorySpec::Binned {
            stream: Stream::Food,
            attr: "kcal".into(),
            cuts: vec![300.0, 700.0],
        },
        _ => CategorySpec::Binned {
            stream: Stream::Sleep,
            attr: "sleep_quality".into(),
            cuts: vec![50.0, 65.5, 80.0],
        },
    }
}

// Taste-space references.

/// Quantile by sorting and interpolating between neighbours at rank
/// `(n - 1) q`.
pub fn sort_quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = (v.len() - 1) as f64 * q;
    let i = pos.floor() as usize;
    let j = (i + 1).min(v.len() - 1);
    v[i] * (1.0 - (pos - i as f64)) + v[j] * (pos - i as f64)
}

pub fn oracle_item_bounds(samples: &[TasteVector], trim: f64) -> ([f64; 6], [f64; 6]) {
    let mut lo = [0.0; 6];
    let mut hi = [0.0; 6];
    for ch in 0..6 {
        let col: Vec<f64> = samples.iter().map(|s| s.to_array()[ch]).collect();
        lo[ch] = sort_quantile(&col, trim);
        hi[ch] = sort_quantile(&col, 1.0 - trim);
    }
    (lo, hi)
}

pub fn oracle_dish_bounds(recipe: &[RecipePart], regions: &BTreeMap<String, TasteRegion>) -> ([f64; 6], [f64; 6]) {
    let mut lo = [0.0; 6];
    let mut hi = [0.0; 6];
    for ch in 0..6 {
        for p in recipe {
            let r = &regions[&p.item_id];
            lo[ch] += p.proportion * r.lo.to_array()[ch];
            hi[ch] += p.proportion * r.hi.to_array()[ch];
        }
    }
    (lo, hi)
}

/// Padded box as explicit intervals.
pub fn padded(r: &TasteRegion, eps: f64) -> [(f64, f64); 6] {
    let (lo, hi) = (r.lo.to_array(), r.hi.to_array());
    std::array::from_fn(|i| {
        if hi[i] - lo[i] >= eps {
            (lo[i], hi[i])
        } else {
            let m = (lo[i] + hi[i]) / 2.0;
            (m - eps / 2.0, m + eps / 2.0)
        }
    })
}

/// Closed-form overlap: product of per-channel interval intersections over
/// the smaller product of widths.
pub fn oracle_overlap(a: &TasteRegion, b: &TasteRegion, eps: f64) -> f64 {
    let (pa, pb) = (padded(a, eps), padded(b, eps));
    let inter: f64 = (0..6).map(|i| (pa[i].1.min(pb[i].1) - pa[i].0.max(pb[i].0)).max(0.0)).product();
    let va: f64 = pa.iter().map(|(l, h)| h - l).product();
    let vb: f64 = pb.iter().map(|(l, h)| h - l).product();
    (inter / va.min(vb)).min(1.0)
}

pub fn random_vector<R: Rng>(rng: &mut R) -> TasteVector {
    TasteVector::from_array(std::array::from_fn(|_| rng.random_range(0.0..=1.0)))
}

/// Axis-aligned box with random corners in `[0, 1]`.
pub fn random_region<R: Rng>(rng: &mut R) -> TasteRegion {
    let mut lo = [0.0; 6];
    let mut hi = [0.0; 6];
    for i in 0..6 {
        let a: f64 = rng.random_range(0.0..=1.0);
        let b: f64 = if rng.random_bool(0.1) { a } else { rng.random_range(0.0..=1.0) };
        lo[i] = a.min(b);
        hi[i] = a.max(b);
    }
    TasteRegion::from_bounds(lo, hi)
}

/// Samples scattered around `center` with half-width `spread`, clamped to
/// `[0, 1]`.
pub fn samples_around<R: Rng>(rng: &mut R, center: [f64; 6], spread: f64, n: usize) -> Vec<TasteVector> {
    (0..n)
        .map(|_| TasteVector::from_array(std::array::from_fn(|i| (center[i] + rng.random_range(-spread..=spread)).clamp(0.0, 1.0))))
        .collect()
}

// Fixture scenario.

pub fn repo_root() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

/// Default config with every data path absolute and a fixed clock.
pub fn fixture_config() -> pfm_core::config::Config {
    let root = repo_root();
    let mut cfg = pfm_core::config::Config::default();
    cfg.clock_ms = Some(1_710_000_000_000);
    cfg.paths.fixtures_dir = root.join("fixtures").display().to_string();
    cfg.paths.knowledge_rules = root.join("config/knowledge_rules.json").display().to_string();
    cfg.paths.taste_calibration = root.join("config/taste_calibration.json").display().to_string();
    cfg
}

pub fn scenario_lines() -> Vec<serde_json::Value> {
    std::fs::read_to_string(repo_root().join("fixtures/scenario.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Engine over `dir` holding the enriched `demo` scenario.
pub fn scenario_engine(dir: &std::path::Path) -> pfm_core::api::Engine {
    let engine = pfm_core::api::Engine::open(dir, fixture_config()).unwrap();
    for v in scenario_lines() {
        let posted = engine.post_event("demo", v, true).unwrap();
        assert!(posted.enrichment == "ok" || posted.enrichment == "skipped", "{}", posted.enrichment);
    }
    engine
}

/// The evening soft-drink choice the scenario is built around.
pub fn soda_request() -> serde_json::Value {
    serde_json::json!({
        "user_id": "demo",
        "context": {"timestamp": "2024-02-12T20:30:00Z", "tz_offset_min": 0},
        "candidates": [
            {"dish_id": "cola", "quantity_g": 355},
            {"dish_id": "diet_cola", "quantity_g": 355},
            {"dish_id": "sparkling_water", "quantity_g": 355},
            {"dish_id": "lemonade", "quantity_g": 355}
        ],
        "goals": [{"metric": "sleep_quality", "direction": "increase"}]
    })
}
