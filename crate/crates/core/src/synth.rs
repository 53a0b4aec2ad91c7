//! Synthetic chronicles with planted effects and a ground-truth manifest.
//!
//! Each day gets the scheduled meals, then each behavior is drawn in spec
//! order (optionally conditioned on an earlier behavior), then one night of
//! sleep. Sleep metrics are a baseline plus Gaussian noise (`y0`) plus the
//! planted effects of the behaviors present that day (`y1`); the recorded
//! value is `y1`.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chronicle::{Chronicle, Event, FoodEvent, Ingredient, LifeEvent, Provenance, Stream};
use crate::enrichment::NutritionFacts;
use crate::time::{Timestamp, DAY_MS, MINUTE_MS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid spec: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MealSpec {
    pub name: String,
    pub dish: String,
    /// Local clock minute.
    pub time_min: i64,
    pub kcal: f64,
    #[serde(default)]
    pub kcal_sd: f64,
    /// Uniform jitter, +/- minutes.
    #[serde(default)]
    pub jitter_min: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SleepSpec {
    pub bedtime_min: i64,
    pub bedtime_jitter_min: i64,
    pub duration_min: f64,
    pub quality_base: f64,
    pub noise_sd: f64,
    pub latency_base: f64,
    pub latency_sd: f64,
}

impl Default for SleepSpec {
    fn default() -> Self {
        SleepSpec {
            bedtime_min: 23 * 60,
            bedtime_jitter_min: 20,
            duration_min: 450.0,
            quality_base: 70.0,
            noise_sd: 5.0,
            latency_base: 15.0,
            latency_sd: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BehaviorKind {
    /// A large late meal; replaces the scheduled meal named `replaces`.
    HeavyLateMeal {
        time_min: i64,
        kcal: f64,
        dish: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        replaces: Option<String>,
    },
    /// An extra food event containing one item.
    FoodItem { item: String, time_min: i64, kcal: f64, quantity_g: f64 },
    Exercise { time_min: i64, duration_min: f64, kcal_burned: f64 },
}

/// Probability of a behavior given whether an earlier behavior happened.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Given {
    pub behavior: String,
    pub p_if_present: f64,
    pub p_if_absent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Behavior {
    pub name: String,
    #[serde(default)]
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub given: Option<Given>,
    #[serde(flatten)]
    pub kind: BehaviorKind,
}

/// Additive effect of a behavior on a sleep metric (`sleep_quality` or
/// `sleep_latency`) the same night.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedEffect {
    pub behavior: String,
    pub metric: String,
    pub effect: f64,
}

pub fn default_meals() -> Vec<MealSpec> {
    let meal = |name: &str, dish: &str, time_min: i64, kcal: f64| MealSpec {
        name: name.into(),
        dish: dish.into(),
        time_min,
        kcal,
        kcal_sd: 50.0,
        jitter_min: 30,
    };
    vec![
        meal("breakfast", "oatmeal", 8 * 60, 400.0),
        meal("lunch", "chicken salad", 12 * 60 + 30, 700.0),
        meal("dinner", "pasta", 19 * 60, 650.0),
    ]
}

fn default_user() -> String {
    "synth".into()
}

fn default_start() -> String {
    "2024-01-01".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    #[serde(default = "default_user")]
    pub user_id: String,
    pub days: u32,
    pub seed: u64,
    #[serde(default = "default_start")]
    pub start_date: String,
    #[serde(default)]
    pub tz_offset_min: i32,
    #[serde(default = "default_meals")]
    pub meals: Vec<MealSpec>,
    #[serde(default)]
    pub sleep: SleepSpec,
    #[serde(default)]
    pub behaviors: Vec<Behavior>,
    #[serde(default)]
    pub effects: Vec<PlantedEffect>,
}

impl SynthSpec {
    pub fn new(days: u32, seed: u64) -> Self {
        SynthSpec {
            user_id: default_user(),
            days,
            seed,
            start_date: default_start(),
            tz_offset_min: 0,
            meals: default_meals(),
            sleep: SleepSpec::default(),
            behaviors: Vec::new(),
            effects: Vec::new(),
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.days < 1 {
            out.push("days must be >= 1".into());
        }
        if NaiveDate::parse_from_str(&self.start_date, "%Y-%m-%d").is_err() {
            out.push(format!("start_date `{}` is not YYYY-MM-DD", self.start_date));
        }
        let s = &self.sleep;
        if !(s.noise_sd >= 0.0 && s.latency_sd >= 0.0) {
            out.push("noise standard deviations must be >= 0".into());
        }
        if self.meals.iter().any(|m| !(m.kcal_sd >= 0.0) || m.jitter_min < 0) {
            out.push("meal kcal_sd and jitter_min must be >= 0".into());
        }
        let mut seen = BTreeSet::new();
        for b in &self.behaviors {
            let ps = match &b.given {
                Some(g) => {
                    if !seen.contains(&g.behavior) {
                        out.push(format!("behavior `{}` is conditioned on unknown or later `{}`", b.name, g.behavior));
                    }
                    vec![g.p_if_present, g.p_if_absent]
                }
                None => vec![b.probability],
            };
            if ps.iter().any(|p| !(0.0..=1.0).contains(p)) {
                out.push(format!("behavior `{}` has a probability outside [0, 1]", b.name));
            }
            if !seen.insert(b.name.clone()) {
                out.push(format!("duplicate behavior `{}`", b.name));
            }
        }
        for e in &self.effects {
            if !seen.contains(&e.behavior) {
                out.push(format!("effect names unknown behavior `{}`", e.behavior));
            }
            if e.metric != "sleep_quality" && e.metric != "sleep_latency" {
                out.push(format!("effect metric `{}` must be sleep_quality or sleep_latency", e.metric));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterfactual {
    pub y0: f64,
    pub y1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayTruth {
    pub date: String,
    pub behaviors: Vec<String>,
    pub sleep_event_id: String,
    pub outcomes: BTreeMap<String, Counterfactual>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SynthSpec,
    pub effects: Vec<PlantedEffect>,
    pub days: Vec<DayTruth>,
}

impl GroundTruth {
    /// Planted effect of `behavior` on `metric`, if the behavior happened at
    /// least once. Zero when it happened but nothing was planted for it.
    pub fn true_effect(&self, behavior: &str, metric: &str) -> Option<f64> {
        if self.days_with(behavior) == 0 {
            return None;
        }
        Some(
            self.effects
                .iter()
                .filter(|e| e.behavior == behavior && e.metric == metric)
                .map(|e| e.effect)
                .sum(),
        )
    }

    pub fn days_with(&self, behavior: &str) -> usize {
        self.days.iter().filter(|d| d.behaviors.iter().any(|b| b == behavior)).count()
    }
}

fn macros(kcal: f64, sugar_g: f64) -> NutritionFacts {
    NutritionFacts {
        kcal,
        carbohydrate_g: Some(kcal * 0.5 / 4.0),
        protein_g: Some(kcal * 0.2 / 4.0),
        fat_g: Some(kcal * 0.3 / 9.0),
        sugar_g: Some(sugar_g),
        ..Default::default()
    }
}

fn food(id: String, spec: &SynthSpec, dish: &str, at: Timestamp, nutrition: NutritionFacts, quantity_g: f64) -> FoodEvent {
    let mut f = FoodEvent::new(&id, &spec.user_id, dish, at, spec.tz_offset_min);
    f.what.quantity_g = quantity_g;
    f.why.nutrition = Some(nutrition);
    f.provenance.insert("nutrition".into(), Provenance::derived("synth"));
    f
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("sd validated >= 0")
}

pub fn generate(spec: &SynthSpec) -> Result<(Chronicle, GroundTruth), SynthError> {
    let violations = spec.violations();
    if !violations.is_empty() {
        return Err(SynthError::InvalidSpec(violations));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let start = NaiveDate::parse_from_str(&spec.start_date, "%Y-%m-%d").expect("validated");
    let first_day = Timestamp::from_date(start).local_day(0);
    let tz = spec.tz_offset_min;
    let s = &spec.sleep;
    let quality_noise = normal(s.noise_sd);
    let latency_noise = normal(s.latency_sd);

    let mut events: Vec<Event> = Vec::new();
    let mut days = Vec::new();
    for d in 0..spec.days as i64 {
        let midnight = Timestamp::local_day_start(first_day + d, tz);
        let at = |minute: i64| midnight.plus_ms(minute * MINUTE_MS);
        let date = midnight.date_string(tz);
        let prefix = format!("d{d:03}");

        let mut present: Vec<String> = Vec::new();
        for b in &spec.behaviors {
            let p = match &b.given {
                Some(g) if present.contains(&g.behavior) => g.p_if_present,
                Some(g) => g.p_if_absent,
                None => b.probability,
            };
            if rng.random::<f64>() < p {
                present.push(b.name.clone());
            }
        }
        let replaced: Vec<&str> = spec
            .behaviors
            .iter()
            .filter(|b| present.contains(&b.name))
            .filter_map(|b| match &b.kind {
                BehaviorKind::HeavyLateMeal { replaces, .. } => replaces.as_deref(),
                _ => None,
            })
            .collect();

        for m in &spec.meals {
            // draws happen even for replaced meals so that toggling a
            // behavior does not shift the rest of the random stream
            let jitter = if m.jitter_min > 0 { rng.random_range(-m.jitter_min..=m.jitter_min) } else { 0 };
            let kcal = (m.kcal + normal(m.kcal_sd).sample(&mut rng)).max(50.0);
            if replaced.contains(&m.name.as_str()) {
                continue;
            }
            let f = food(format!("{prefix}-{}", m.name), spec, &m.dish, at(m.time_min + jitter), macros(kcal, 10.0), kcal / 2.0);
            events.push(f.into());
        }
        for b in spec.behaviors.iter().filter(|b| present.contains(&b.name)) {
            let id = format!("{prefix}-{}", b.name);
            match &b.kind {
                BehaviorKind::HeavyLateMeal { time_min, kcal, dish, .. } => {
                    events.push(food(id, spec, dish, at(*time_min), macros(*kcal, 12.0), kcal / 2.0).into());
                }
                BehaviorKind::FoodItem {
                    item,
                    time_min,
                    kcal,
                    quantity_g,
                } => {
                    let mut f = food(id, spec, item, at(*time_min), macros(*kcal, 9.0), *quantity_g);
                    f.what.ingredients.push(Ingredient {
                        item_id: item.clone(),
                        grams: *quantity_g,
                    });
                    events.push(f.into());
                }
                BehaviorKind::Exercise {
                    time_min,
                    duration_min,
                    kcal_burned,
                } => {
                    let start = at(*time_min);
                    let end = start.plus_ms((duration_min * MINUTE_MS as f64).round() as i64);
                    let e = LifeEvent::new(&id, &spec.user_id, Stream::Exercise, start, end, tz)
                        .with("duration", *duration_min)
                        .with("kcal_burned", *kcal_burned);
                    events.push(e.into());
                }
            }
        }

        let jitter = if s.bedtime_jitter_min > 0 {
            rng.random_range(-s.bedtime_jitter_min..=s.bedtime_jitter_min)
        } else {
            0
        };
        let q0 = s.quality_base + quality_noise.sample(&mut rng);
        let l0 = (s.latency_base + latency_noise.sample(&mut rng)).max(0.0);
        let shift = |metric: &str| -> f64 {
            spec.effects
                .iter()
                .filter(|e| e.metric == metric && present.contains(&e.behavior))
                .map(|e| e.effect)
                .sum()
        };
        let q1 = q0 + shift("sleep_quality");
        let l1 = (l0 + shift("sleep_latency")).max(0.0);
        let bed = at(s.bedtime_min + jitter);
        let wake = bed.plus_ms((s.duration_min * MINUTE_MS as f64).round() as i64);
        let sleep_id = format!("{prefix}-sleep");
        events.push(
            LifeEvent::new(&sleep_id, &spec.user_id, Stream::Sleep, bed, wake, tz)
                .with("sleep_quality", q1)
                .with("sleep_latency", l1)
                .with("duration", s.duration_min)
                .into(),
        );
        let mut outcomes = BTreeMap::new();
        outcomes.insert("sleep_quality".to_string(), Counterfactual { y0: q0, y1: q1 });
        outcomes.insert("sleep_latency".to_string(), Counterfactual { y0: l0, y1: l1 });
        days.push(DayTruth {
            date,
            behaviors: present,
            sleep_event_id: sleep_id,
            outcomes,
        });
        debug_assert!(wake.millis() - midnight.millis() < 2 * DAY_MS);
    }
    let chronicle = Chronicle::from_events(&spec.user_id, events)
        .map_err(|e| SynthError::InvalidSpec(vec![format!("generated chronicle rejected: {e}")]))?;
    let truth = GroundTruth {
        spec: spec.clone(),
        effects: spec.effects.clone(),
        days,
    };
    Ok((chronicle, truth))
}

/// 90-day spec with a heavy late meal replacing dinner on ~30% of days.
pub fn heavy_meal_spec(seed: u64, days: u32, effect: f64, noise_sd: f64) -> SynthSpec {
    let mut spec = SynthSpec::new(days, seed);
    spec.sleep.noise_sd = noise_sd;
    spec.behaviors.push(Behavior {
        name: "heavy_late_meal".into(),
        probability: 0.3,
        given: None,
        kind: BehaviorKind::HeavyLateMeal {
            time_min: 21 * 60 + 30,
            kcal: 1100.0,
            dish: "large pizza".into(),
            replaces: Some("dinner".into()),
        },
    });
    if effect != 0.0 {
        spec.effects.push(PlantedEffect {
            behavior: "heavy_late_meal".into(),
            metric: "sleep_quality".into(),
            effect,
        });
    }
    spec
}

/// Exercise drives both kiwi snacking and sleep quality; kiwi itself has no
/// effect.
pub fn confounded_kiwi_spec(seed: u64, days: u32) -> SynthSpec {
    let mut spec = SynthSpec::new(days, seed);
    spec.behaviors.push(Behavior {
        name: "exercise".into(),
        probability: 0.5,
        given: None,
        kind: BehaviorKind::Exercise {
            time_min: 17 * 60 + 30,
            duration_min: 45.0,
            kcal_burned: 400.0,
        },
    });
    spec.behaviors.push(Behavior {
        name: "kiwi".into(),
        probability: 0.0,
        given: Some(Given {
            behavior: "exercise".into(),
            p_if_present: 0.8,
            p_if_absent: 0.2,
        }),
        kind: BehaviorKind::FoodItem {
            item: "kiwi".into(),
            time_min: 21 * 60,
            kcal: 90.0,
            quantity_g: 150.0,
        },
    });
    spec.effects.push(PlantedEffect {
        behavior: "exercise".into(),
        metric: "sleep_quality".into(),
        effect: 10.0,
    });
    spec
}
