mod common;

use common::*;
use pfm_core::chronicle::{Event, FoodEvent};
use pfm_core::config::Config;
use pfm_core::enrichment::{enrich, NutritionFacts};
use pfm_core::model::*;
use pfm_core::recommend::*;
use pfm_core::synth::{generate, heavy_meal_spec};
use pfm_core::taste::{substitute_search, FoodCandidate, PreferenceProfile, TasteRegion, WeightedRegion};
use pfm_core::time::Timestamp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

fn late_heavy() -> KnowledgeRule {
    serde_json::from_value(json!({
        "rule_id": "late_heavy",
        "description": "test rule",
        "template": {
            "input": {"steps": [{"stream": "food", "attrs": [{"attr": "kcal", "op": ">", "value": 900}],
                                 "time_of_day": {"kind": "local", "from_min": 1260, "to_min": 1380}}]},
            "outcome": {"stream": "sleep", "metric": "sleep_quality"},
            "confounders": [],
            "temporal": {"within_minutes": 360}
        },
        "prior_direction": "decrease",
        "prior_strength": "moderate",
        "citation": "test"
    }))
    .unwrap()
}

fn base_model() -> PersonalFoodModel {
    let (c, _) = generate(&heavy_meal_spec(3, 60, -10.0, 0.0)).unwrap();
    build_model(&c, &[late_heavy()], Vec::new(), &Config::default()).unwrap()
}

fn point_profile(center: [f64; 6]) -> PreferenceProfile {
    PreferenceProfile {
        user_id: "synth".into(),
        preferred_regions: vec![WeightedRegion {
            region: TasteRegion::from_bounds(center, center),
            weight: 1.0,
        }],
        built_from: 1,
        min_rating_threshold: 4,
    }
}

fn candidate(dish: &str, region: TasteRegion, kcal: f64) -> Candidate {
    let mut c = Candidate::new(dish);
    c.region = Some(region);
    c.nutrition = Some(NutritionFacts {
        kcal,
        ..Default::default()
    });
    c
}

fn request(candidates: Vec<Candidate>, hour_min: (i64, i64), goals: Vec<Goal>) -> RecommendationRequest {
    RecommendationRequest {
        user_id: "synth".into(),
        context: RequestContext {
            timestamp: Timestamp(EPOCH_2024 + (hour_min.0 * 60 + hour_min.1) * MINUTE),
            tz_offset_min: 0,
            place: String::new(),
            confounders: Default::default(),
            recent_events: Vec::new(),
        },
        candidates,
        goals,
        weights: None,
    }
}

fn sleep_goal() -> Goal {
    Goal {
        metric: "sleep_quality".into(),
        direction: PriorDirection::Increase,
        weight: 1.0,
    }
}

#[test]
fn neutral_candidate_scores_half_health_weight() {
    let mut m = base_model();
    m.preferential = Some(point_profile([0.9; 6]));
    let req = request(vec![candidate("plain", TasteRegion::from_bounds([0.1; 6], [0.2; 6]), 100.0)], (8, 0), vec![sleep_goal()]);
    let r = recommend(&req, &m, Weights::default(), 0.2).unwrap();
    assert_eq!(r.ranked.len(), 1);
    let item = &r.ranked[0];
    assert_eq!(item.preference, 0.0);
    assert_eq!(item.health_utility, 0.5);
    assert_eq!(item.total, 0.25);
    assert!(item.explanation.predictions.is_empty());
}

#[test]
fn late_heavy_meal_loses_to_light_one() {
    let m = base_model();
    let region = TasteRegion::from_bounds([0.3; 6], [0.4; 6]);
    let req = request(
        vec![candidate("feast", region.clone(), 1400.0), candidate("broth", region, 150.0)],
        (21, 30),
        vec![sleep_goal()],
    );
    let r = recommend(&req, &m, Weights::default(), 0.2).unwrap();
    let order: Vec<&str> = r.ranked.iter().map(|i| i.dish_id.as_str()).collect();
    assert_eq!(order, ["broth", "feast"]);
    let feast = &r.ranked[1];
    let delta = feast.explanation.predictions[0].delta;
    assert!((delta + 10.0).abs() < 1e-9);
    assert!((feast.health_utility - (0.5 + 0.5 * delta / 20.0)).abs() < 1e-12);
}

#[test]
fn allergen_is_blocked_not_ranked() {
    let mut m = base_model();
    m.static_constraints = vec![StaticConstraint {
        item_id: "peanut".into(),
        severity: Severity::Hard,
        note: "anaphylaxis".into(),
    }];
    let region = TasteRegion::from_bounds([0.3; 6], [0.4; 6]);
    let mut toast = candidate("peanut_butter_toast", region.clone(), 300.0);
    toast.ingredients = vec!["bread".into(), "peanut".into()];
    let req = request(vec![toast, candidate("oatmeal", region, 200.0)], (8, 0), vec![]);
    let r = recommend(&req, &m, Weights::default(), 0.2).unwrap();
    assert_eq!(r.ranked.len(), 1);
    assert_eq!(r.ranked[0].dish_id, "oatmeal");
    assert_eq!(r.blocked.len(), 1);
    assert_eq!(r.blocked[0].dish_id, "peanut_butter_toast");
    assert_eq!(r.blocked[0].reasons, ["hard constraint: peanut"]);
}

#[test]
fn everything_blocked_gives_empty_ranking() {
    let mut m = base_model();
    m.static_constraints = vec![StaticConstraint {
        item_id: "milk".into(),
        severity: Severity::Hard,
        note: String::new(),
    }];
    let region = TasteRegion::from_bounds([0.3; 6], [0.4; 6]);
    let mut a = candidate("latte", region.clone(), 120.0);
    a.ingredients = vec!["milk".into()];
    let req = request(vec![a, candidate("milk", region, 60.0)], (8, 0), vec![]);
    let r = recommend(&req, &m, Weights::default(), 0.2).unwrap();
    assert!(r.ranked.is_empty());
    assert_eq!(r.blocked.len(), 2);
}

#[test]
fn soft_constraint_costs_the_penalty() {
    let mut m = base_model();
    m.static_constraints = vec![StaticConstraint {
        item_id: "lactose".into(),
        severity: Severity::Soft,
        note: String::new(),
    }];
    let region = TasteRegion::from_bounds([0.3; 6], [0.4; 6]);
    let mut a = candidate("latte", region, 120.0);
    a.ingredients = vec!["lactose".into()];
    let req = request(vec![a], (8, 0), vec![]);
    let r = recommend(&req, &m, Weights::default(), 0.2).unwrap();
    assert!((r.ranked[0].total - 0.05).abs() < 1e-12);
    assert_eq!(r.ranked[0].explanation.soft_constraints, ["lactose"]);
}

#[test]
fn request_errors() {
    let m = base_model();
    let req = request(vec![], (8, 0), vec![]);
    assert_eq!(recommend(&req, &m, Weights::default(), 0.2).unwrap_err(), RecommendError::NoCandidates);

    let region = TasteRegion::from_bounds([0.3; 6], [0.4; 6]);
    let mut req = request(vec![candidate("a", region.clone(), 1.0)], (8, 0), vec![]);
    req.weights = Some(Weights { w_pref: 0.7, w_health: 0.7 });
    assert_eq!(recommend(&req, &m, Weights::default(), 0.2).unwrap_err().code(), "invalid_request");

    let mut bare = Candidate::new("mystery");
    bare.region = Some(region);
    let req = request(vec![bare], (8, 0), vec![]);
    assert_eq!(
        recommend(&req, &m, Weights::default(), 0.2).unwrap_err(),
        RecommendError::IncompleteCandidate("mystery".into())
    );
}

/// Random models and candidate lists, each score recomputed from the
/// model's predictions, a closed-form box overlap and the weighted formula,
/// then ranked by sorting.
#[test]
fn ranking_matches_recomputation_oracle() {
    let base = base_model();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let allergens = ["peanut", "milk", "egg"];
    for case in 0..400 {
        let mut m = base.clone();
        let n_regions = rng.random_range(1..4);
        let raw: Vec<f64> = (0..n_regions).map(|_| rng.random_range(0.1..1.0)).collect();
        let total_w: f64 = raw.iter().sum();
        m.preferential = Some(PreferenceProfile {
            user_id: "synth".into(),
            preferred_regions: raw
                .iter()
                .map(|w| WeightedRegion {
                    region: random_region(&mut rng),
                    weight: w / total_w,
                })
                .collect(),
            built_from: n_regions as u32,
            min_rating_threshold: 4,
        });
        m.static_constraints.clear();
        for a in allergens {
            if rng.random_bool(0.3) {
                m.static_constraints.push(StaticConstraint {
                    item_id: a.to_string(),
                    severity: if rng.random_bool(0.5) { Severity::Hard } else { Severity::Soft },
                    note: String::new(),
                });
            }
        }

        let candidates: Vec<Candidate> = (0..rng.random_range(1..7))
            .map(|i| {
                let mut c = candidate(&format!("dish{i}"), random_region(&mut rng), rng.random_range(0.0..1500.0));
                c.ingredients = allergens.iter().filter(|_| rng.random_bool(0.2)).map(|a| a.to_string()).collect();
                c
            })
            .collect();
        let goals = if rng.random_bool(0.2) { vec![] } else { vec![sleep_goal()] };
        let w_pref = rng.random_range(0.0..=1.0);
        let weights = Weights {
            w_pref,
            w_health: 1.0 - w_pref,
        };
        let mut req = request(candidates.clone(), (rng.random_range(0..24), rng.random_range(0..60)), goals.clone());
        req.weights = Some(weights);

        let mut want: Vec<(String, f64)> = Vec::new();
        let mut want_blocked: Vec<String> = Vec::new();
        for c in &candidates {
            let hit = |sev: Severity| {
                m.static_constraints
                    .iter()
                    .filter(|s| s.severity == sev && (c.ingredients.contains(&s.item_id) || s.item_id == c.dish_id))
                    .count()
            };
            if hit(Severity::Hard) > 0 {
                want_blocked.push(c.dish_id.clone());
                continue;
            }
            let pref: f64 = m
                .preferential
                .as_ref()
                .unwrap()
                .preferred_regions
                .iter()
                .map(|wr| wr.weight * oracle_overlap(c.region.as_ref().unwrap(), &wr.region, 0.01))
                .sum::<f64>()
                .min(1.0);
            let event: Event = candidate_event("synth", c, &req.context).into();
            let preds = predict_outcome(&m, &event, &PredictionContext::default());
            let health = if goals.is_empty() {
                0.5
            } else {
                let delta = preds.iter().find(|p| p.metric == "sleep_quality").map_or(0.0, |p| p.delta);
                0.5 + 0.5 * (delta / 20.0).clamp(-1.0, 1.0)
            };
            let total = (weights.w_pref * pref + weights.w_health * health - 0.2 * hit(Severity::Soft) as f64).clamp(0.0, 1.0);
            want.push((c.dish_id.clone(), total));
        }
        want.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));

        let got = recommend(&req, &m, Weights::default(), 0.2).unwrap();
        assert_eq!(got.ranked.len(), want.len(), "case {case}");
        for (g, w) in got.ranked.iter().zip(&want) {
            assert_eq!(g.dish_id, w.0, "case {case}");
            assert!((g.total - w.1).abs() < 1e-9, "case {case}: {} vs {}", g.total, w.1);
            assert!(!g.blocked);
        }
        let mut blocked: Vec<String> = got.blocked.iter().map(|b| b.dish_id.clone()).collect();
        blocked.sort();
        want_blocked.sort();
        assert_eq!(blocked, want_blocked, "case {case}");
    }
}

#[test]
fn zero_health_weight_ranks_by_preference() {
    let mut m = base_model();
    m.preferential = Some(point_profile([0.5; 6]));
    let near = TasteRegion::from_bounds([0.45; 6], [0.55; 6]);
    let far = TasteRegion::from_bounds([0.0; 6], [0.2; 6]);
    let mut req = request(
        vec![candidate("far", far, 100.0), candidate("near", near, 1400.0)],
        (21, 30),
        vec![sleep_goal()],
    );
    req.weights = Some(Weights { w_pref: 1.0, w_health: 0.0 });
    let r = recommend(&req, &m, Weights::default(), 0.2).unwrap();
    assert_eq!(r.ranked[0].dish_id, "near");
    assert_eq!(r.ranked[0].total, r.ranked[0].preference);
}

#[test]
fn diet_cola_replaces_cola_for_sweet_sleeper() {
    let dir = tempfile::tempdir().unwrap();
    let engine = scenario_engine(dir.path());
    engine.build_model("demo").unwrap();
    let model = engine.model("demo").unwrap();
    assert!(model.biological.verified.iter().any(|r| r.rule_id == "sugar_evening"
        && r.verified.overall_direction == pfm_core::mining::Direction::Decrease));

    let r = engine.recommend("demo", soda_request()).unwrap();
    let order: Vec<&str> = r.ranked.iter().map(|i| i.dish_id.as_str()).collect();
    assert_eq!(order[0], "diet_cola", "{order:?}");
    let cola = r.ranked.iter().find(|i| i.dish_id == "cola").unwrap();
    assert_eq!(cola.preference, r.ranked[0].preference);
    assert!(cola.health_utility < r.ranked[0].health_utility);

    // the same choice through taste-space search, minimizing sugar
    let registry = engine.registry().unwrap();
    let catalog = registry.taste_catalog().unwrap();
    let food = |id: &str| {
        let probe = FoodEvent::new("probe", "demo", id, Timestamp(EPOCH_2024), 0);
        FoodCandidate {
            item_id: id.into(),
            region: catalog.region_for(id).unwrap(),
            nutrition: enrich(&probe, &registry, Timestamp(EPOCH_2024)).unwrap().nutrition,
        }
    };
    let profile = model.preferential.as_ref().unwrap();
    let pool: Vec<FoodCandidate> = ["diet_cola", "sparkling_water", "lemonade"].iter().map(|i| food(i)).collect();
    let subs = substitute_search(&food("cola"), &pool, profile, "sugar_g", 3).unwrap();
    assert_eq!(subs[0].item_id, "diet_cola");
    assert!(subs.iter().all(|s| s.item_id != "sparkling_water"));
}
