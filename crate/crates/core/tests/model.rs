mod common;

use std::collections::BTreeMap;

use common::*;
use pfm_core::chronicle::{Chronicle, Event, FoodEvent};
use pfm_core::config::Config;
use pfm_core::enrichment::NutritionFacts;
use pfm_core::mining::{Confounder, EventPattern, Hypothesis, OutcomeSelector, TemporalCondition};
use pfm_core::model::*;
use pfm_core::synth::{generate, heavy_meal_spec};
use pfm_core::time::Timestamp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

fn shipped_rules() -> Vec<KnowledgeRule> {
    seed_rulebase(&std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/knowledge_rules.json")).unwrap()
}

fn rule(id: &str, template: serde_json::Value, direction: &str) -> KnowledgeRule {
    serde_json::from_value(json!({
        "rule_id": id,
        "description": "test rule",
        "template": template,
        "prior_direction": direction,
        "prior_strength": "moderate",
        "citation": "test"
    }))
    .unwrap()
}

fn late_heavy_rule() -> KnowledgeRule {
    rule(
        "late_heavy",
        json!({
            "input": {"steps": [{"stream": "food", "attrs": [{"attr": "kcal", "op": ">", "value": 900}],
                                 "time_of_day": {"kind": "local", "from_min": 1260, "to_min": 1380}}]},
            "outcome": {"stream": "sleep", "metric": "sleep_quality"},
            "confounders": [],
            "temporal": {"within_minutes": 360}
        }),
        "decrease",
    )
}

fn meal_at(id: &str, t: &str, kcal: f64) -> Event {
    let mut f = FoodEvent::new(id, "synth", "large pizza", t.parse().unwrap(), 0);
    f.why.nutrition = Some(NutritionFacts {
        kcal,
        ..Default::default()
    });
    f.into()
}

#[test]
fn shipped_rulebase_instantiates() {
    let rules = shipped_rules();
    assert!(rules.len() >= 8, "{} rules", rules.len());
    for r in &rules {
        r.instantiate().unwrap();
        assert!(!r.citation.is_empty());
    }
}

#[test]
fn short_chronicle_is_insufficient() {
    let (c, _) = generate(&heavy_meal_spec(1, 10, -10.0, 5.0)).unwrap();
    let err = build_model(&c, &shipped_rules(), Vec::new(), &Config::default()).unwrap_err();
    assert!(matches!(err, ModelError::InsufficientData { min_days: 28, .. }), "{err:?}");
    assert_eq!(err.code(), "insufficient_data");
}

#[test]
fn untested_rules_stay_prior_only() {
    let (c, _) = generate(&heavy_meal_spec(2, 90, -10.0, 5.0)).unwrap();
    let m = build_model(&c, &shipped_rules(), Vec::new(), &Config::default()).unwrap();
    let kiwi = m.biological.prior_only.iter().find(|p| p.rule.rule_id == "kiwi_before_bed").unwrap();
    assert_eq!(kiwi.reason, "no_occurrences");
    assert!(!m.biological.verified.iter().any(|r| r.rule_id == "kiwi_before_bed"));
    let heavy = m.biological.verified.iter().find(|r| r.rule_id == "heavy_meal_before_bed").unwrap();
    assert_eq!(heavy.verified.overall_direction, pfm_core::mining::Direction::Decrease);
    assert!(heavy.verified.overall_p < 0.05);
    // every seed rule is accounted for exactly once
    assert_eq!(m.biological.rule_ids().len(), shipped_rules().len());
}

#[test]
fn single_verified_rule_predicts_its_effect() {
    let (c, _) = generate(&heavy_meal_spec(3, 90, -10.0, 0.0)).unwrap();
    let m = build_model(&c, &[late_heavy_rule()], Vec::new(), &Config::default()).unwrap();
    assert_eq!(m.biological.verified.len(), 1);
    let ctx = &m.biological.verified[0].verified.contexts[0];
    assert!((ctx.effect + 10.0).abs() < 1e-9, "{}", ctx.effect);
    assert_eq!(ctx.validity, 1.0);

    let e = meal_at("x", "2024-06-01T21:30:00Z", 1100.0);
    let p = predict_outcome(&m, &e, &PredictionContext::default());
    assert_eq!(p.len(), 1);
    assert_eq!(p[0].metric, "sleep_quality");
    assert!((p[0].delta + 10.0).abs() < 1e-9);
    assert_eq!(p[0].confidence, 1.0);
}

#[test]
fn event_matching_no_rule_predicts_nothing() {
    let (c, _) = generate(&heavy_meal_spec(3, 90, -10.0, 0.0)).unwrap();
    let m = build_model(&c, &[late_heavy_rule()], Vec::new(), &Config::default()).unwrap();
    let e = meal_at("x", "2024-06-01T08:00:00Z", 300.0);
    assert!(predict_outcome(&m, &e, &PredictionContext::default()).is_empty());
}

#[test]
fn snapshot_round_trips() {
    let (c, _) = generate(&heavy_meal_spec(4, 40, -10.0, 5.0)).unwrap();
    let mut cfg = Config::default();
    cfg.clock_ms = Some(1_717_200_000_000);
    let m = build_model(&c, &shipped_rules(), Vec::new(), &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("models/synth.json");
    m.save(&path).unwrap();
    let back = PersonalFoodModel::load(&path).unwrap();
    assert_eq!(back.to_canonical_json(), m.to_canonical_json());
    assert_eq!(back.built_at, Timestamp(1_717_200_000_000));
}

#[test]
fn hard_constraints_match_ingredients() {
    let cs = vec![StaticConstraint {
        item_id: "Peanut".into(),
        severity: Severity::Hard,
        note: String::new(),
    }];
    assert_eq!(matching_constraints(&cs, "toast", &["peanut".to_string()]).len(), 1);
    assert_eq!(matching_constraints(&cs, "peanut", &[]).len(), 1);
    assert!(matching_constraints(&cs, "toast", &["butter".to_string()]).is_empty());
}

/// Random single-step rule sets applied to random meals, checked against a
/// direct application of each rule: a step predicate on the meal, a
/// weekday/weekend context lookup, and the additive sum.
#[test]
fn prediction_matches_rule_application_oracle() {
    let (c, _): (Chronicle, _) = generate(&heavy_meal_spec(9, 60, -10.0, 5.0)).unwrap();
    let mut day_rule = late_heavy_rule();
    day_rule.template["confounders"] = json!([{"kind": "day_type"}]);
    let base = build_model(&c, &[day_rule], Vec::new(), &Config::default()).unwrap();
    let verified_template = base.biological.verified[0].clone();
    assert_eq!(verified_template.verified.contexts.len(), 2);

    let oracle = StepOracle::from_stats(base.stats.usual_bedtime, base.stats.daily_means.get("kcal").copied());
    let metrics = ["sleep_quality", "sleep_latency"];
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut nonempty = 0;
    for case in 0..300 {
        let mut m = base.clone();
        m.biological.verified.clear();
        m.biological.prior_only.clear();
        let mut steps = Vec::new();
        for r in 0..rng.random_range(0..4) {
            let mut v = verified_template.clone();
            v.rule_id = format!("v{r}");
            let step = random_step(&mut rng);
            v.verified.hypothesis = Hypothesis {
                name: v.rule_id.clone(),
                input: EventPattern::single(step.clone()),
                outcome: OutcomeSelector {
                    stream: pfm_core::chronicle::Stream::Sleep,
                    metric: metrics[rng.random_range(0..2)].into(),
                },
                confounders: vec![Confounder::DayType],
                temporal: TemporalCondition { within_minutes: 360.0 },
                strategy: Default::default(),
            };
            for ctx in v.verified.contexts.iter_mut() {
                ctx.effect = rng.random_range(-15.0..15.0);
                ctx.validity = rng.random_range(0.0..=1.0);
            }
            steps.push((v.clone(), step));
            m.biological.verified.push(v);
        }
        let mut priors = Vec::new();
        for r in 0..rng.random_range(0..3) {
            let step = random_step(&mut rng);
            let dir = if rng.random_bool(0.5) { "increase" } else { "decrease" };
            let metric = metrics[rng.random_range(0..2)];
            let kr = rule(
                &format!("p{r}"),
                json!({"input": {"steps": [step]}, "outcome": {"stream": "sleep", "metric": metric},
                       "confounders": [], "temporal": {"within_minutes": 360}}),
                dir,
            );
            priors.push((kr.clone(), step, metric));
            m.biological.prior_only.push(PriorOnlyRule {
                rule: kr,
                reason: "no_occurrences".into(),
            });
        }

        let minute = rng.random_range(0..14 * 1440);
        let mut f = FoodEvent::new("q", "u", DISHES[rng.random_range(0..DISHES.len())], Timestamp(EPOCH_2024 + minute * MINUTE), 0);
        f.why.nutrition = Some(NutritionFacts {
            kcal: rng.random_range(0..1400) as f64,
            ..Default::default()
        });
        let event: Event = f.into();
        let weekend = event.start().is_local_weekend(0);

        let mut want: BTreeMap<String, (f64, Vec<f64>)> = BTreeMap::new();
        for (v, step) in &steps {
            if oracle.matches(step, &event) {
                let ctx = &v.verified.contexts.iter().find(|c| c.signature[0] == if weekend { "weekend" } else { "weekday" }).unwrap();
                let e = want.entry(v.verified.hypothesis.outcome.metric.clone()).or_default();
                e.0 += ctx.validity * ctx.effect;
                e.1.push(ctx.validity);
            }
        }
        for (kr, step, metric) in &priors {
            if oracle.matches(step, &event) {
                let e = want.entry(metric.to_string()).or_default();
                e.0 += kr.prior_direction.sign() * m.settings.prior_magnitude_fraction * m.settings.min_effect;
                e.1.push(0.0);
            }
        }

        let got = predict_outcome(&m, &event, &PredictionContext::default());
        assert_eq!(got.len(), want.len(), "case {case}");
        for p in &got {
            let (delta, vals) = &want[&p.metric];
            assert!((p.delta - delta).abs() < 1e-9, "case {case}: {} vs {delta}", p.delta);
            let conf = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((p.confidence - conf).abs() < 1e-12, "case {case}");
            assert_eq!(p.contributions.len(), vals.len());
        }
        nonempty += usize::from(!got.is_empty());
    }
    assert!(nonempty > 50, "{nonempty}");
}
