//! Ranking candidate dishes by preference and predicted health outcome.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chronicle::{Event, FoodEvent, Ingredient};
use crate::enrichment::NutritionFacts;
use crate::mining::ConfounderValue;
use crate::model::{
    matching_constraints, predict_liking, predict_outcome, ModelError, OutcomePrediction, PersonalFoodModel,
    PredictionContext, PriorDirection, Severity,
};
use crate::taste::TasteRegion;
use crate::time::Timestamp;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecommendError {
    #[error("request has no candidates")]
    NoCandidates,
    #[error("no model for user `{0}`")]
    NoModel(String),
    #[error("candidate `{0}` lacks a taste region or nutrition")]
    IncompleteCandidate(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl RecommendError {
    pub fn code(&self) -> &'static str {
        match self {
            RecommendError::NoCandidates => "no_candidates",
            RecommendError::NoModel(_) => "no_model",
            RecommendError::IncompleteCandidate(_) => "incomplete_candidate",
            RecommendError::InvalidRequest(_) => "invalid_request",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequestContext {
    pub timestamp: Timestamp,
    #[serde(default)]
    pub tz_offset_min: i32,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub place: String,
    /// Keyed by confounder label, e.g. `day_type`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub confounders: BTreeMap<String, ConfounderValue>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub recent_events: Vec<Event>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub dish_id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ingredients: Vec<String>,
    #[serde(default)]
    pub quantity_g: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<TasteRegion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nutrition: Option<NutritionFacts>,
}

impl Candidate {
    pub fn new(dish_id: &str) -> Self {
        Candidate {
            dish_id: dish_id.to_string(),
            ingredients: Vec::new(),
            quantity_g: 0.0,
            region: None,
            nutrition: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub metric: String,
    pub direction: PriorDirection,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w_pref: f64,
    pub w_health: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            w_pref: 0.5,
            w_health: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecommendationRequest {
    pub user_id: String,
    pub context: RequestContext,
    pub candidates: Vec<Candidate>,
    #[serde(default)]
    pub goals: Vec<Goal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Weights>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub predictions: Vec<OutcomePrediction>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub soft_constraints: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub dish_id: String,
    pub total: f64,
    pub preference: f64,
    pub health_utility: f64,
    pub blocked: bool,
    pub explanation: Explanation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockedItem {
    pub dish_id: String,
    pub reasons: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub user_id: String,
    pub ranked: Vec<ScoredItem>,
    pub blocked: Vec<BlockedItem>,
}

/// Scoring knobs that do not come from the request.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreSettings {
    pub weights: Weights,
    pub soft_penalty: f64,
}

/// The hypothetical food event a candidate stands for.
pub fn candidate_event(user_id: &str, c: &Candidate, ctx: &RequestContext) -> FoodEvent {
    let mut e = FoodEvent::new(&format!("candidate:{}", c.dish_id), user_id, &c.dish_id, ctx.timestamp, ctx.tz_offset_min);
    e.what.quantity_g = c.quantity_g;
    e.what.ingredients = c
        .ingredients
        .iter()
        .map(|i| Ingredient {
            item_id: i.clone(),
            grams: 0.0,
        })
        .collect();
    e.place.place = ctx.place.clone();
    e.why.nutrition = c.nutrition.clone();
    e.why.taste = c.region.clone();
    e
}

/// Health utility of a set of predictions: each goal maps its
/// direction-aligned delta through the metric cap into `[0, 1]`, 0.5 being
/// no predicted effect, and goals are averaged by weight.
pub fn health_utility(model: &PersonalFoodModel, predictions: &[OutcomePrediction], goals: &[Goal]) -> f64 {
    let total_weight: f64 = goals.iter().map(|g| g.weight).sum();
    if goals.is_empty() || total_weight <= 0.0 {
        return 0.5;
    }
    goals
        .iter()
        .map(|g| {
            let delta = predictions.iter().find(|p| p.metric == g.metric).map_or(0.0, |p| p.delta);
            let aligned = g.direction.sign() * delta;
            let cap = model.settings.cap_for(&g.metric);
            g.weight * (0.5 + 0.5 * (aligned / cap).clamp(-1.0, 1.0))
        })
        .sum::<f64>()
        / total_weight
}

pub fn score_candidate(
    model: &PersonalFoodModel,
    candidate: &Candidate,
    ctx: &RequestContext,
    goals: &[Goal],
    settings: ScoreSettings,
) -> Result<ScoredItem, RecommendError> {
    let region = candidate
        .region
        .as_ref()
        .ok_or_else(|| RecommendError::IncompleteCandidate(candidate.dish_id.clone()))?;
    if candidate.nutrition.is_none() {
        return Err(RecommendError::IncompleteCandidate(candidate.dish_id.clone()));
    }
    let hits = matching_constraints(&model.static_constraints, &candidate.dish_id, &candidate.ingredients);
    let blocked = hits.iter().any(|c| c.severity == Severity::Hard);
    let soft: Vec<String> = hits
        .iter()
        .filter(|c| c.severity == Severity::Soft)
        .map(|c| c.item_id.clone())
        .collect();

    let event = Event::Food(candidate_event(&model.user_id, candidate, ctx));
    let pctx = PredictionContext {
        recent_events: ctx.recent_events.clone(),
        confounders: ctx.confounders.clone(),
    };
    let predictions = predict_outcome(model, &event, &pctx);
    let preference = match predict_liking(model, region) {
        Ok(s) => s,
        Err(ModelError::NoProfile) => 0.0,
        Err(e) => return Err(RecommendError::InvalidRequest(e.to_string())),
    };
    let health = health_utility(model, &predictions, goals);
    let w = settings.weights;
    let total = (w.w_pref * preference + w.w_health * health - settings.soft_penalty * soft.len() as f64).clamp(0.0, 1.0);
    Ok(ScoredItem {
        dish_id: candidate.dish_id.clone(),
        total,
        preference,
        health_utility: health,
        blocked,
        explanation: Explanation {
            predictions,
            soft_constraints: soft,
        },
    })
}

fn validate(request: &RecommendationRequest, weights: Weights) -> Result<(), RecommendError> {
    if request.candidates.is_empty() {
        return Err(RecommendError::NoCandidates);
    }
    let bad = |m: &str| Err(RecommendError::InvalidRequest(m.to_string()));
    if !(weights.w_pref >= 0.0 && weights.w_health >= 0.0) || (weights.w_pref + weights.w_health - 1.0).abs() > 1e-9 {
        return bad("w_pref and w_health must be >= 0 and sum to 1");
    }
    if request.goals.iter().any(|g| !(g.weight >= 0.0)) {
        return bad("goal weights must be >= 0");
    }
    if !request.goals.is_empty() && request.goals.iter().map(|g| g.weight).sum::<f64>() <= 0.0 {
        return bad("goal weights must not all be 0");
    }
    Ok(())
}

/// Ranks the candidates. Hard-constrained dishes never enter the ranking;
/// they are listed under `blocked` with their reasons.
pub fn recommend(
    request: &RecommendationRequest,
    model: &PersonalFoodModel,
    default_weights: Weights,
    soft_penalty: f64,
) -> Result<Recommendation, RecommendError> {
    let weights = request.weights.unwrap_or(default_weights);
    validate(request, weights)?;
    let settings = ScoreSettings { weights, soft_penalty };
    let mut ranked = Vec::new();
    let mut blocked = Vec::new();
    for c in &request.candidates {
        let hard: Vec<String> = matching_constraints(&model.static_constraints, &c.dish_id, &c.ingredients)
            .into_iter()
            .filter(|h| h.severity == Severity::Hard)
            .map(|h| format!("hard constraint: {}", h.item_id))
            .collect();
        if !hard.is_empty() {
            blocked.push(BlockedItem {
                dish_id: c.dish_id.clone(),
                reasons: hard,
            });
            continue;
        }
        let item = score_candidate(model, c, &request.context, &request.goals, settings)?;
        if !item.blocked {
            ranked.push(item);
        }
    }
    ranked.sort_by(|a, b| b.total.total_cmp(&a.total).then_with(|| a.dish_id.cmp(&b.dish_id)));
    blocked.sort_by(|a, b| a.dish_id.cmp(&b.dish_id));
    Ok(Recommendation {
        user_id: request.user_id.clone(),
        ranked,
        blocked,
    })
}
