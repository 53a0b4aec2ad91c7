//! The personal food model: verified biological rules, a taste preference
//! profile and static constraints.

pub mod knowledge;
pub mod personalize;
pub mod predict;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use knowledge::{parse_rulebase, seed_rulebase, KnowledgeRule, PriorDirection, PriorStrength};
pub use personalize::{personalize, Biological, PersonalRule, PriorOnlyRule};
pub use predict::{predict_outcome, Contribution, OutcomePrediction, PredictionContext};

use crate::chronicle::{Chronicle, Event};
use crate::config::Config;
use crate::enrichment::normalize_query;
use crate::mining::{ChronicleStats, VerifyParams};
use crate::taste::{preference_profile, preference_score_eps, PreferenceProfile, ProfileParams, TasteError, TasteRegion};
use crate::time::Timestamp;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("rule `{rule_id}`: {reason}")]
    Schema { rule_id: String, reason: String },
    #[error("chronicle spans {span_days} days, need at least {min_days}")]
    InsufficientData { min_days: i64, span_days: i64 },
    #[error("model has no preference profile")]
    NoProfile,
    #[error("io: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

impl ModelError {
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::Schema { .. } => "schema_error",
            ModelError::InsufficientData { .. } => "insufficient_data",
            ModelError::NoProfile => "no_profile",
            ModelError::Io(_) => "io_error",
            ModelError::Parse(_) => "parse_error",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Hard,
    Soft,
}

/// An allergy or intolerance. `item_id` is matched against the normalized
/// dish name and every ingredient id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticConstraint {
    pub item_id: String,
    pub severity: Severity,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

#[derive(Debug, Deserialize)]
struct ConstraintFile {
    constraints: Vec<StaticConstraint>,
}

pub fn load_constraints(path: &Path) -> Result<Vec<StaticConstraint>, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
    let file: ConstraintFile = serde_json::from_str(&text).map_err(|e| ModelError::Parse(e.to_string()))?;
    Ok(file.constraints)
}

/// Constraints hit by a dish, hard ones first.
pub fn matching_constraints<'a>(
    constraints: &'a [StaticConstraint],
    dish_id: &str,
    ingredients: &[String],
) -> Vec<&'a StaticConstraint> {
    let dish = normalize_query(dish_id);
    let parts: Vec<String> = ingredients.iter().map(|i| normalize_query(i)).collect();
    let mut hits: Vec<&StaticConstraint> = constraints
        .iter()
        .filter(|c| {
            let item = normalize_query(&c.item_id);
            item == dish || parts.contains(&item)
        })
        .collect();
    hits.sort_by(|a, b| a.severity.cmp(&b.severity).then_with(|| a.item_id.cmp(&b.item_id)));
    hits
}

/// Settings the model needs at prediction time, frozen at build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub min_effect: f64,
    pub prior_magnitude_fraction: f64,
    pub caps: BTreeMap<String, f64>,
    pub default_cap: f64,
    pub epsilon: f64,
}

impl ModelSettings {
    pub fn from_config(cfg: &Config) -> Self {
        ModelSettings {
            min_effect: cfg.mining.min_effect,
            prior_magnitude_fraction: cfg.model.prior_magnitude_fraction,
            caps: cfg.model.caps.clone(),
            default_cap: cfg.model.default_cap,
            epsilon: cfg.taste.epsilon,
        }
    }

    pub fn cap_for(&self, metric: &str) -> f64 {
        self.caps.get(metric).copied().unwrap_or(self.default_cap)
    }

    /// Magnitude a prior-only rule contributes.
    pub fn prior_magnitude(&self) -> f64 {
        self.prior_magnitude_fraction * self.min_effect
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChronicleSpan {
    pub from: Option<Timestamp>,
    pub to: Option<Timestamp>,
    pub days: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersonalFoodModel {
    pub user_id: String,
    pub built_at: Timestamp,
    pub span: ChronicleSpan,
    pub n_events: usize,
    pub biological: Biological,
    pub preferential: Option<PreferenceProfile>,
    pub static_constraints: Vec<StaticConstraint>,
    /// Reference values used to evaluate relative predicates at predict time.
    pub stats: ChronicleStats,
    pub settings: ModelSettings,
    pub seed: u64,
}

impl PersonalFoodModel {
    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ModelError::Parse(e.to_string()))
    }

    pub fn to_canonical_json(&self) -> String {
        crate::canonical::to_canonical_string(self).expect("model serializes")
    }

    /// Writes via a temporary file and rename so readers never see a
    /// partial snapshot.
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let io = |e: std::io::Error| ModelError::Io(format!("{}: {e}", path.display()));
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_canonical_json() + "\n").map_err(io)?;
        std::fs::rename(&tmp, path).map_err(io)
    }

    pub fn hard_blocked(&self, dish_id: &str, ingredients: &[String]) -> bool {
        matching_constraints(&self.static_constraints, dish_id, ingredients)
            .iter()
            .any(|c| c.severity == Severity::Hard)
    }
}

/// Builds the full model. A chronicle without enough rated events yields a
/// model without a preference profile rather than an error.
pub fn build_model(
    chronicle: &Chronicle,
    rulebase: &[KnowledgeRule],
    constraints: Vec<StaticConstraint>,
    cfg: &Config,
) -> Result<PersonalFoodModel, ModelError> {
    let params = VerifyParams::from_config(&cfg.mining, cfg.seed);
    let biological = personalize(rulebase, chronicle, cfg.model.min_days, &params)?;
    let profile_params = ProfileParams {
        rating_threshold: cfg.taste.rating_threshold,
        clusters_max: cfg.taste.clusters_max,
        merge_cutoff: cfg.taste.merge_cutoff,
    };
    let preferential = match preference_profile(chronicle, &profile_params) {
        Ok(p) => Some(p),
        Err(TasteError::NoRatedEvents) => None,
        Err(e) => return Err(ModelError::Parse(e.to_string())),
    };
    let span = chronicle.span();
    Ok(PersonalFoodModel {
        user_id: chronicle.user_id().to_string(),
        built_at: cfg.now(),
        span: ChronicleSpan {
            from: span.map(|s| s.0),
            to: span.map(|s| s.1),
            days: chronicle.span_days(),
        },
        n_events: chronicle.len(),
        biological,
        preferential,
        static_constraints: constraints,
        stats: ChronicleStats::compute(chronicle),
        settings: ModelSettings::from_config(cfg),
        seed: cfg.seed,
    })
}

pub fn predict_liking(model: &PersonalFoodModel, region: &TasteRegion) -> Result<f64, ModelError> {
    let profile = model.preferential.as_ref().ok_or(ModelError::NoProfile)?;
    Ok(preference_score_eps(profile, region, model.settings.epsilon))
}

/// Ingredient ids of a food event, for constraint checks.
pub fn event_ingredients(event: &Event) -> Vec<String> {
    match event {
        Event::Food(f) => f.what.ingredients.iter().map(|i| i.item_id.clone()).collect(),
        Event::Life(_) => Vec::new(),
    }
}
