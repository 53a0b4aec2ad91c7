//! Healthier substitutes inside the preferred taste range.

use serde::{Deserialize, Serialize};

use super::profile::{preference_score, PreferenceProfile};
use super::region::TasteRegion;
use super::vector::{taste_distance, ChannelWeights};
use super::TasteError;
use crate::enrichment::NutritionFacts;

/// How far below the target's preference score a substitute may fall.
pub const DEFAULT_SCORE_SLACK: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoodCandidate {
    pub item_id: String,
    pub region: TasteRegion,
    pub nutrition: NutritionFacts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Substitute {
    pub item_id: String,
    pub preference_score: f64,
    pub health_value: Option<f64>,
    pub taste_distance: f64,
}

pub fn substitute_search(
    target: &FoodCandidate,
    candidates: &[FoodCandidate],
    profile: &PreferenceProfile,
    health_key: &str,
    k: usize,
) -> Result<Vec<Substitute>, TasteError> {
    if !NutritionFacts::is_known_field(health_key) {
        return Err(TasteError::UnknownHealthKey(health_key.to_string()));
    }
    let pool: Vec<&FoodCandidate> = candidates.iter().filter(|c| c.item_id != target.item_id).collect();
    if pool.is_empty() {
        return Err(TasteError::NoCandidates);
    }
    let line = preference_score(profile, &target.region) - DEFAULT_SCORE_SLACK;
    let weights = ChannelWeights::default();
    let mut kept: Vec<Substitute> = pool
        .into_iter()
        .map(|c| Substitute {
            item_id: c.item_id.clone(),
            preference_score: preference_score(profile, &c.region),
            health_value: c.nutrition.field(health_key),
            taste_distance: taste_distance(&c.region.centroid, &target.region.centroid, &weights),
        })
        .filter(|s| s.preference_score >= line)
        .collect();
    kept.sort_by(|a, b| {
        let ha = a.health_value.unwrap_or(f64::INFINITY);
        let hb = b.health_value.unwrap_or(f64::INFINITY);
        ha.total_cmp(&hb)
            .then(a.taste_distance.total_cmp(&b.taste_distance))
            .then_with(|| a.item_id.cmp(&b.item_id))
    });
    kept.truncate(k);
    Ok(kept)
}
