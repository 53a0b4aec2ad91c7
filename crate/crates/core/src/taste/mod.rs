//! Six-channel taste space (umami, salty, sweet, spicy, sour, bitter).
//!
//! Items occupy axis-aligned boxes built from taste samples, dishes combine
//! their ingredients' boxes linearly by recipe proportion, and a person's
//! preferred regions come from the food they rated highly.

mod calibration;
mod profile;
mod region;
mod substitute;
mod vector;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use calibration::TasteCalibration;
pub use profile::{
    preference_profile, preference_score, preference_score_eps, profile_from_points, rated_points,
    PreferenceProfile, ProfileParams, RatedPoint, WeightedRegion,
};
pub use region::{
    dish_region, item_region, overlap, quantile_sorted, RecipePart, TasteRegion, TasteSample, DEFAULT_EPSILON,
};
pub use substitute::{substitute_search, FoodCandidate, Substitute, DEFAULT_SCORE_SLACK};
pub use vector::{taste_distance, Channel, ChannelWeights, TasteVector};

use crate::enrichment::normalize_query;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TasteError {
    #[error("no taste samples")]
    EmptySamples,
    #[error("trim fraction {0} outside [0, 0.25]")]
    BadTrim(f64),
    #[error("unknown ingredient `{0}`")]
    UnknownIngredient(String),
    #[error("bad recipe proportions: {0}")]
    BadProportions(String),
    #[error("no rated food events at or above the rating threshold")]
    NoRatedEvents,
    #[error("no candidates")]
    NoCandidates,
    #[error("unknown nutrition field `{0}`")]
    UnknownHealthKey(String),
    #[error("io: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

/// One line of `taste_samples.jsonl`. `scoville` / `sucrose_pct`, when
/// present, override the spicy / sweet channels through the calibration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TasteSampleRecord {
    pub item_id: String,
    #[serde(flatten)]
    pub vector: TasteVector,
    #[serde(default)]
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rater: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scoville: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sucrose_pct: Option<f64>,
}

/// One line of `recipes.jsonl`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecipeRecord {
    pub dish_id: String,
    #[serde(default)]
    pub names: Vec<String>,
    pub ingredients: Vec<RecipePart>,
}

/// Item and dish regions resolved from the fixture files.
#[derive(Clone, Debug, Default)]
pub struct TasteCatalog {
    pub item_regions: BTreeMap<String, TasteRegion>,
    pub recipes: BTreeMap<String, Vec<RecipePart>>,
    names: BTreeMap<String, String>,
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, TasteError> {
    let text = std::fs::read_to_string(path).map_err(|e| TasteError::Io(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| TasteError::Parse(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

impl TasteCatalog {
    pub fn from_records(
        samples: &[TasteSampleRecord],
        recipes: &[RecipeRecord],
        calibration: &TasteCalibration,
        trim_fraction: f64,
    ) -> Result<Self, TasteError> {
        let mut by_item: BTreeMap<String, Vec<TasteVector>> = BTreeMap::new();
        for s in samples {
            let mut v = s.vector;
            if let Some(shu) = s.scoville {
                v = v.with(Channel::Spicy, calibration.spicy_from_scoville(shu));
            }
            if let Some(pct) = s.sucrose_pct {
                v = v.with(Channel::Sweet, calibration.sweet_from_sucrose(pct));
            }
            if !v.is_valid() {
                return Err(TasteError::Parse(format!("taste sample for {} out of range", s.item_id)));
            }
            by_item.entry(s.item_id.clone()).or_default().push(v);
        }
        let mut catalog = TasteCatalog::default();
        for (item, vecs) in by_item {
            let region = item_region(&vecs, trim_fraction)?;
            catalog.names.insert(normalize_query(&item), item.clone());
            catalog.item_regions.insert(item, region);
        }
        for r in recipes {
            catalog.names.insert(normalize_query(&r.dish_id), r.dish_id.clone());
            for n in &r.names {
                catalog.names.insert(normalize_query(n), r.dish_id.clone());
            }
            catalog.recipes.insert(r.dish_id.clone(), r.ingredients.clone());
        }
        Ok(catalog)
    }

    pub fn load(
        samples_path: &Path,
        recipes_path: &Path,
        calibration: &TasteCalibration,
        trim_fraction: f64,
    ) -> Result<Self, TasteError> {
        let samples: Vec<TasteSampleRecord> = read_jsonl(samples_path)?;
        let recipes: Vec<RecipeRecord> = if recipes_path.exists() {
            read_jsonl(recipes_path)?
        } else {
            Vec::new()
        };
        Self::from_records(&samples, &recipes, calibration, trim_fraction)
    }

    /// Region for an item id, dish id or known dish name. Recipes win over
    /// raw item samples when both exist.
    pub fn region_for(&self, name: &str) -> Option<TasteRegion> {
        let id = self.names.get(&normalize_query(name)).map(String::as_str).unwrap_or(name);
        if let Some(recipe) = self.recipes.get(id) {
            return dish_region(recipe, &self.item_regions).ok();
        }
        self.item_regions.get(id).cloned()
    }

    /// Region from logged ingredient weights, when every ingredient is known.
    pub fn region_from_ingredients(&self, parts: &[(String, f64)]) -> Option<TasteRegion> {
        let total: f64 = parts.iter().map(|p| p.1).sum();
        if parts.is_empty() || !(total > 0.0) {
            return None;
        }
        let mut recipe: Vec<RecipePart> = parts
            .iter()
            .filter(|p| p.1 > 0.0)
            .map(|(id, g)| RecipePart {
                item_id: id.clone(),
                proportion: g / total,
            })
            .collect();
        // absorb rounding so proportions sum to 1 within tolerance
        let head: f64 = recipe[..recipe.len() - 1].iter().map(|p| p.proportion).sum();
        let last = recipe.len() - 1;
        recipe[last].proportion = 1.0 - head;
        dish_region(&recipe, &self.item_regions).ok()
    }
}
