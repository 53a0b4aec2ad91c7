use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Micronutrient {
    pub amount: f64,
    pub unit: String,
}

/// Nutrition for one portion as eaten.
///
/// Macros are optional because many sources report only some of them. The
/// capsaicin figure is a heat intensity (Scoville), not a mass, so it does
/// not scale with portion size.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NutritionFacts {
    pub kcal: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carbohydrate_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protein_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fat_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sugar_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caffeine_mg: Option<f64>,
    #[serde(default)]
    pub capsaicin_scoville: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub micronutrients: BTreeMap<String, Micronutrient>,
}

pub const NUTRITION_FIELDS: [&str; 8] = [
    "kcal",
    "carbohydrate_g",
    "protein_g",
    "fat_g",
    "fiber_g",
    "sugar_g",
    "caffeine_mg",
    "capsaicin_scoville",
];

/// Declared units for the micronutrients every source must be able to carry.
pub const REQUIRED_MICRONUTRIENTS: [(&str, &str); 3] = [("b12", "ug"), ("folate", "ug"), ("magnesium", "mg")];

impl NutritionFacts {
    pub fn is_known_field(name: &str) -> bool {
        NUTRITION_FIELDS.contains(&name) || name.strip_prefix("micro.").is_some_and(|m| !m.is_empty())
    }

    /// Value of a named field; `micro.<name>` reads a micronutrient amount.
    pub fn field(&self, name: &str) -> Option<f64> {
        match name {
            "kcal" => Some(self.kcal),
            "carbohydrate_g" => self.carbohydrate_g,
            "protein_g" => self.protein_g,
            "fat_g" => self.fat_g,
            "fiber_g" => self.fiber_g,
            "sugar_g" => self.sugar_g,
            "caffeine_mg" => self.caffeine_mg,
            "capsaicin_scoville" => Some(self.capsaicin_scoville),
            other => other
                .strip_prefix("micro.")
                .and_then(|m| self.micronutrients.get(m))
                .map(|m| m.amount),
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for name in NUTRITION_FIELDS {
            if let Some(v) = self.field(name) {
                if !(v.is_finite() && v >= 0.0) {
                    out.push(format!("nutrition {name} must be a finite amount >= 0"));
                }
            }
        }
        for (name, m) in &self.micronutrients {
            if !(m.amount.is_finite() && m.amount >= 0.0) {
                out.push(format!("micronutrient {name} must be >= 0"));
            }
            if let Some((_, unit)) = REQUIRED_MICRONUTRIENTS.iter().find(|(n, _)| n == name) {
                if m.unit != *unit {
                    out.push(format!("micronutrient {name} must be in {unit}"));
                }
            }
        }
        out
    }

    /// Soft sanity check: energy from macros within 25% of stated kcal.
    pub fn energy_flags(&self) -> Vec<String> {
        match (self.carbohydrate_g, self.protein_g, self.fat_g) {
            (Some(c), Some(p), Some(f)) => {
                let macro_kcal = 4.0 * c + 4.0 * p + 9.0 * f;
                if macro_kcal == 0.0 && self.kcal == 0.0 {
                    return Vec::new();
                }
                let rel = (self.kcal - macro_kcal).abs() / macro_kcal.max(1e-9);
                if rel > 0.25 {
                    vec![format!(
                        "kcal {:.0} differs from macro estimate {:.0} by more than 25%",
                        self.kcal, macro_kcal
                    )]
                } else {
                    Vec::new()
                }
            }
            _ => Vec::new(),
        }
    }

    /// Scales mass and energy amounts; Scoville heat is left alone.
    pub fn scaled(&self, factor: f64) -> Self {
        let s = |v: Option<f64>| v.map(|x| x * factor);
        NutritionFacts {
            kcal: self.kcal * factor,
            carbohydrate_g: s(self.carbohydrate_g),
            protein_g: s(self.protein_g),
            fat_g: s(self.fat_g),
            fiber_g: s(self.fiber_g),
            sugar_g: s(self.sugar_g),
            caffeine_mg: s(self.caffeine_mg),
            capsaicin_scoville: self.capsaicin_scoville,
            micronutrients: self
                .micronutrients
                .iter()
                .map(|(k, m)| {
                    (
                        k.clone(),
                        Micronutrient {
                            amount: m.amount * factor,
                            unit: m.unit.clone(),
                        },
                    )
                })
                .collect(),
        }
    }

    /// Sum of two portions eaten together. Heat takes the maximum.
    pub fn combined(&self, other: &Self) -> Self {
        let add = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(0.0) + b.unwrap_or(0.0)),
        };
        let mut micronutrients = self.micronutrients.clone();
        for (k, m) in &other.micronutrients {
            micronutrients
                .entry(k.clone())
                .and_modify(|e| e.amount += m.amount)
                .or_insert_with(|| m.clone());
        }
        NutritionFacts {
            kcal: self.kcal + other.kcal,
            carbohydrate_g: add(self.carbohydrate_g, other.carbohydrate_g),
            protein_g: add(self.protein_g, other.protein_g),
            fat_g: add(self.fat_g, other.fat_g),
            fiber_g: add(self.fiber_g, other.fiber_g),
            sugar_g: add(self.sugar_g, other.sugar_g),
            caffeine_mg: add(self.caffeine_mg, other.caffeine_mg),
            capsaicin_scoville: self.capsaicin_scoville.max(other.capsaicin_scoville),
            micronutrients,
        }
    }
}
