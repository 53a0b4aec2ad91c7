//! Axis-aligned taste hypervolumes.
//!
//! Item regions come from empirical quantiles of taste samples, dish regions
//! from interval-weighted sums over a recipe. Boxes keep intersection volume
//! closed-form.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::vector::{Channel, TasteVector};
use super::TasteError;

/// Minimum channel width used when measuring volumes, so that degenerate
/// (zero-width) boxes still have a usable overlap ratio.
pub const DEFAULT_EPSILON: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TasteSample {
    pub item_id: String,
    pub vector: TasteVector,
    #[serde(default)]
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rater: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TasteRegion {
    pub lo: TasteVector,
    pub hi: TasteVector,
    pub sample_count: u32,
    pub centroid: TasteVector,
}

impl TasteRegion {
    /// Degenerate box around a single point.
    pub fn point(v: TasteVector) -> Self {
        TasteRegion {
            lo: v,
            hi: v,
            sample_count: 1,
            centroid: v,
        }
    }

    pub fn from_bounds(lo: [f64; 6], hi: [f64; 6]) -> Self {
        let centroid: [f64; 6] = std::array::from_fn(|i| 0.5 * (lo[i] + hi[i]));
        TasteRegion {
            lo: TasteVector::from_array(lo),
            hi: TasteVector::from_array(hi),
            sample_count: 1,
            centroid: TasteVector::from_array(centroid),
        }
    }

    pub fn interval(&self, channel: Channel) -> (f64, f64) {
        (self.lo.get(channel), self.hi.get(channel))
    }

    pub fn contains(&self, v: &TasteVector) -> bool {
        let (lo, hi, p) = (self.lo.to_array(), self.hi.to_array(), v.to_array());
        (0..6).all(|i| lo[i] <= p[i] && p[i] <= hi[i])
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = self.lo.violations();
        out.extend(self.hi.violations());
        let (lo, hi) = (self.lo.to_array(), self.hi.to_array());
        for c in Channel::ALL {
            let i = c.index();
            if lo[i] > hi[i] {
                out.push(format!("taste channel {} has lo > hi", c.name()));
            }
        }
        if !self.contains(&self.centroid) {
            out.push("taste centroid outside region".into());
        }
        if self.sample_count == 0 {
            out.push("taste region sample_count must be >= 1".into());
        }
        out
    }

    /// Channel bounds padded to at least `epsilon` width around the midpoint.
    pub fn padded_bounds(&self, epsilon: f64) -> ([f64; 6], [f64; 6]) {
        let (mut lo, mut hi) = (self.lo.to_array(), self.hi.to_array());
        for i in 0..6 {
            let width = hi[i] - lo[i];
            if width < epsilon {
                let mid = 0.5 * (lo[i] + hi[i]);
                lo[i] = mid - 0.5 * epsilon;
                hi[i] = mid + 0.5 * epsilon;
            }
        }
        (lo, hi)
    }

    pub fn volume(&self, epsilon: f64) -> f64 {
        let (lo, hi) = self.padded_bounds(epsilon);
        (0..6).map(|i| hi[i] - lo[i]).product()
    }
}

/// Intersection volume over the smaller box volume, in `[0, 1]`.
pub fn overlap(a: &TasteRegion, b: &TasteRegion, epsilon: f64) -> f64 {
    let (alo, ahi) = a.padded_bounds(epsilon);
    let (blo, bhi) = b.padded_bounds(epsilon);
    let mut inter = 1.0;
    for i in 0..6 {
        let w = ahi[i].min(bhi[i]) - alo[i].max(blo[i]);
        if w <= 0.0 {
            return 0.0;
        }
        inter *= w;
    }
    let smaller = a.volume(epsilon).min(b.volume(epsilon));
    (inter / smaller).clamp(0.0, 1.0)
}

/// Empirical quantile with linear interpolation between order statistics
/// (`h = (n - 1) * q`). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lower = h.floor() as usize;
    let upper = (lower + 1).min(n - 1);
    let frac = h - lower as f64;
    sorted[lower] + frac * (sorted[upper] - sorted[lower])
}

/// Hypervolume of a food item from its taste samples. Each channel spans the
/// `[trim, 1 - trim]` quantile range; the centroid averages the values that
/// fall inside it.
pub fn item_region(samples: &[TasteVector], trim_fraction: f64) -> Result<TasteRegion, TasteError> {
    if samples.is_empty() {
        return Err(TasteError::EmptySamples);
    }
    if !(0.0..=0.25).contains(&trim_fraction) {
        return Err(TasteError::BadTrim(trim_fraction));
    }
    let mut lo = [0.0; 6];
    let mut hi = [0.0; 6];
    let mut centroid = [0.0; 6];
    for i in 0..6 {
        let mut values: Vec<f64> = samples.iter().map(|s| s.to_array()[i]).collect();
        values.sort_by(f64::total_cmp);
        lo[i] = quantile_sorted(&values, trim_fraction);
        hi[i] = quantile_sorted(&values, 1.0 - trim_fraction);
        let kept: Vec<f64> = values.iter().copied().filter(|v| *v >= lo[i] && *v <= hi[i]).collect();
        centroid[i] = if kept.is_empty() {
            0.5 * (lo[i] + hi[i])
        } else {
            (kept.iter().sum::<f64>() / kept.len() as f64).clamp(lo[i], hi[i])
        };
    }
    Ok(TasteRegion {
        lo: TasteVector::from_array(lo),
        hi: TasteVector::from_array(hi),
        sample_count: samples.len() as u32,
        centroid: TasteVector::from_array(centroid),
    })
}

/// One ingredient line of a recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecipePart {
    pub item_id: String,
    pub proportion: f64,
}

/// Dish hypervolume as the proportion-weighted sum of ingredient intervals.
pub fn dish_region(
    recipe: &[RecipePart],
    item_regions: &BTreeMap<String, TasteRegion>,
) -> Result<TasteRegion, TasteError> {
    if recipe.is_empty() {
        return Err(TasteError::BadProportions("empty recipe".into()));
    }
    if let Some(bad) = recipe.iter().find(|p| !(p.proportion > 0.0) || !p.proportion.is_finite()) {
        return Err(TasteError::BadProportions(format!(
            "proportion for {} must be > 0",
            bad.item_id
        )));
    }
    let total: f64 = recipe.iter().map(|p| p.proportion).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(TasteError::BadProportions(format!("proportions sum to {total}, not 1")));
    }
    let mut lo = [0.0; 6];
    let mut hi = [0.0; 6];
    let mut centroid = [0.0; 6];
    let mut count = 0u32;
    for part in recipe {
        let region = item_regions
            .get(&part.item_id)
            .ok_or_else(|| TasteError::UnknownIngredient(part.item_id.clone()))?;
        let (rlo, rhi, rc) = (region.lo.to_array(), region.hi.to_array(), region.centroid.to_array());
        for i in 0..6 {
            lo[i] += part.proportion * rlo[i];
            hi[i] += part.proportion * rhi[i];
            centroid[i] += part.proportion * rc[i];
        }
        count = count.saturating_add(region.sample_count);
    }
    for i in 0..6 {
        lo[i] = lo[i].clamp(0.0, 1.0);
        hi[i] = hi[i].clamp(lo[i], 1.0);
        centroid[i] = centroid[i].clamp(lo[i], hi[i]);
    }
    Ok(TasteRegion {
        lo: TasteVector::from_array(lo),
        hi: TasteVector::from_array(hi),
        sample_count: count.max(1),
        centroid: TasteVector::from_array(centroid),
    })
}
