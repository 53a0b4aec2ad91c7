//! Preferred taste regions learned from rated food events.

use serde::{Deserialize, Serialize};

use super::region::{item_region, overlap, TasteRegion, DEFAULT_EPSILON};
use super::vector::TasteVector;
use super::TasteError;
use crate::chronicle::{Chronicle, Event};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedRegion {
    pub region: TasteRegion,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreferenceProfile {
    pub user_id: String,
    pub preferred_regions: Vec<WeightedRegion>,
    pub built_from: u32,
    pub min_rating_threshold: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileParams {
    pub rating_threshold: u8,
    pub clusters_max: usize,
    pub merge_cutoff: f64,
}

impl Default for ProfileParams {
    fn default() -> Self {
        ProfileParams {
            rating_threshold: 4,
            clusters_max: 5,
            merge_cutoff: 0.15,
        }
    }
}

/// A rated point in taste space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatedPoint {
    pub centroid: TasteVector,
    pub rating: u8,
}

/// Rated food events that carry a taste region.
pub fn rated_points(chronicle: &Chronicle) -> Vec<RatedPoint> {
    chronicle
        .events()
        .iter()
        .filter_map(|e| match e {
            Event::Food(f) => match (&f.why.taste, f.rating) {
                (Some(region), Some(rating)) => Some(RatedPoint {
                    centroid: region.centroid,
                    rating,
                }),
                _ => None,
            },
            Event::Life(_) => None,
        })
        .collect()
}

pub fn preference_profile(chronicle: &Chronicle, params: &ProfileParams) -> Result<PreferenceProfile, TasteError> {
    profile_from_points(chronicle.user_id(), &rated_points(chronicle), params)
}

struct Cluster {
    members: Vec<usize>,
    mean: [f64; 6],
}

fn dist(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    (0..6).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
}

/// Greedy agglomerative clustering on centroid distance: merge the closest
/// pair while it is within `merge_cutoff`, or while there are more than
/// `clusters_max` clusters. Ties resolve to the lowest index pair.
fn cluster(points: &[[f64; 6]], params: &ProfileParams) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Cluster> = Vec::new();
    // identical points start merged
    for (i, p) in points.iter().enumerate() {
        match clusters.iter_mut().find(|c| c.mean == *p) {
            Some(c) => c.members.push(i),
            None => clusters.push(Cluster {
                members: vec![i],
                mean: *p,
            }),
        }
    }
    let mut d: Vec<Vec<f64>> = clusters
        .iter()
        .map(|a| clusters.iter().map(|b| dist(&a.mean, &b.mean)).collect())
        .collect();
    let cap = params.clusters_max.max(1);
    while clusters.len() > 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                if d[a][b] < best.0 {
                    best = (d[a][b], a, b);
                }
            }
        }
        let (min_d, a, b) = best;
        if !(min_d <= params.merge_cutoff || clusters.len() > cap) {
            break;
        }
        let absorbed = clusters.remove(b);
        d.remove(b);
        for row in d.iter_mut() {
            row.remove(b);
        }
        let target = &mut clusters[a];
        target.members.extend(absorbed.members);
        target.members.sort_unstable();
        let n = target.members.len() as f64;
        target.mean = std::array::from_fn(|i| target.members.iter().map(|&m| points[m][i]).sum::<f64>() / n);
        for k in 0..clusters.len() {
            let dk = dist(&clusters[a].mean, &clusters[k].mean);
            d[a][k] = dk;
            d[k][a] = dk;
        }
    }
    clusters.into_iter().map(|c| c.members).collect()
}

pub fn profile_from_points(
    user_id: &str,
    points: &[RatedPoint],
    params: &ProfileParams,
) -> Result<PreferenceProfile, TasteError> {
    let liked: Vec<&RatedPoint> = points.iter().filter(|p| p.rating >= params.rating_threshold).collect();
    if liked.is_empty() {
        return Err(TasteError::NoRatedEvents);
    }
    let coords: Vec<[f64; 6]> = liked.iter().map(|p| p.centroid.to_array()).collect();
    let groups = cluster(&coords, params);

    let mut regions = Vec::with_capacity(groups.len());
    let mut raw_weights = Vec::with_capacity(groups.len());
    for members in &groups {
        let vecs: Vec<TasteVector> = members.iter().map(|&m| liked[m].centroid).collect();
        regions.push(item_region(&vecs, 0.0)?);
        let w: f64 = members
            .iter()
            .map(|&m| liked[m].rating as f64 - params.rating_threshold as f64 + 1.0)
            .sum();
        raw_weights.push(w);
    }
    let total: f64 = raw_weights.iter().sum();
    let preferred_regions = regions
        .into_iter()
        .zip(raw_weights)
        .map(|(region, w)| WeightedRegion {
            region,
            weight: w / total,
        })
        .collect();
    Ok(PreferenceProfile {
        user_id: user_id.to_string(),
        preferred_regions,
        built_from: liked.len() as u32,
        min_rating_threshold: params.rating_threshold,
    })
}

/// Weighted overlap of `region` with the preferred regions, in `[0, 1]`.
pub fn preference_score(profile: &PreferenceProfile, region: &TasteRegion) -> f64 {
    preference_score_eps(profile, region, DEFAULT_EPSILON)
}

pub fn preference_score_eps(profile: &PreferenceProfile, region: &TasteRegion, epsilon: f64) -> f64 {
    profile
        .preferred_regions
        .iter()
        .map(|wr| wr.weight * overlap(region, &wr.region, epsilon))
        .sum::<f64>()
        .clamp(0.0, 1.0)
}
