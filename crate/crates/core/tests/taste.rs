mod common;

use std::collections::BTreeMap;

use common::*;
use pfm_core::enrichment::NutritionFacts;
use pfm_core::taste::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_recipe<R: Rng>(rng: &mut R, n: usize) -> Vec<RecipePart> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut parts: Vec<RecipePart> = raw
        .iter()
        .enumerate()
        .map(|(i, w)| RecipePart {
            item_id: format!("i{i}"),
            proportion: w / total,
        })
        .collect();
    let head: f64 = parts[..n - 1].iter().map(|p| p.proportion).sum();
    parts[n - 1].proportion = 1.0 - head;
    parts
}

#[test]
fn item_region_matches_sorted_quantiles() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for case in 0..1000 {
        let n = rng.random_range(1..40);
        let samples: Vec<TasteVector> = (0..n).map(|_| random_vector(&mut rng)).collect();
        let trim = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..=0.25) };
        let r = item_region(&samples, trim).unwrap();
        let (lo, hi) = oracle_item_bounds(&samples, trim);
        for i in 0..6 {
            assert!((r.lo.to_array()[i] - lo[i]).abs() < 1e-12, "case {case}");
            assert!((r.hi.to_array()[i] - hi[i]).abs() < 1e-12, "case {case}");
        }
        if trim == 0.0 {
            assert!(samples.iter().all(|s| r.contains(s)), "case {case}: containment");
        }
        assert!(r.contains(&r.centroid));
    }
}

#[test]
fn dish_region_matches_weighted_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for case in 0..1000 {
        let n = rng.random_range(1..7);
        let regions: BTreeMap<String, TasteRegion> = (0..n).map(|i| (format!("i{i}"), random_region(&mut rng))).collect();
        let recipe = random_recipe(&mut rng, n);
        let d = dish_region(&recipe, &regions).unwrap();
        let (lo, hi) = oracle_dish_bounds(&recipe, &regions);
        for i in 0..6 {
            assert!((d.lo.to_array()[i] - lo[i]).abs() < 1e-9, "case {case}");
            assert!((d.hi.to_array()[i] - hi[i]).abs() < 1e-9, "case {case}");
        }
    }
}

#[test]
fn single_ingredient_dish_is_the_item() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..500 {
        let r = random_region(&mut rng);
        let regions = BTreeMap::from([("x".to_string(), r.clone())]);
        let d = dish_region(&[RecipePart { item_id: "x".into(), proportion: 1.0 }], &regions).unwrap();
        assert_eq!(d.lo, r.lo);
        assert_eq!(d.hi, r.hi);
    }
}

/// Mixes of uniform draws inside each ingredient box. The hull corners are
/// only reached when every ingredient draw is near its own corner, so the
/// boxes are kept narrow enough for 10^5 draws to get within 0.01.
#[test]
fn dish_region_matches_monte_carlo_hull() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for case in 0..5 {
        let regions: BTreeMap<String, TasteRegion> = (0..5)
            .map(|i| {
                let lo: [f64; 6] = std::array::from_fn(|_| rng.random_range(0.0..0.95));
                let hi: [f64; 6] = std::array::from_fn(|c| lo[c] + rng.random_range(0.0..0.03));
                (format!("i{i}"), TasteRegion::from_bounds(lo, hi))
            })
            .collect();
        let recipe = random_recipe(&mut rng, 5);
        let d = dish_region(&recipe, &regions).unwrap();
        let mut min = [f64::INFINITY; 6];
        let mut max = [f64::NEG_INFINITY; 6];
        for _ in 0..100_000 {
            let mut mix = [0.0; 6];
            for p in &recipe {
                let r = &regions[&p.item_id];
                let (lo, hi) = (r.lo.to_array(), r.hi.to_array());
                for c in 0..6 {
                    mix[c] += p.proportion * rng.random_range(lo[c]..=hi[c]);
                }
            }
            for c in 0..6 {
                min[c] = min[c].min(mix[c]);
                max[c] = max[c].max(mix[c]);
            }
        }
        for c in 0..6 {
            assert!((d.lo.to_array()[c] - min[c]).abs() <= 0.01, "case {case} ch {c}");
            assert!((d.hi.to_array()[c] - max[c]).abs() <= 0.01, "case {case} ch {c}");
            assert!(d.lo.to_array()[c] <= min[c] + 1e-12 && max[c] <= d.hi.to_array()[c] + 1e-12);
        }
    }
}

#[test]
fn preference_score_matches_box_intersection() {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    for case in 0..2000 {
        let k = rng.random_range(1..5);
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut profile = PreferenceProfile {
            user_id: "u".into(),
            preferred_regions: raw
                .iter()
                .map(|w| WeightedRegion {
                    region: random_region(&mut rng),
                    weight: w / total,
                })
                .collect(),
            built_from: k as u32,
            min_rating_threshold: 4,
        };
        let region = random_region(&mut rng);
        let want: f64 = profile
            .preferred_regions
            .iter()
            .map(|wr| wr.weight * oracle_overlap(&region, &wr.region, 0.01))
            .sum::<f64>()
            .min(1.0);
        let got = preference_score(&profile, &region);
        assert!((got - want).abs() < 1e-9, "case {case}: {got} vs {want}");
        profile.preferred_regions.reverse();
        assert!((preference_score(&profile, &region) - got).abs() < 1e-12);
    }
}

#[test]
fn identical_and_disjoint_regions() {
    let r = TasteRegion::from_bounds([0.2; 6], [0.4; 6]);
    let profile = PreferenceProfile {
        user_id: "u".into(),
        preferred_regions: vec![WeightedRegion { region: r.clone(), weight: 1.0 }],
        built_from: 1,
        min_rating_threshold: 4,
    };
    assert_eq!(preference_score(&profile, &r), 1.0);
    let mut far = [0.2; 6];
    far[0] = 0.9;
    let mut far_hi = [0.4; 6];
    far_hi[0] = 1.0;
    assert_eq!(preference_score(&profile, &TasteRegion::from_bounds(far, far_hi)), 0.0);
}

#[test]
fn two_planted_clusters_are_recovered() {
    let sweet = Channel::Sweet.index();
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    for case in 0..200 {
        let mut points = Vec::new();
        for center in [0.2, 0.8] {
            let mut c = [0.3; 6];
            c[sweet] = center;
            let n = rng.random_range(5..20);
            for v in samples_around(&mut rng, c, 0.03, n) {
                points.push(RatedPoint { centroid: v, rating: rng.random_range(4..=5) });
            }
        }
        for _ in 0..rng.random_range(0..10) {
            points.push(RatedPoint { centroid: random_vector(&mut rng), rating: rng.random_range(1..=3) });
        }
        let p = profile_from_points("u", &points, &ProfileParams::default()).unwrap();
        assert_eq!(p.preferred_regions.len(), 2, "case {case}");
        let mut centers: Vec<f64> = p.preferred_regions.iter().map(|w| w.region.centroid.to_array()[sweet]).collect();
        centers.sort_by(f64::total_cmp);
        assert!((centers[0] - 0.2).abs() < 0.05 && (centers[1] - 0.8).abs() < 0.05, "case {case}: {centers:?}");
        let w: f64 = p.preferred_regions.iter().map(|r| r.weight).sum();
        assert!((w - 1.0).abs() < 1e-12);
    }
}

#[test]
fn low_ratings_alone_give_no_profile() {
    let points = vec![RatedPoint { centroid: TasteVector::splat(0.5), rating: 2 }];
    assert!(matches!(
        profile_from_points("u", &points, &ProfileParams::default()),
        Err(TasteError::NoRatedEvents)
    ));
}

#[test]
fn substitutes_match_filter_and_sort() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    for case in 0..1000 {
        let profile = PreferenceProfile {
            user_id: "u".into(),
            preferred_regions: vec![WeightedRegion { region: random_region(&mut rng), weight: 1.0 }],
            built_from: 1,
            min_rating_threshold: 4,
        };
        let food = |rng: &mut ChaCha8Rng, id: String| FoodCandidate {
            item_id: id,
            region: random_region(rng),
            nutrition: NutritionFacts {
                kcal: 100.0,
                // a coarse grid so ties exercise the distance tiebreak
                sugar_g: if rng.random_bool(0.1) { None } else { Some(rng.random_range(0..4) as f64) },
                ..Default::default()
            },
        };
        let target = food(&mut rng, "target".into());
        let pool: Vec<FoodCandidate> = (0..rng.random_range(1..12)).map(|i| food(&mut rng, format!("c{i}"))).collect();
        let k = rng.random_range(1..6);

        let line = oracle_overlap(&target.region, &profile.preferred_regions[0].region, 0.01) - 0.1;
        let dist = |c: &FoodCandidate| {
            let (a, b) = (c.region.centroid.to_array(), target.region.centroid.to_array());
            (0..6).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
        };
        let mut want: Vec<(f64, f64, String)> = pool
            .iter()
            .filter(|c| oracle_overlap(&c.region, &profile.preferred_regions[0].region, 0.01) >= line - 1e-12)
            .map(|c| (c.nutrition.sugar_g.unwrap_or(f64::INFINITY), dist(c), c.item_id.clone()))
            .collect();
        want.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
        want.truncate(k);

        let got = substitute_search(&target, &pool, &profile, "sugar_g", k).unwrap();
        let got_ids: Vec<&str> = got.iter().map(|s| s.item_id.as_str()).collect();
        let want_ids: Vec<&str> = want.iter().map(|w| w.2.as_str()).collect();
        assert_eq!(got_ids, want_ids, "case {case}");
        assert!(got.iter().all(|s| s.preference_score >= line - 1e-12));
    }
}

#[test]
fn substitute_search_errors() {
    let r = TasteRegion::from_bounds([0.2; 6], [0.4; 6]);
    let profile = PreferenceProfile {
        user_id: "u".into(),
        preferred_regions: vec![WeightedRegion { region: r.clone(), weight: 1.0 }],
        built_from: 1,
        min_rating_threshold: 4,
    };
    let target = FoodCandidate { item_id: "t".into(), region: r, nutrition: NutritionFacts::default() };
    assert!(matches!(substitute_search(&target, &[], &profile, "sugar_g", 3), Err(TasteError::NoCandidates)));
    assert!(matches!(
        substitute_search(&target, &[target.clone()], &profile, "sugar_g", 3),
        Err(TasteError::NoCandidates)
    ));
}

#[test]
fn shipped_catalog_loads() {
    let root = repo_root();
    let calib = TasteCalibration::load(&root.join("config/taste_calibration.json")).unwrap();
    let cat = TasteCatalog::load(&root.join("fixtures/taste_samples.jsonl"), &root.join("fixtures/recipes.jsonl"), &calib, 0.0).unwrap();
    let cola = cat.region_for("cola").unwrap();
    let diet = cat.region_for("diet_cola").unwrap();
    assert!(diet.contains(&cola.centroid));
    assert!(cat.region_for("pizza").is_some());
    assert!(cat.region_for("pb toast").is_some());
    assert!(cat.region_for("no such dish").is_none());
}
