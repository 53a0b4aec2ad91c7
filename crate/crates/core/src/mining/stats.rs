//! Resampling statistics used by hypothesis verification.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::taste::quantile_sorted;

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Mean difference treated - control.
pub fn mean_difference(treated: &[f64], control: &[f64]) -> f64 {
    mean(treated) - mean(control)
}

// Observed statistics are compared with a small tolerance so that
// relabelings that reproduce the observed split exactly are counted even
// after float reordering.
const TIE_EPS: f64 = 1e-9;

/// Two-sided permutation test on the absolute mean difference.
/// Returns `(1 + #{|d*| >= |d|}) / (1 + n_perm)`.
pub fn permutation_test<R: Rng>(treated: &[f64], control: &[f64], n_perm: usize, rng: &mut R) -> f64 {
    let observed = mean_difference(treated, control).abs();
    let mut pool: Vec<f64> = treated.iter().chain(control).copied().collect();
    let nt = treated.len();
    let mut exceed = 0usize;
    for _ in 0..n_perm {
        pool.shuffle(rng);
        let d = mean_difference(&pool[..nt], &pool[nt..]).abs();
        if d >= observed - TIE_EPS {
            exceed += 1;
        }
    }
    (1 + exceed) as f64 / (1 + n_perm) as f64
}

/// Stratum weight n_t * n_c / (n_t + n_c).
pub fn stratum_weight(nt: usize, nc: usize) -> f64 {
    if nt + nc == 0 {
        0.0
    } else {
        (nt * nc) as f64 / (nt + nc) as f64
    }
}

/// Weighted mean of per-stratum mean differences.
pub fn stratified_effect(strata: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, c) in strata {
        let w = stratum_weight(t.len(), c.len());
        if w > 0.0 {
            num += w * mean_difference(t, c);
            den += w;
        }
    }
    if den == 0.0 {
        f64::NAN
    } else {
        num / den
    }
}

/// Permutation test that shuffles labels within each stratum only.
/// Returns `(effect, p)`.
pub fn stratified_permutation_test<R: Rng>(strata: &[(Vec<f64>, Vec<f64>)], n_perm: usize, rng: &mut R) -> (f64, f64) {
    let effect = stratified_effect(strata);
    if !effect.is_finite() {
        return (effect, 1.0);
    }
    let observed = effect.abs();
    let mut pools: Vec<(Vec<f64>, usize)> = strata
        .iter()
        .map(|(t, c)| (t.iter().chain(c).copied().collect(), t.len()))
        .collect();
    let mut exceed = 0usize;
    let mut shuffled: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(strata.len());
    for _ in 0..n_perm {
        shuffled.clear();
        for (pool, nt) in pools.iter_mut() {
            pool.shuffle(rng);
            shuffled.push((pool[..*nt].to_vec(), pool[*nt..].to_vec()));
        }
        if stratified_effect(&shuffled).abs() >= observed - TIE_EPS {
            exceed += 1;
        }
    }
    (effect, (1 + exceed) as f64 / (1 + n_perm) as f64)
}

/// Benjamini-Hochberg adjusted p-values, in input order.
pub fn benjamini_hochberg(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (0..m).rev() {
        let i = order[rank];
        let q = p[i] * m as f64 / (rank + 1) as f64;
        running = running.min(q).min(1.0);
        adjusted[i] = running;
    }
    adjusted
}

/// Fraction of bootstrap resamples (each arm resampled with replacement)
/// whose effect has the sign of `point` and magnitude at least `min_effect`.
pub fn bootstrap_validity<R: Rng>(
    treated: &[f64],
    control: &[f64],
    point: f64,
    min_effect: f64,
    n_boot: usize,
    rng: &mut R,
) -> f64 {
    if treated.is_empty() || control.is_empty() || n_boot == 0 || point == 0.0 || !point.is_finite() {
        return 0.0;
    }
    let mut hits = 0usize;
    for _ in 0..n_boot {
        let mt = (0..treated.len()).map(|_| treated[rng.random_range(0..treated.len())]).sum::<f64>() / treated.len() as f64;
        let mc = (0..control.len()).map(|_| control[rng.random_range(0..control.len())]).sum::<f64>() / control.len() as f64;
        let d = mt - mc;
        if d.signum() == point.signum() && d != 0.0 && d.abs() >= min_effect {
            hits += 1;
        }
    }
    hits as f64 / n_boot as f64
}

/// Kolmogorov-Smirnov distance between the sample and Uniform(0, 1).
pub fn ks_uniform(sample: &[f64]) -> f64 {
    if sample.is_empty() {
        return 0.0;
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Interior cut points for `k` equal-frequency bins: quantiles j/k,
/// j = 1..k-1, with linear interpolation between order statistics.
pub fn equal_frequency_boundaries(values: &[f64], k: usize) -> Vec<f64> {
    if values.is_empty() || k < 2 {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    (1..k).map(|j| quantile_sorted(&sorted, j as f64 / k as f64)).collect()
}

/// Bin index: the number of boundaries strictly below the value.
pub fn bin_index(value: f64, boundaries: &[f64]) -> usize {
    boundaries.iter().filter(|b| value > **b).count()
}
