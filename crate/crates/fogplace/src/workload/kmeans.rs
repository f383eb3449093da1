//! Traffic-intensity classification via one-dimensional k-means.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::workload::TrafficSeries;

/// Intensity group, ordered by cluster centroid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IntensityClass {
    Low,
    Medium,
    High,
    /// Cluster index beyond the three named groups (k > 3).
    Group(u8),
}

impl IntensityClass {
    fn from_rank(rank: usize) -> Self {
        match rank {
            0 => IntensityClass::Low,
            1 => IntensityClass::Medium,
            2 => IntensityClass::High,
            r => IntensityClass::Group(r as u8),
        }
    }
}

/// k-means++ initialization on scalar values: first centroid from the seeded
/// rng, then each next with probability proportional to squared distance.
fn kmeanspp_init(values: &[f64], k: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let mut centroids = Vec::with_capacity(k);
    centroids.push(values[rng.random_range(0..values.len())]);
    while centroids.len() < k {
        let d2: Vec<f64> = values
            .iter()
            .map(|v| {
                centroids
                    .iter()
                    .map(|c| (v - c) * (v - c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            // All remaining points coincide with a centroid; spread over the
            // distinct values deterministically instead.
            let mut distinct: Vec<f64> = values.to_vec();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            for v in distinct {
                if centroids.len() < k && !centroids.contains(&v) {
                    centroids.push(v);
                }
            }
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut chosen = values.len() - 1;
        for (i, w) in d2.iter().enumerate() {
            target -= w;
            if target <= 0.0 {
                chosen = i;
                break;
            }
        }
        centroids.push(values[chosen]);
    }
    centroids
}

/// Lloyd iterations on scalars. Returns (sorted centroids, assignment by
/// cluster rank).
pub fn kmeans_1d(values: &[f64], k: usize, seed: u64) -> Result<(Vec<f64>, Vec<usize>)> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("k = {k} < 2")));
    }
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < k {
        return Err(Error::Degenerate(format!(
            "{} distinct values for k = {k}",
            distinct.len()
        )));
    }
    let mut centroids = kmeanspp_init(values, k, seed);
    centroids.sort_by(f64::total_cmp);

    let mut assign = vec![0usize; values.len()];
    for _ in 0..300 {
        let mut changed = false;
        for (i, v) in values.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = (v - centroid).abs();
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (i, v) in values.iter().enumerate() {
            sums[assign[i]] += v;
            counts[assign[i]] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c] / counts[c] as f64;
            }
        }
        centroids.sort_by(f64::total_cmp);
        if !changed {
            break;
        }
    }
    Ok((centroids, assign))
}

/// Classify every (region, slot) traffic value into k intensity groups,
/// labeled from the lowest centroid upward. Deterministic per seed.
pub fn classify_intensity(
    series: &[TrafficSeries],
    k: usize,
    seed: u64,
) -> Result<BTreeMap<(u32, usize), IntensityClass>> {
    let mut keys = Vec::new();
    let mut values = Vec::new();
    for s in series {
        for (slot, &v) in s.values.iter().enumerate() {
            keys.push((s.region_id, slot));
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(Error::InvalidInput("no traffic values".into()));
    }
    let (_, assign) = kmeans_1d(&values, k, seed)?;
    Ok(keys
        .into_iter()
        .zip(assign)
        .map(|(key, rank)| (key, IntensityClass::from_rank(rank)))
        .collect())
}

/// Within-cluster sum of squares for an assignment (clusters defined by
/// their member means).
pub fn within_cluster_ss(values: &[f64], assign: &[usize], k: usize) -> f64 {
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (i, v) in values.iter().enumerate() {
        sums[assign[i]] += v;
        counts[assign[i]] += 1;
    }
    let means: Vec<f64> = (0..k)
        .map(|c| {
            if counts[c] > 0 {
                sums[c] / counts[c] as f64
            } else {
                0.0
            }
        })
        .collect();
    values
        .iter()
        .enumerate()
        .map(|(i, v)| (v - means[assign[i]]).powi(2))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_clusters_recovered() {
        let values = [1.0, 1.0, 1.0, 50.0, 50.0, 100.0, 100.0];
        let (centroids, assign) = kmeans_1d(&values, 3, 7).unwrap();
        assert_eq!(centroids, vec![1.0, 50.0, 100.0]);
        assert_eq!(assign, vec![0, 0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn too_few_distinct_values_is_degenerate() {
        let values = [1.0, 1.0, 2.0];
        assert!(matches!(
            kmeans_1d(&values, 3, 7),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn centroids_strictly_increase() {
        let mut rng = rng_from_seed(5);
        let values: Vec<f64> = (0..200).map(|_| rng.random::<f64>() * 90.0).collect();
        let (centroids, _) = kmeans_1d(&values, 3, 11).unwrap();
        assert!(centroids[0] < centroids[1] && centroids[1] < centroids[2]);
    }

    #[test]
    fn beats_random_assignments() {
        let mut rng = rng_from_seed(9);
        let values: Vec<f64> = (0..150)
            .map(|i| (i % 3) as f64 * 40.0 + rng.random::<f64>())
            .collect();
        let (_, assign) = kmeans_1d(&values, 3, 13).unwrap();
        let ours = within_cluster_ss(&values, &assign, 3);
        for trial in 0..1000u64 {
            let mut r = rng_from_seed(trial);
            let random: Vec<usize> = values.iter().map(|_| r.random_range(0..3)).collect();
            assert!(ours <= within_cluster_ss(&values, &random, 3) + 1e-9);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let values: Vec<f64> = (0..50).map(|i| (i as f64).sin() * 10.0 + 20.0).collect();
        assert_eq!(
            kmeans_1d(&values, 3, 3).unwrap(),
            kmeans_1d(&values, 3, 3).unwrap()
        );
    }
}
