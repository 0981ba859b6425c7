//! Labeled Gaussian clusters in the unit cube, used as a desk-scale stand-in
//! for flow features.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub centroid: Vec<f64>,
    pub spread: f64,
    pub class: usize,
    pub count: usize,
}

/// Samples every cluster in order, clipping to `[0, 1]`.
pub fn synth_generate(clusters: &[ClusterSpec], seed: u64) -> Result<Vec<(Vec<f64>, usize)>> {
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(clusters.iter().map(|c| c.count).sum());
    for (k, cluster) in clusters.iter().enumerate() {
        if cluster.count == 0 {
            return Err(Error::InvalidArgument(format!("cluster {k} has a zero sample count")));
        }
        if cluster.centroid.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidArgument(format!("cluster {k} centroid leaves the unit cube")));
        }
        if !(cluster.spread >= 0.0) {
            return Err(Error::InvalidArgument(format!("cluster {k} spread is negative")));
        }
        if cluster.spread == 0.0 {
            out.extend(std::iter::repeat_n((cluster.centroid.clone(), cluster.class), cluster.count));
            continue;
        }
        let noise = Normal::new(0.0, cluster.spread).expect("positive spread");
        for _ in 0..cluster.count {
            let x = cluster
                .centroid
                .iter()
                .map(|&c| (c + noise.sample(&mut rng)).clamp(0.0, 1.0))
                .collect();
            out.push((x, cluster.class));
        }
    }
    Ok(out)
}

/// `k` centroids over `dim` features: centroid `i` sits at `high` on its own
/// contiguous block of features and at `low` elsewhere.
pub fn block_centroids(dim: usize, k: usize, high: f64, low: f64) -> Vec<Vec<f64>> {
    (0..k)
        .map(|i| {
            let lo = dim * i / k;
            let hi = dim * (i + 1) / k;
            (0..dim).map(|d| if (lo..hi).contains(&d) { high } else { low }).collect()
        })
        .collect()
}

/// Fraction of points whose nearest centroid (Euclidean) has the point's class.
pub fn nearest_centroid_accuracy(points: &[(Vec<f64>, usize)], centroids: &[(Vec<f64>, usize)]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let hits = points
        .iter()
        .filter(|(x, class)| {
            let nearest = centroids
                .iter()
                .min_by(|a, b| dist2(x, &a.0).total_cmp(&dist2(x, &b.0)))
                .map(|c| c.1);
            nearest == Some(*class)
        })
        .count();
    hits as f64 / points.len() as f64
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_spread_reproduces_centroid() {
        let spec = [ClusterSpec {
            centroid: vec![0.2, 0.9],
            spread: 0.0,
            class: 3,
            count: 5,
        }];
        let out = synth_generate(&spec, 1).unwrap();
        assert_eq!(out.len(), 5);
        assert!(out.iter().all(|(x, c)| x == &vec![0.2, 0.9] && *c == 3));
    }

    #[test]
    fn separated_clusters_are_separable() {
        let cents = block_centroids(20, 2, 0.9, 0.1);
        let spec: Vec<ClusterSpec> = cents
            .iter()
            .enumerate()
            .map(|(k, c)| ClusterSpec {
                centroid: c.clone(),
                spread: 0.05,
                class: k,
                count: 200,
            })
            .collect();
        let out = synth_generate(&spec, 8).unwrap();
        let labeled: Vec<(Vec<f64>, usize)> = cents.into_iter().enumerate().map(|(k, c)| (c, k)).collect();
        assert_eq!(nearest_centroid_accuracy(&out, &labeled), 1.0);
        assert!(out.iter().all(|(x, _)| x.iter().all(|v| (0.0..=1.0).contains(v))));
    }

    #[test]
    fn same_seed_same_stream_and_errors() {
        let spec = [ClusterSpec {
            centroid: vec![0.5; 4],
            spread: 0.1,
            class: 0,
            count: 10,
        }];
        assert_eq!(synth_generate(&spec, 3).unwrap(), synth_generate(&spec, 3).unwrap());
        let bad = [ClusterSpec { count: 0, ..spec[0].clone() }];
        assert!(synth_generate(&bad, 3).is_err());
        let outside = [ClusterSpec {
            centroid: vec![1.5; 4],
            ..spec[0].clone()
        }];
        assert!(synth_generate(&outside, 3).is_err());
    }

    #[test]
    fn block_layout() {
        let c = block_centroids(6, 3, 1.0, 0.0);
        assert_eq!(c[1], vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
    }
}
