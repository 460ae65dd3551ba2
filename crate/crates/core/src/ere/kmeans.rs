//! Lloyd's k-means with seeded k-means++ initialisation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pca::squared_euclidean;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .map(|(i, c)| (i, squared_euclidean(point, c)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_euclidean(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        // Totals at rounding-noise level mean every point already has a centroid.
        if total.is_nan() || total <= 1e-12 {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = d2.len() - 1;
        for (i, &w) in d2.iter().enumerate() {
            if target < w {
                pick = i;
                break;
            }
            target -= w;
        }
        centroids.push(points[pick].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_euclidean(p, centroids.last().expect("just pushed")));
        }
    }
    centroids
}

/// Fit `k` clusters. Fewer centroids are returned when the data has fewer
/// distinct points than `k`; empty clusters are dropped and ids compacted.
pub fn fit_kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> KMeans {
    if points.is_empty() || k == 0 {
        return KMeans { centroids: Vec::new(), assignments: vec![0; points.len()], iterations: 0 };
    }
    let dim = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(points, k.min(points.len()), &mut rng);
    let mut assignments = vec![usize::MAX; points.len()];
    let mut iterations = 0;
    for _ in 0..max_iter.max(1) {
        iterations += 1;
        let next: Vec<usize> = points.par_iter().map(|p| nearest(p, &centroids).0).collect();
        let changed = next != assignments;
        assignments = next;
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for (c, (sum, n)) in centroids.iter_mut().zip(sums.into_iter().zip(counts)) {
            if n > 0 {
                *c = sum.into_iter().map(|s| s / n as f64).collect();
            }
        }
    }
    compact(points, centroids, assignments, iterations)
}

fn compact(points: &[Vec<f64>], centroids: Vec<Vec<f64>>, assignments: Vec<usize>, iterations: usize) -> KMeans {
    let mut used = vec![false; centroids.len()];
    for &a in &assignments {
        used[a] = true;
    }
    let mut remap = vec![usize::MAX; centroids.len()];
    let mut kept = Vec::new();
    for (i, c) in centroids.into_iter().enumerate() {
        if used[i] {
            remap[i] = kept.len();
            kept.push(c);
        }
    }
    let assignments = assignments.into_iter().map(|a| remap[a]).collect();
    debug_assert!(points.is_empty() || !kept.is_empty());
    KMeans { centroids: kept, assignments, iterations }
}

/// Mean silhouette coefficient. Singleton clusters score 0.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    if k < 2 || points.len() < 2 {
        return 0.0;
    }
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let total: f64 = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut sums = vec![0.0; k];
            for (j, p) in points.iter().enumerate() {
                if i != j {
                    sums[labels[j]] += squared_euclidean(&points[i], p).sqrt();
                }
            }
            let own = labels[i];
            if sizes[own] <= 1 {
                return 0.0;
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            if !b.is_finite() {
                return 0.0;
            }
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        })
        .sum();
    total / points.len() as f64
}

/// Pick k from `candidates` by best silhouette on at most `sample` points.
/// Candidates larger than the point count are skipped; ties keep the smaller k.
pub fn select_k(points: &[Vec<f64>], candidates: &[usize], seed: u64, sample: usize) -> usize {
    let idx = sample_indices(points.len(), sample, seed);
    let sub: Vec<Vec<f64>> = idx.iter().map(|&i| points[i].clone()).collect();
    let mut best = (candidates.iter().copied().min().unwrap_or(1), f64::NEG_INFINITY);
    for &k in candidates {
        if k == 0 || k > sub.len() {
            continue;
        }
        let model = fit_kmeans(&sub, k, seed, 100);
        let s = silhouette(&sub, &model.assignments);
        if s > best.1 + 1e-12 {
            best = (k, s);
        }
    }
    best.0
}

/// Deterministic sorted subsample of `0..n` with at most `max` entries.
pub fn sample_indices(n: usize, max: usize, seed: u64) -> Vec<usize> {
    if n <= max {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5a3b_1e00_0001);
    let mut idx = rand::seq::index::sample(&mut rng, n, max).into_vec();
    idx.sort_unstable();
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn normal(rng: &mut ChaCha8Rng) -> f64 {
        rng.sample(StandardNormal)
    }

    fn blobs(per: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centres = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (c, centre) in centres.iter().enumerate() {
            for _ in 0..per {
                pts.push(vec![centre[0] + normal(&mut rng), centre[1] + normal(&mut rng)]);
                truth.push(c);
            }
        }
        (pts, truth)
    }

    #[test]
    fn recovers_planted_blobs() {
        let (pts, truth) = blobs(50, 3);
        let m = fit_kmeans(&pts, 3, 7, 100);
        assert_eq!(m.centroids.len(), 3);
        // Each planted blob maps to a single cluster.
        for c in 0..3 {
            let labels: std::collections::BTreeSet<_> =
                truth.iter().zip(&m.assignments).filter(|(t, _)| **t == c).map(|(_, a)| *a).collect();
            assert_eq!(labels.len(), 1);
        }
    }

    #[test]
    fn identical_points_form_one_cluster() {
        let pts = vec![vec![1.0, 2.0]; 30];
        let m = fit_kmeans(&pts, 5, 1, 50);
        assert_eq!(m.centroids.len(), 1);
        assert!(m.assignments.iter().all(|&a| a == 0));
    }

    #[test]
    fn deterministic_for_seed() {
        let (pts, _) = blobs(40, 5);
        assert_eq!(fit_kmeans(&pts, 4, 11, 100), fit_kmeans(&pts, 4, 11, 100));
    }

    #[test]
    fn silhouette_prefers_true_k() {
        let (pts, _) = blobs(40, 8);
        assert_eq!(select_k(&pts, &[2, 3, 6], 1, 1000), 3);
        let sil = silhouette(&pts, &fit_kmeans(&pts, 3, 1, 100).assignments);
        assert!(sil > 0.7 && sil <= 1.0);
    }

    #[test]
    fn subsample_is_sorted_and_bounded() {
        let s = sample_indices(1000, 10, 4);
        assert_eq!(s.len(), 10);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(sample_indices(5, 10, 4), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn near_duplicates_collapse_instead_of_panicking() {
        let pts = vec![vec![1.0, 0.0], vec![1.0 + 1e-16, 1e-17], vec![-2.0, 0.0]];
        let km = fit_kmeans(&pts, 3, 0, 50);
        assert_eq!(km.centroids.len(), 2);
        assert_eq!(km.assignments[0], km.assignments[1]);
        assert_eq!(select_k(&pts[..2], &[2, 3], 0, 10), 2);
    }
}
