//! Exact radius search over reduced training points, pruned by cluster.
//!
//! A bucket is skipped only when `d(q, centroid) - radius > threshold`, so
//! by the triangle inequality no skipped point can be within the threshold.

use serde::{Deserialize, Serialize};

use super::pca::euclidean;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    /// Cluster id, `None` for the bucket holding unclustered points.
    pub cluster: Option<usize>,
    pub centroid: Vec<f64>,
    pub radius: f64,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterIndex {
    pub points: Vec<Vec<f64>>,
    pub buckets: Vec<Bucket>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub point: usize,
    pub cluster: Option<usize>,
    pub distance: f64,
}

impl ClusterIndex {
    /// Build from points and their cluster labels.
    pub fn build(points: Vec<Vec<f64>>, labels: &[Option<usize>]) -> Self {
        assert_eq!(points.len(), labels.len(), "one label per point");
        let mut groups: std::collections::BTreeMap<Option<usize>, Vec<usize>> = Default::default();
        for (i, l) in labels.iter().enumerate() {
            groups.entry(*l).or_default().push(i);
        }
        let buckets = groups
            .into_iter()
            .map(|(cluster, members)| {
                let dim = points[members[0]].len();
                let mut centroid = vec![0.0; dim];
                for &m in &members {
                    for (c, x) in centroid.iter_mut().zip(&points[m]) {
                        *c += x;
                    }
                }
                centroid.iter_mut().for_each(|c| *c /= members.len() as f64);
                let radius = members.iter().map(|&m| euclidean(&points[m], &centroid)).fold(0.0, f64::max);
                Bucket { cluster, centroid, radius, members }
            })
            .collect();
        ClusterIndex { points, buckets }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Every point within `threshold` of `query`, by ascending distance then
    /// point index.
    pub fn within(&self, query: &[f64], threshold: f64) -> Vec<Hit> {
        let mut hits = Vec::new();
        for b in &self.buckets {
            // Slack keeps rounding in the bound from pruning a boundary point.
            if euclidean(query, &b.centroid) - b.radius > threshold + 1e-9 * (1.0 + threshold) {
                continue;
            }
            for &m in &b.members {
                let d = euclidean(query, &self.points[m]);
                if d <= threshold {
                    hits.push(Hit { point: m, cluster: b.cluster, distance: d });
                }
            }
        }
        hits.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.point.cmp(&b.point)));
        hits
    }

    /// Distance from each listed point to its nearest other training point.
    pub fn nearest_neighbour_distances(&self, sample: &[usize]) -> Vec<f64> {
        use rayon::prelude::*;
        sample
            .par_iter()
            .map(|&i| {
                self.points
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, p)| euclidean(&self.points[i], p))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }
}

/// Nearest-rank percentile (`p` in 0..=100) of non-empty data.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    v[rank.min(v.len()) - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index() -> ClusterIndex {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![10.0, 10.0], vec![11.0, 10.0], vec![50.0, 50.0]];
        ClusterIndex::build(pts, &[Some(0), Some(0), Some(1), Some(1), None])
    }

    #[test]
    fn exact_match_is_first_at_zero() {
        let hits = index().within(&[10.0, 10.0], 2.0);
        assert_eq!(hits[0], Hit { point: 2, cluster: Some(1), distance: 0.0 });
        assert_eq!(hits.len(), 2);
    }

    #[test]
    fn far_query_finds_nothing() {
        assert!(index().within(&[-100.0, -100.0], 5.0).is_empty());
    }

    #[test]
    fn noise_bucket_is_searched() {
        assert_eq!(index().within(&[50.0, 49.0], 1.5)[0].point, 4);
    }

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile(&v, 95.0), 19.0);
        assert_eq!(percentile(&v, 100.0), 20.0);
        assert_eq!(percentile(&[3.0], 50.0), 3.0);
        assert_eq!(percentile(&[], 50.0), 0.0);
    }

    #[test]
    fn nn_distances() {
        assert_eq!(index().nearest_neighbour_distances(&[0, 4]), vec![1.0, (39.0f64 * 39.0 + 40.0 * 40.0).sqrt()]);
    }
}
