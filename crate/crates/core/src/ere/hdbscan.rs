//! HDBSCAN: mutual-reachability MST, condensed cluster tree and
//! excess-of-mass cluster selection. Quadratic in the number of points, so
//! callers fit it on a bounded sample.

use serde::{Deserialize, Serialize};

use super::pca::euclidean;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HdbscanParams {
    pub min_cluster_size: usize,
    /// Neighbour count for core distances, counting the point itself.
    pub min_samples: usize,
}

impl Default for HdbscanParams {
    fn default() -> Self {
        HdbscanParams { min_cluster_size: 15, min_samples: 5 }
    }
}

/// One row of the condensed tree. `child` below `n_points` is a point that
/// left `parent` at `lambda`; otherwise it is a child cluster born there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondensedEdge {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hdbscan {
    pub n_points: usize,
    pub condensed: Vec<CondensedEdge>,
    /// Selected cluster per point, `None` for noise. Ids are dense from 0.
    pub labels: Vec<Option<usize>>,
    pub n_clusters: usize,
}

const MAX_LAMBDA: f64 = 1e12;

fn lambda_of(distance: f64) -> f64 {
    if distance > 1.0 / MAX_LAMBDA {
        1.0 / distance
    } else {
        MAX_LAMBDA
    }
}

pub fn fit_hdbscan(points: &[Vec<f64>], params: HdbscanParams) -> Hdbscan {
    let n = points.len();
    let m = params.min_cluster_size.max(2);
    if n == 0 {
        return Hdbscan { n_points: 0, condensed: Vec::new(), labels: Vec::new(), n_clusters: 0 };
    }
    if points.iter().all(|p| euclidean(p, &points[0]) == 0.0) || n < m {
        let single = n >= 1 && points.iter().all(|p| euclidean(p, &points[0]) == 0.0);
        return Hdbscan {
            n_points: n,
            condensed: Vec::new(),
            labels: vec![single.then_some(0); n],
            n_clusters: usize::from(single),
        };
    }

    let core = core_distances(points, params.min_samples.max(1));
    let mst = prim_mst(points, &core);
    let merges = single_linkage(n, mst);
    let condensed = condense(n, &merges, m);
    let selected = select_clusters(n, &condensed);
    let labels = label_points(n, &condensed, &selected);
    let n_clusters = labels.iter().flatten().max().map_or(0, |&c| c + 1);
    Hdbscan { n_points: n, condensed, labels, n_clusters }
}

fn core_distances(points: &[Vec<f64>], k: usize) -> Vec<f64> {
    use rayon::prelude::*;
    let k = k.min(points.len());
    points
        .par_iter()
        .map(|p| {
            let mut d: Vec<f64> = points.iter().map(|q| euclidean(p, q)).collect();
            d.sort_by(f64::total_cmp);
            d[k - 1]
        })
        .collect()
}

/// Edges `(a, b, weight)` of the minimum spanning tree under mutual
/// reachability distance.
fn prim_mst(points: &[Vec<f64>], core: &[f64]) -> Vec<(usize, usize, f64)> {
    let n = points.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let mrd = euclidean(&points[current], &points[j]).max(core[current]).max(core[j]);
            if mrd < best[j] {
                best[j] = mrd;
                from[j] = current;
            }
        }
        let next = (0..n)
            .filter(|&j| !in_tree[j])
            .fold(None, |acc: Option<usize>, j| match acc {
                Some(b) if best[b] <= best[j] => Some(b),
                _ => Some(j),
            })
            .expect("a vertex remains outside the tree");
        edges.push((from[next], next, best[next]));
        in_tree[next] = true;
        current = next;
    }
    edges
}

/// Merge rows `(left, right, distance, size)`; row `i` creates node `n + i`.
fn single_linkage(n: usize, mut edges: Vec<(usize, usize, f64)>) -> Vec<(usize, usize, f64, usize)> {
    edges.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut parent: Vec<usize> = (0..2 * n).collect();
    let mut size = vec![1usize; 2 * n];
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut merges = Vec::with_capacity(n - 1);
    for (i, (a, b, w)) in edges.into_iter().enumerate() {
        let ra = find(&mut parent, a);
        let rb = find(&mut parent, b);
        let node = n + i;
        parent[ra] = node;
        parent[rb] = node;
        size[node] = size[ra] + size[rb];
        merges.push((ra, rb, w, size[node]));
    }
    merges
}

fn condense(n: usize, merges: &[(usize, usize, f64, usize)], m: usize) -> Vec<CondensedEdge> {
    let root = 2 * n - 2;
    let node_size = |x: usize| if x < n { 1 } else { merges[x - n].3 };
    let leaves_under = |x: usize| {
        let mut out = Vec::new();
        let mut stack = vec![x];
        while let Some(y) = stack.pop() {
            if y < n {
                out.push(y);
            } else {
                let (l, r, _, _) = merges[y - n];
                stack.push(r);
                stack.push(l);
            }
        }
        out
    };

    let mut relabel = vec![usize::MAX; 2 * n - 1];
    relabel[root] = n;
    let mut next_label = n + 1;
    let mut out = Vec::new();
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(node) = queue.pop_front() {
        if node < n {
            continue;
        }
        let (left, right, dist, _) = merges[node - n];
        let lambda = lambda_of(dist);
        let cluster = relabel[node];
        let (ls, rs) = (node_size(left), node_size(right));
        match (ls >= m, rs >= m) {
            (true, true) => {
                for (child, size) in [(left, ls), (right, rs)] {
                    relabel[child] = next_label;
                    out.push(CondensedEdge { parent: cluster, child: next_label, lambda, size });
                    next_label += 1;
                    queue.push_back(child);
                }
            }
            (false, false) => {
                for child in [left, right] {
                    for p in leaves_under(child) {
                        out.push(CondensedEdge { parent: cluster, child: p, lambda, size: 1 });
                    }
                }
            }
            (true, false) | (false, true) => {
                let (big, small) = if ls >= m { (left, right) } else { (right, left) };
                relabel[big] = cluster;
                queue.push_back(big);
                for p in leaves_under(small) {
                    out.push(CondensedEdge { parent: cluster, child: p, lambda, size: 1 });
                }
            }
        }
    }
    out
}

/// Excess-of-mass selection; the root is never selected.
fn select_clusters(n: usize, tree: &[CondensedEdge]) -> Vec<usize> {
    let Some(max_cluster) = tree.iter().map(|e| e.parent.max(if e.size > 1 { e.child } else { 0 })).max() else {
        return Vec::new();
    };
    let count = max_cluster + 1 - n;
    let mut birth = vec![0.0; count];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); count];
    for e in tree.iter().filter(|e| e.child >= n) {
        birth[e.child - n] = e.lambda;
        children[e.parent - n].push(e.child);
    }
    let mut stability = vec![0.0; count];
    for e in tree {
        let b = birth[e.parent - n];
        stability[e.parent - n] += (e.lambda - b) * e.size as f64;
    }
    let mut selected = vec![true; count];
    selected[0] = false;
    for c in (1..count).rev() {
        let sub: f64 = children[c].iter().map(|&ch| stability[ch - n]).sum();
        if !children[c].is_empty() && sub > stability[c] {
            selected[c] = false;
            stability[c] = sub;
        } else {
            let mut stack = children[c].clone();
            while let Some(d) = stack.pop() {
                selected[d - n] = false;
                stack.extend(children[d - n].iter().copied());
            }
        }
    }
    (1..count).filter(|&c| selected[c]).map(|c| c + n).collect()
}

fn label_points(n: usize, tree: &[CondensedEdge], selected: &[usize]) -> Vec<Option<usize>> {
    let mut parent_of = std::collections::HashMap::new();
    let mut point_parent = vec![n; n];
    for e in tree {
        if e.child >= n {
            parent_of.insert(e.child, e.parent);
        } else {
            point_parent[e.child] = e.parent;
        }
    }
    let dense: std::collections::HashMap<usize, usize> = selected.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    point_parent
        .into_iter()
        .map(|mut c| loop {
            if let Some(&label) = dense.get(&c) {
                break Some(label);
            }
            match parent_of.get(&c) {
                Some(&p) => c = p,
                None => break None,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn blobs_with_noise(seed: u64) -> (Vec<Vec<f64>>, Vec<Option<usize>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centres = [[0.0, 0.0], [20.0, 0.0], [0.0, 20.0]];
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (c, centre) in centres.iter().enumerate() {
            for _ in 0..60 {
                let dx: f64 = rng.sample(StandardNormal);
                let dy: f64 = rng.sample(StandardNormal);
                pts.push(vec![centre[0] + dx, centre[1] + dy]);
                truth.push(Some(c));
            }
        }
        for _ in 0..5 {
            pts.push(vec![rng.random_range(40.0..60.0), rng.random_range(40.0..60.0)]);
            truth.push(None);
        }
        (pts, truth)
    }

    #[test]
    fn finds_planted_clusters_and_noise() {
        let (pts, truth) = blobs_with_noise(2);
        let h = fit_hdbscan(&pts, HdbscanParams { min_cluster_size: 10, min_samples: 5 });
        assert_eq!(h.n_clusters, 3);
        for c in 0..3 {
            let labels: std::collections::BTreeSet<_> =
                truth.iter().zip(&h.labels).filter(|(t, _)| **t == Some(c)).map(|(_, l)| *l).collect();
            assert_eq!(labels.len(), 1, "blob {c} split: {labels:?}");
            assert!(labels.iter().next().unwrap().is_some());
        }
        let noise = truth.iter().zip(&h.labels).filter(|(t, l)| t.is_none() && l.is_none()).count();
        assert!(noise >= 4);
    }

    #[test]
    fn identical_points_form_one_cluster() {
        let h = fit_hdbscan(&vec![vec![3.0, 3.0]; 40], HdbscanParams::default());
        assert_eq!(h.n_clusters, 1);
        assert!(h.labels.iter().all(|l| *l == Some(0)));
    }

    #[test]
    fn deterministic() {
        let (pts, _) = blobs_with_noise(5);
        let p = HdbscanParams { min_cluster_size: 8, min_samples: 4 };
        assert_eq!(fit_hdbscan(&pts, p), fit_hdbscan(&pts, p));
    }

    #[test]
    fn condensed_tree_accounts_for_every_point_once() {
        let (pts, _) = blobs_with_noise(9);
        let h = fit_hdbscan(&pts, HdbscanParams { min_cluster_size: 10, min_samples: 5 });
        let mut seen = vec![0; pts.len()];
        for e in h.condensed.iter().filter(|e| e.child < pts.len()) {
            seen[e.child] += 1;
        }
        assert!(seen.iter().all(|&s| s == 1));
    }
}
