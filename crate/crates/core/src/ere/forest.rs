//! Random forest of CART trees: Gini splits, bootstrap rows, a random
//! feature subset per node, hard majority voting.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features tried per node; `None` means `round(sqrt(d))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    /// Rows drawn per tree; `None` means the training size.
    pub max_samples: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 16,
            min_samples_leaf: 5,
            max_features: None,
            bootstrap: true,
            max_samples: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum Node {
    Leaf { class: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { class } => return class,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_classes: usize,
    pub n_features: usize,
    pub params: ForestParams,
    pub trees: Vec<DecisionTree>,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ForestError {
    #[error("training set is empty")]
    Empty,
    #[error("row {row} has {found} features, expected {expected}")]
    Ragged { row: usize, found: usize, expected: usize },
    #[error("label {label} at row {row} is outside 0..{n_classes}")]
    BadLabel { row: usize, label: usize, n_classes: usize },
    #[error("forest needs at least one tree")]
    NoTrees,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    params: ForestParams,
    max_features: usize,
}

fn argmax(counts: &[usize]) -> usize {
    counts.iter().enumerate().fold(0, |best, (i, &c)| if c > counts[best] { i } else { best })
}

/// `n * gini` = n - sum(c^2) / n.
fn weighted_impurity(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    n as f64 - sq / n as f64
}

impl Builder<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &r in rows {
            c[self.y[r]] += 1;
        }
        c
    }

    fn grow(&self, rows: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng, nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        let counts = self.counts(&rows);
        nodes.push(Node::Leaf { class: argmax(&counts) });
        let n = rows.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.params.max_depth || n < 2 * self.params.min_samples_leaf.max(1) {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&rows, &counts, rng) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| self.x[r][feature] <= threshold);
        let left = self.grow(left_rows, depth + 1, rng, nodes);
        let right = self.grow(right_rows, depth + 1, rng, nodes);
        nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }

    /// Tries features in random order until `max_features` non-constant
    /// ones have been evaluated.
    fn best_split(&self, rows: &[usize], parent: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let d = self.x[0].len();
        let order = sample(rng, d, d).into_vec();
        let n = rows.len();
        let min_leaf = self.params.min_samples_leaf.max(1);
        let parent_imp = weighted_impurity(parent, n);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut tried = 0;
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(n);
        for f in order {
            if tried >= self.max_features {
                break;
            }
            pairs.clear();
            pairs.extend(rows.iter().map(|&r| (self.x[r][f], self.y[r])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            if pairs[0].0 == pairs[n - 1].0 {
                continue;
            }
            tried += 1;
            let mut left = vec![0usize; self.n_classes];
            let mut right = parent.to_vec();
            for i in 0..n - 1 {
                let (v, c) = pairs[i];
                left[c] += 1;
                right[c] -= 1;
                let nl = i + 1;
                if nl < min_leaf || n - nl < min_leaf || v == pairs[i + 1].0 {
                    continue;
                }
                let imp = weighted_impurity(&left, nl) + weighted_impurity(&right, n - nl);
                if imp < parent_imp - 1e-12 && best.is_none_or(|b| imp < b.0 - 1e-12) {
                    best = Some((imp, f, 0.5 * (v + pairs[i + 1].0)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

impl RandomForest {
    pub fn fit(
        x: &[Vec<f64>],
        y: &[usize],
        n_classes: usize,
        params: ForestParams,
        seed: u64,
    ) -> Result<RandomForest, ForestError> {
        if x.is_empty() {
            return Err(ForestError::Empty);
        }
        if params.n_trees == 0 {
            return Err(ForestError::NoTrees);
        }
        let d = x[0].len();
        if let Some((row, r)) = x.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(ForestError::Ragged { row, found: r.len(), expected: d });
        }
        if let Some((row, &label)) = y.iter().enumerate().find(|(_, &l)| l >= n_classes) {
            return Err(ForestError::BadLabel { row, label, n_classes });
        }
        let present = {
            let mut seen = vec![false; n_classes];
            y.iter().for_each(|&l| seen[l] = true);
            seen.into_iter().filter(|s| *s).count()
        };
        if present < 2 {
            log::warn!("training labels contain a single class; the forest will predict it constantly");
        }
        let max_features = params
            .max_features
            .unwrap_or_else(|| (d as f64).sqrt().round() as usize)
            .clamp(1, d.max(1));
        let builder = Builder { x, y, n_classes, params, max_features };
        let n = x.len();
        let draw = params.max_samples.unwrap_or(n).clamp(1, n);
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64 + 1);
                let rows: Vec<usize> = if params.bootstrap {
                    (0..draw).map(|_| rng.random_range(0..n)).collect()
                } else {
                    sample(&mut rng, n, draw).into_vec()
                };
                let mut nodes = Vec::new();
                builder.grow(rows, 0, &mut rng, &mut nodes);
                DecisionTree { nodes }
            })
            .collect();
        Ok(RandomForest { n_classes, n_features: d, params, trees })
    }

    /// Fraction of trees voting for each class.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut votes = vec![0usize; self.n_classes];
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
        votes.into_iter().map(|v| v as f64 / self.trees.len() as f64).collect()
    }

    /// Majority class (lowest index on ties) and its vote fraction.
    pub fn predict(&self, x: &[f64]) -> (usize, f64) {
        let p = self.predict_proba(x);
        let best = p.iter().enumerate().fold(0, |b, (i, &v)| if v > p[b] { i } else { b });
        (best, p[best])
    }
}
