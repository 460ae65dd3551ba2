//! Principal-component reducer.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReducerError {
    #[error("need at least 2 training vectors, got {0}")]
    TooFewVectors(usize),
    #[error("k must lie in 1..={dim}, got {k}")]
    BadK { k: usize, dim: usize },
    #[error("vector {index} has length {found}, expected {expected}")]
    Ragged { index: usize, found: usize, expected: usize },
    #[error("training vectors contain non-finite values")]
    NonFinite,
    #[error("eigendecomposition did not converge")]
    NoConvergence,
}

/// Linear projection onto the top-k principal axes. Each axis is oriented so
/// its largest-magnitude loading is positive (first such loading on ties).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reducer {
    pub mean: Vec<f64>,
    /// `k` rows of length `dim`, orthonormal.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

pub fn fit_reducer(vectors: &[Vec<f64>], k: usize) -> Result<Reducer, ReducerError> {
    let n = vectors.len();
    if n < 2 {
        return Err(ReducerError::TooFewVectors(n));
    }
    let dim = vectors[0].len();
    if k == 0 || k > dim {
        return Err(ReducerError::BadK { k, dim });
    }
    if let Some((index, v)) = vectors.iter().enumerate().find(|(_, v)| v.len() != dim) {
        return Err(ReducerError::Ragged { index, found: v.len(), expected: dim });
    }

    if vectors.iter().flatten().any(|x| !x.is_finite()) {
        return Err(ReducerError::NonFinite);
    }

    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centred = Mat::<f64>::from_fn(n, dim, |i, j| vectors[i][j] - mean[j]);
    let scatter = centred.transpose() * &centred;
    let eig = scatter.self_adjoint_eigen(Side::Lower).map_err(|_| ReducerError::NoConvergence)?;
    let (values, axes) = (eig.S(), eig.U());
    let values: Vec<f64> = (0..dim).map(|i| values[i] / (n as f64 - 1.0)).collect();
    if values.iter().any(|x| !x.is_finite()) || (0..dim).any(|c| axes.col(c).iter().any(|x| !x.is_finite())) {
        return Err(ReducerError::NoConvergence);
    }

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &c in order.iter().take(k) {
        let mut axis: Vec<f64> = axes.col(c).iter().copied().collect();
        let pivot = axis
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > axis[best].abs() + 1e-12 { i } else { best });
        if axis[pivot] < 0.0 {
            axis.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(axis);
        explained_variance.push(values[c].max(0.0));
    }
    Ok(Reducer { mean, components, explained_variance })
}

impl Reducer {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn reduce(&self, v: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(v).zip(&self.mean).map(|((w, x), m)| w * (x - m)).sum())
            .collect()
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vectors(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect()).collect()
    }

    #[test]
    fn full_rank_preserves_distances() {
        let vs = random_vectors(40, 6, 1);
        let r = fit_reducer(&vs, 6).unwrap();
        let red: Vec<_> = vs.iter().map(|v| r.reduce(v)).collect();
        for i in 0..vs.len() {
            for j in 0..vs.len() {
                assert!((euclidean(&vs[i], &vs[j]) - euclidean(&red[i], &red[j])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn collinear_points_have_no_residual() {
        let vs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 2.0 * i as f64 + 1.0]).collect();
        let r = fit_reducer(&vs, 1).unwrap();
        for v in &vs {
            let z = r.reduce(v)[0];
            let back: Vec<f64> = r.components[0].iter().zip(&r.mean).map(|(c, m)| m + c * z).collect();
            assert!(euclidean(&back, v) < 1e-9);
        }
        assert!(r.components[0].iter().all(|&x| x > 0.0));
    }

    #[test]
    fn sign_convention_and_order() {
        let vs = random_vectors(50, 4, 9);
        let r = fit_reducer(&vs, 4).unwrap();
        for c in &r.components {
            let max = c.iter().cloned().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(max > 0.0);
        }
        assert!(r.explained_variance.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(fit_reducer(&vs, 4).unwrap(), r);
    }

    #[test]
    fn errors() {
        assert_eq!(fit_reducer(&[vec![1.0]], 1), Err(ReducerError::TooFewVectors(1)));
        assert!(matches!(fit_reducer(&[vec![1.0], vec![2.0]], 2), Err(ReducerError::BadK { .. })));
        assert!(matches!(fit_reducer(&[vec![1.0], vec![2.0, 1.0]], 1), Err(ReducerError::Ragged { index: 1, .. })));
    }

    #[test]
    fn two_vectors_in_high_dimension_stay_finite() {
        // Rank-one covariance with repeated structure; this once produced NaN axes.
        let flips = [10, 32, 33, 36, 37, 44, 45, 64, 74, 82, 83, 94, 95, 134, 135, 138, 140, 142, 144];
        let a: Vec<f64> = (0..147).map(|j| if j % 7 == 0 { 0.5 } else { 0.0 }).collect();
        let mut b = a.clone();
        for &j in &flips {
            b[j] = if j % 2 == 0 { 1.0 } else { -1.0 };
        }
        let r = fit_reducer(&[a.clone(), b.clone()], 32).unwrap();
        assert!(r.components.iter().flatten().all(|x| x.is_finite()));
        assert!((r.explained_variance[0] - squared_euclidean(&a, &b) / 2.0).abs() < 1e-9);
        assert!((euclidean(&r.reduce(&a), &r.reduce(&b)) - euclidean(&a, &b)).abs() < 1e-9);
        assert_eq!(fit_reducer(&[a, vec![f64::NAN; 147]], 2), Err(ReducerError::NonFinite));
    }

    proptest::proptest! {
        #[test]
        fn variances_sum_to_total_variance(
            rows in proptest::collection::vec(proptest::collection::vec(-3i8..=3, 12), 2..8),
        ) {
            let vs: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&x| f64::from(x) / 2.0).collect()).collect();
            let n = vs.len() as f64;
            let total: f64 = (0..12)
                .map(|j| {
                    let m = vs.iter().map(|v| v[j]).sum::<f64>() / n;
                    vs.iter().map(|v| (v[j] - m).powi(2)).sum::<f64>() / (n - 1.0)
                })
                .sum();
            let r = fit_reducer(&vs, 12).unwrap();
            let sum: f64 = r.explained_variance.iter().sum();
            proptest::prop_assert!((sum - total).abs() < 1e-9 * (1.0 + total));
            proptest::prop_assert!(r.explained_variance.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
