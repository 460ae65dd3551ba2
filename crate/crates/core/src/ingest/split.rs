use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("holdout fraction must lie strictly between 0 and 1, got {0}")]
pub struct SplitError(pub f64);

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub holdout: Vec<T>,
}

/// Number of holdout cases: `round(n * fraction)`.
pub fn holdout_size(n: usize, fraction: f64) -> usize {
    (n as f64 * fraction).round() as usize
}

/// Seeded random partition. Both halves keep the input order.
pub fn split_dataset<T>(cases: Vec<T>, holdout_fraction: f64, seed: u64) -> Result<Split<T>, SplitError> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(SplitError(holdout_fraction));
    }
    let n = cases.len();
    let k = holdout_size(n, holdout_fraction);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_holdout = vec![false; n];
    for &i in &order[..k] {
        in_holdout[i] = true;
    }
    let mut split = Split { train: Vec::with_capacity(n - k), holdout: Vec::with_capacity(k) };
    for (case, held) in cases.into_iter().zip(in_holdout) {
        if held {
            split.holdout.push(case);
        } else {
            split.train.push(case);
        }
    }
    Ok(split)
}
