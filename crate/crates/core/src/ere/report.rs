//! Per-class precision / recall / f1 report with accuracy and averages.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub total: usize,
    /// `confusion[t][p]`: true class `t` predicted as `p`.
    pub confusion: Vec<Vec<usize>>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ClassificationReport {
    /// Metrics for class indices `0..labels.len()`. Undefined ratios
    /// (no predictions or no support) are reported as 0.
    pub fn from_predictions(truth: &[usize], predicted: &[usize], labels: &[String]) -> Self {
        assert_eq!(truth.len(), predicted.len(), "one prediction per case");
        let k = labels.len();
        let mut confusion = vec![vec![0usize; k]; k];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        let total = truth.len();
        let classes: Vec<ClassMetrics> = (0..k)
            .map(|c| {
                let tp = confusion[c][c];
                let support: usize = confusion[c].iter().sum();
                let predicted_c: usize = confusion.iter().map(|row| row[c]).sum();
                let precision = ratio(tp, predicted_c);
                let recall = ratio(tp, support);
                let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
                ClassMetrics { label: labels[c].clone(), precision, recall, f1, support }
            })
            .collect();
        let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
        let avg = |w: &dyn Fn(&ClassMetrics) -> f64| {
            let ws: f64 = classes.iter().map(w).sum();
            let f = |g: fn(&ClassMetrics) -> f64| {
                if ws > 0.0 {
                    classes.iter().map(|c| w(c) * g(c)).sum::<f64>() / ws
                } else {
                    0.0
                }
            };
            Averages { precision: f(|c| c.precision), recall: f(|c| c.recall), f1: f(|c| c.f1) }
        };
        let macro_avg = avg(&|_| 1.0);
        let weighted_avg = avg(&|c| c.support as f64);
        ClassificationReport { classes, accuracy: ratio(correct, total), macro_avg, weighted_avg, total, confusion }
    }
}

impl fmt::Display for ClassificationReport {
    /// Two-decimal table: a header row, one row per class, then accuracy,
    /// macro avg and weighted avg.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.classes.iter().map(|c| c.label.len()).max().unwrap_or(0).max("weighted avg".len());
        writeln!(f, "{:>width$}  {:>9} {:>9} {:>9} {:>9}", "", "precision", "recall", "f1-score", "support")?;
        writeln!(f)?;
        for c in &self.classes {
            writeln!(f, "{:>width$}  {:>9.2} {:>9.2} {:>9.2} {:>9}", c.label, c.precision, c.recall, c.f1, c.support)?;
        }
        writeln!(f)?;
        writeln!(f, "{:>width$}  {:>9} {:>9} {:>9.2} {:>9}", "accuracy", "", "", self.accuracy, self.total)?;
        for (name, a) in [("macro avg", &self.macro_avg), ("weighted avg", &self.weighted_avg)] {
            writeln!(f, "{:>width$}  {:>9.2} {:>9.2} {:>9.2} {:>9}", name, a.precision, a.recall, a.f1, self.total)?;
        }
        Ok(())
    }
}
