//! Empirical risk estimation: encoding, reduction, clustering, similarity
//! search and severity forests over historical crash cases.

pub mod assess;
pub mod forest;
pub mod hdbscan;
pub mod kmeans;
pub mod model;
pub mod pca;
pub mod report;
pub mod search;
pub mod severity;
pub mod synthetic;

pub use assess::{ere_assess, ere_assess_with, EreAssessment, RatingOutcome, SevereOutcome};
pub use model::{train_ere, ClusterMethod, ClusterParams, EreModel, Evaluation, Match, ModelError, TrainError, TrainParams};
pub use severity::{binary_severity, compute_csi, severity_level, SeverityCounts, SeverityLevel};
