//! Trained ERE artifact: schema, reducer, cluster index, two forests.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::forest::{ForestError, ForestParams, RandomForest};
use super::hdbscan::{fit_hdbscan, CondensedEdge, HdbscanParams};
use super::kmeans::{fit_kmeans, sample_indices, select_k};
use super::pca::{euclidean, fit_reducer, Reducer, ReducerError};
use super::report::ClassificationReport;
use super::search::{percentile, ClusterIndex};
use super::severity::SeverityLevel;
use crate::ingest::ConsolidatedCase;
use crate::scene::encoding::{ElementSpec, EncodingError, EncodingSchema, FeatureVector};

pub const MODEL_FORMAT: &str = "adsb-ere-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterMethod {
    Kmeans,
    Hdbscan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub method: ClusterMethod,
    /// Fixed k for k-means; `None` selects by silhouette over `k_candidates`.
    pub k: Option<usize>,
    pub k_candidates: Vec<usize>,
    pub hdbscan: HdbscanParams,
    /// Points used for silhouette scoring and for fitting HDBSCAN.
    pub max_fit_points: usize,
    pub max_iter: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            method: ClusterMethod::Kmeans,
            k: None,
            k_candidates: vec![8, 16, 32, 64],
            hdbscan: HdbscanParams::default(),
            max_fit_points: 2000,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub seed: u64,
    /// Reduced dimension; clamped to the encoded dimension.
    pub components: usize,
    pub max_categories: usize,
    pub cluster: ClusterParams,
    pub forest: ForestParams,
    /// Percentile of training nearest-neighbour distances used as the
    /// similarity threshold.
    pub threshold_percentile: f64,
    /// Rows used to fit the reducer.
    pub max_reducer_rows: usize,
    /// Rows whose nearest-neighbour distance feeds the threshold.
    pub max_threshold_rows: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            seed: 42,
            components: 32,
            max_categories: 32,
            cluster: ClusterParams::default(),
            forest: ForestParams::default(),
            threshold_percentile: 95.0,
            max_reducer_rows: 50_000,
            max_threshold_rows: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub method: ClusterMethod,
    pub centroids: Vec<Vec<f64>>,
    /// Cluster per training case, `None` for HDBSCAN noise.
    pub assignments: Vec<Option<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condensed: Option<Vec<CondensedEdge>>,
}

/// What a match reports about the historical case behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub case_id: String,
    pub crash_type: String,
    pub trigger_event: Option<String>,
    pub severity_level: SeverityLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub seed: u64,
    pub train_size: usize,
    pub params: TrainParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EreModel {
    pub format: String,
    pub version: u32,
    pub schema_fingerprint: String,
    pub schema: EncodingSchema,
    pub reducer: Reducer,
    pub cluster_model: ClusterModel,
    pub index: ClusterIndex,
    pub exemplars: Vec<Exemplar>,
    pub severe_forest: RandomForest,
    pub rating_forest: RandomForest,
    pub similarity_threshold: f64,
    pub metadata: ModelMetadata,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("need at least 2 training cases, got {0}")]
    TooFewCases(usize),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Reducer(#[from] ReducerError),
    #[error(transparent)]
    Forest(#[from] ForestError),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file is not valid: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("not an ERE model file (format `{0}`)")]
    Format(String),
    #[error("model version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("schema fingerprint mismatch: file says {stored}, schema hashes to {computed}")]
    Fingerprint { stored: String, computed: String },
    #[error("inconsistent model: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub cluster: Option<usize>,
    pub case_id: String,
    pub crash_type: String,
    pub trigger_event: Option<String>,
    pub severity_level: SeverityLevel,
    pub distance: f64,
}

pub fn severity_labels() -> Vec<String> {
    SeverityLevel::ALL.iter().map(|l| l.to_string()).collect()
}

pub fn binary_labels() -> Vec<String> {
    vec!["0".into(), "1".into()]
}

/// Train every ERE component from consolidated cases.
pub fn train_ere(cases: &[ConsolidatedCase], specs: &[ElementSpec], params: &TrainParams) -> Result<EreModel, TrainError> {
    if cases.len() < 2 {
        return Err(TrainError::TooFewCases(cases.len()));
    }
    let schema = EncodingSchema::fit(specs, cases.iter().map(|c| &c.causal), params.max_categories);
    let vectors: Vec<Vec<f64>> = cases
        .par_iter()
        .map(|c| schema.encode(&c.causal).map(|v| v.values))
        .collect::<Result<_, _>>()?;
    let dim = schema.dimension();
    let k = params.components.clamp(1, dim.max(1));
    if k < params.components {
        log::info!("reducing to {k} components (encoded dimension is {dim})");
    }
    let rows = sample_indices(vectors.len(), params.max_reducer_rows.max(2), params.seed);
    let fit_rows: Vec<Vec<f64>> = rows.iter().map(|&i| vectors[i].clone()).collect();
    let reducer = fit_reducer(&fit_rows, k)?;
    let reduced: Vec<Vec<f64>> = vectors.par_iter().map(|v| reducer.reduce(v)).collect();

    let cluster_model = fit_clusters(&reduced, &params.cluster, params.seed);
    let index = ClusterIndex::build(reduced, &cluster_model.assignments);
    let nn_rows = sample_indices(index.len(), params.max_threshold_rows.max(1), params.seed.wrapping_add(1));
    let similarity_threshold = percentile(&index.nearest_neighbour_distances(&nn_rows), params.threshold_percentile);

    let y_severe: Vec<usize> = cases.iter().map(|c| usize::from(c.binary_severity)).collect();
    let y_level: Vec<usize> = cases.iter().map(|c| c.severity_level.index()).collect();
    let severe_forest = RandomForest::fit(&vectors, &y_severe, 2, params.forest, params.seed.wrapping_add(2))?;
    let rating_forest = RandomForest::fit(&vectors, &y_level, 5, params.forest, params.seed.wrapping_add(3))?;

    let exemplars = cases
        .iter()
        .map(|c| Exemplar {
            case_id: c.case_id.clone(),
            crash_type: c.effects.crash_type.clone(),
            trigger_event: c.trigger_event().map(str::to_string),
            severity_level: c.severity_level,
        })
        .collect();

    Ok(EreModel {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        schema_fingerprint: schema.fingerprint().to_string(),
        schema,
        reducer,
        cluster_model,
        index,
        exemplars,
        severe_forest,
        rating_forest,
        similarity_threshold,
        metadata: ModelMetadata { seed: params.seed, train_size: cases.len(), params: params.clone() },
    })
}

fn fit_clusters(points: &[Vec<f64>], p: &ClusterParams, seed: u64) -> ClusterModel {
    match p.method {
        ClusterMethod::Kmeans => {
            let k = p.k.unwrap_or_else(|| select_k(points, &p.k_candidates, seed, p.max_fit_points));
            let km = fit_kmeans(points, k, seed, p.max_iter);
            ClusterModel {
                method: ClusterMethod::Kmeans,
                centroids: km.centroids,
                assignments: km.assignments.into_iter().map(Some).collect(),
                condensed: None,
            }
        }
        ClusterMethod::Hdbscan => {
            let sample = sample_indices(points.len(), p.max_fit_points, seed);
            let sub: Vec<Vec<f64>> = sample.iter().map(|&i| points[i].clone()).collect();
            let h = fit_hdbscan(&sub, p.hdbscan);
            let dim = points.first().map_or(0, Vec::len);
            let mut sums = vec![vec![0.0; dim]; h.n_clusters];
            let mut counts = vec![0usize; h.n_clusters];
            for (p, l) in sub.iter().zip(&h.labels) {
                if let Some(c) = *l {
                    counts[c] += 1;
                    sums[c].iter_mut().zip(p).for_each(|(s, x)| *s += x);
                }
            }
            let centroids: Vec<Vec<f64>> =
                sums.into_iter().zip(&counts).map(|(s, &n)| s.into_iter().map(|x| x / n as f64).collect()).collect();
            let mut radius = vec![0.0f64; h.n_clusters];
            for (p, l) in sub.iter().zip(&h.labels) {
                if let Some(c) = *l {
                    radius[c] = radius[c].max(euclidean(p, &centroids[c]));
                }
            }
            // Points outside the fitted sample join the nearest cluster when
            // they fall inside its radius, otherwise they are noise.
            let mut assignments = vec![None; points.len()];
            let mut s = 0;
            for (i, pt) in points.iter().enumerate() {
                if s < sample.len() && sample[s] == i {
                    assignments[i] = h.labels[s];
                    s += 1;
                    continue;
                }
                assignments[i] = centroids
                    .iter()
                    .enumerate()
                    .map(|(c, cen)| (c, euclidean(pt, cen)))
                    .filter(|(c, d)| *d <= radius[*c])
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(c, _)| c);
            }
            ClusterModel { method: ClusterMethod::Hdbscan, centroids, assignments, condensed: Some(h.condensed) }
        }
    }
}

impl EreModel {
    pub fn encode_case(&self, case: &ConsolidatedCase) -> Result<FeatureVector, EncodingError> {
        self.schema.encode(&case.causal)
    }

    pub fn reduce(&self, v: &FeatureVector) -> Result<Vec<f64>, EncodingError> {
        v.ensure_fingerprint(&self.schema_fingerprint)?;
        Ok(self.reducer.reduce(&v.values))
    }

    /// Training cases within the similarity threshold, nearest first.
    pub fn find_similar(&self, v: &FeatureVector) -> Result<Vec<Match>, EncodingError> {
        let q = self.reduce(v)?;
        Ok(self
            .index
            .within(&q, self.similarity_threshold)
            .into_iter()
            .map(|h| {
                let e = &self.exemplars[h.point];
                Match {
                    cluster: h.cluster,
                    case_id: e.case_id.clone(),
                    crash_type: e.crash_type.clone(),
                    trigger_event: e.trigger_event.clone(),
                    severity_level: e.severity_level,
                    distance: h.distance,
                }
            })
            .collect())
    }

    /// Severe flag and the vote fraction for the returned label.
    pub fn predict_severe(&self, v: &FeatureVector) -> Result<(bool, f64), EncodingError> {
        v.ensure_fingerprint(&self.schema_fingerprint)?;
        let (label, p) = self.severe_forest.predict(&v.values);
        Ok((label == 1, p))
    }

    pub fn predict_rating(&self, v: &FeatureVector) -> Result<(SeverityLevel, Vec<f64>), EncodingError> {
        v.ensure_fingerprint(&self.schema_fingerprint)?;
        let probs = self.rating_forest.predict_proba(&v.values);
        let (label, _) = self.rating_forest.predict(&v.values);
        Ok((SeverityLevel::ALL[label], probs))
    }

    /// Binary and five-level reports over a holdout set.
    pub fn evaluate(&self, holdout: &[ConsolidatedCase]) -> Result<Evaluation, EncodingError> {
        let vectors: Vec<FeatureVector> = holdout.par_iter().map(|c| self.encode_case(c)).collect::<Result<_, _>>()?;
        let sev_pred: Vec<usize> = vectors.par_iter().map(|v| self.severe_forest.predict(&v.values).0).collect();
        let lvl_pred: Vec<usize> = vectors.par_iter().map(|v| self.rating_forest.predict(&v.values).0).collect();
        let sev_true: Vec<usize> = holdout.iter().map(|c| usize::from(c.binary_severity)).collect();
        let lvl_true: Vec<usize> = holdout.iter().map(|c| c.severity_level.index()).collect();
        Ok(Evaluation {
            severe: ClassificationReport::from_predictions(&sev_true, &sev_pred, &binary_labels()),
            rating: ClassificationReport::from_predictions(&lvl_true, &lvl_pred, &severity_labels()),
        })
    }

    pub fn save<W: Write>(&self, out: W) -> Result<(), ModelError> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }

    pub fn load<R: Read>(input: R) -> Result<Self, ModelError> {
        let model: EreModel = serde_json::from_reader(input)?;
        model.check()?;
        Ok(model)
    }

    pub fn check(&self) -> Result<(), ModelError> {
        if self.format != MODEL_FORMAT {
            return Err(ModelError::Format(self.format.clone()));
        }
        if self.version != MODEL_VERSION {
            return Err(ModelError::Version { found: self.version, expected: MODEL_VERSION });
        }
        if self.schema.fingerprint() != self.schema_fingerprint {
            return Err(ModelError::Fingerprint {
                stored: self.schema_fingerprint.clone(),
                computed: self.schema.fingerprint().to_string(),
            });
        }
        let dim = self.schema.dimension();
        let n = self.exemplars.len();
        let problems = [
            (self.reducer.input_dim() != dim, "reducer input dimension differs from the schema"),
            (self.reducer.output_dim() > dim, "reducer output exceeds its input dimension"),
            (self.severe_forest.n_features != dim, "severe forest feature count differs from the schema"),
            (self.rating_forest.n_features != dim, "rating forest feature count differs from the schema"),
            (self.severe_forest.trees.is_empty() || self.rating_forest.trees.is_empty(), "a forest is empty"),
            (self.index.len() != n, "index and exemplar counts differ"),
            (self.cluster_model.assignments.len() != n, "cluster assignments and exemplar counts differ"),
        ];
        match problems.iter().find(|(bad, _)| *bad) {
            Some((_, msg)) => Err(ModelError::Inconsistent((*msg).into())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub severe: ClassificationReport,
    pub rating: ClassificationReport,
}
