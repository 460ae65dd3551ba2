//! Scene-level ERE: similar historical crashes, then severity, then rating.

use serde::{Deserialize, Serialize};

use super::model::{EreModel, Match};
use super::severity::SeverityLevel;
use crate::scene::encoding::EncodingError;
use crate::scene::Scene;

pub const DEFAULT_MAX_MATCHES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SevereOutcome {
    pub severe: bool,
    /// Vote fraction behind `severe`.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingOutcome {
    pub level: SeverityLevel,
    /// Vote fractions for levels I..V.
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EreAssessment {
    pub similar_found: bool,
    /// Nearest first, truncated to the requested limit.
    pub matches: Vec<Match>,
    /// Matches within the threshold before truncation.
    pub match_count: usize,
    /// Present only when similar cases were found.
    pub severe: Option<SevereOutcome>,
    /// Present only when the case is predicted severe.
    pub rating: Option<RatingOutcome>,
}

impl EreAssessment {
    /// Distinct trigger events of the matches, in match order.
    pub fn trigger_events(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in self.matches.iter().filter_map(|m| m.trigger_event.as_ref()) {
            if !out.contains(t) {
                out.push(t.clone());
            }
        }
        out
    }

    pub fn level(&self) -> Option<SeverityLevel> {
        self.rating.as_ref().map(|r| r.level)
    }
}

pub fn ere_assess(model: &EreModel, scene: &Scene) -> Result<EreAssessment, EncodingError> {
    ere_assess_with(model, scene, DEFAULT_MAX_MATCHES)
}

pub fn ere_assess_with(model: &EreModel, scene: &Scene, max_matches: usize) -> Result<EreAssessment, EncodingError> {
    let v = model.schema.encode_scene(scene)?;
    let mut matches = model.find_similar(&v)?;
    let match_count = matches.len();
    matches.truncate(max_matches);
    if match_count == 0 {
        return Ok(EreAssessment { similar_found: false, matches, match_count, severe: None, rating: None });
    }
    let (severe, probability) = model.predict_severe(&v)?;
    let rating = if severe {
        let (level, probabilities) = model.predict_rating(&v)?;
        Some(RatingOutcome { level, probabilities })
    } else {
        None
    };
    Ok(EreAssessment {
        similar_found: true,
        matches,
        match_count,
        severe: Some(SevereOutcome { severe, probability }),
        rating,
    })
}
