//! Scenarios: an initial scene followed by (event, resulting scene) steps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::event::{parse_event, Event};
use super::position::PositionCode;
use super::Scene;

/// An event sentence as observed, with the acting actor and any measured
/// maneuver numbers (lead times, decelerations, passing distances...).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObservedEvent {
    pub event: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

impl ObservedEvent {
    pub fn new(text: impl Into<String>) -> Self {
        ObservedEvent { event: text.into(), ..Default::default() }
    }

    pub fn by(mut self, actor: impl Into<String>) -> Self {
        self.actor = Some(actor.into());
        self
    }

    pub fn param(mut self, name: impl Into<String>, value: f64) -> Self {
        self.params.insert(name.into(), value);
        self
    }

    pub fn parsed(&self) -> Event {
        parse_event(&self.event)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStep {
    #[serde(flatten)]
    pub event: ObservedEvent,
    pub scene: Scene,
}

/// File layout: the initial scene's keys at top level plus `steps`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(flatten)]
    pub initial: Scene,
    #[serde(default)]
    pub steps: Vec<ScenarioStep>,
}

impl Scenario {
    /// Scene `i`: 0 is the initial scene, `i` is the result of step `i - 1`.
    pub fn scene(&self, i: usize) -> Option<&Scene> {
        match i {
            0 => Some(&self.initial),
            _ => self.steps.get(i - 1).map(|s| &s.scene),
        }
    }

    pub fn scene_count(&self) -> usize {
        self.steps.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioViolation {
    /// 0 for the initial scene, `i + 1` for the scene produced by step `i`.
    pub scene_index: usize,
    pub message: String,
}

/// Empty iff every scene is valid and every step's event is well formed
/// and refers only to actors present in the preceding scene.
pub fn validate_scenario(s: &Scenario) -> Vec<ScenarioViolation> {
    let mut out = Vec::new();
    let mut push = |scene_index, message: String| out.push(ScenarioViolation { scene_index, message });
    for i in 0..s.scene_count() {
        for issue in s.scene(i).map(Scene::validate).unwrap_or_default() {
            push(i, issue.to_string());
        }
    }
    for (i, step) in s.steps.iter().enumerate() {
        let before = s.scene(i).expect("scene exists for every step");
        let ev = step.event.parsed();
        if ev.predicate.is_empty() {
            push(i + 1, format!("step {i}: empty event"));
            continue;
        }
        if let Some(actor) = &step.event.actor {
            if before.actor(actor).is_none() {
                push(i + 1, format!("step {i}: event actor `{actor}` is not in the preceding scene"));
            }
        }
        if let Some(label) = ev.subject_position() {
            match PositionCode::parse(label) {
                Ok(cell) if cell.is_subject() || before.actor_at(cell).is_some() => {}
                Ok(_) => push(i + 1, format!("step {i}: no actor at {label} in the preceding scene")),
                Err(e) => push(i + 1, format!("step {i}: {e}")),
            }
        }
    }
    out
}
