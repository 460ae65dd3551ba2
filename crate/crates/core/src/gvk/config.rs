//! Safety constants: response time, time gaps, correction factors,
//! capability caps, no-zones, lane rules and behavior bounds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::element::ids;
use crate::scene::{ActorClass, Scene};

const DEFAULT_CONFIG: &str = include_str!("../../data/config/default.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGaps {
    pub normal: f64,
    pub adverse: f64,
    pub severe_adverse: f64,
}

/// Multipliers by attribute id; attributes not listed count as 1.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionFactors {
    pub road_surface: BTreeMap<String, f64>,
    pub atmospheric: BTreeMap<String, f64>,
    pub light: BTreeMap<String, f64>,
}

/// Accelerations as positive magnitudes, m/s².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capability {
    pub accel_max: f64,
    /// Braking applied when responding.
    pub brake_min: f64,
    /// Hardest braking possible.
    pub brake_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LateralParams {
    /// Floor on required lateral clearance, m.
    pub clearance_min: f64,
    pub accel_max: f64,
    pub brake_min: f64,
    /// Added to the lateral RSS distance, m.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneRule {
    pub id: String,
    pub classes: Vec<ActorClass>,
    /// Lanes counted from the leftmost (1).
    pub prohibited_lanes: Vec<u32>,
    /// Applies only on roads with at least this many lanes.
    pub min_total_lanes: u32,
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Min,
    Max,
}

impl BoundKind {
    pub fn violated(self, measured: f64, required: f64) -> bool {
        match self {
            BoundKind::Min => measured < required,
            BoundKind::Max => measured > required,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorRule {
    pub id: String,
    /// Controlled behavior element, as listed for the event.
    pub element: String,
    /// Key of the measured value in an observed event's params.
    pub param: String,
    pub bound: BoundKind,
    pub value: f64,
    pub unit: String,
    /// Min bounds are multiplied and max bounds divided by the scene's
    /// correction factor.
    pub scale_with_conditions: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorEvent {
    /// Event words that identify this kind.
    pub keywords: Vec<String>,
    pub rules: Vec<BehaviorRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyConfig {
    /// Response time ρ, s.
    pub response_time: f64,
    pub time_gap: TimeGaps,
    pub correction_factors: CorrectionFactors,
    pub default_capability: Capability,
    pub capabilities: BTreeMap<ActorClass, Capability>,
    pub lateral: LateralParams,
    /// Cells, relative to a large vehicle, the subject must not occupy.
    pub no_zone: BTreeMap<ActorClass, Vec<String>>,
    pub lane_rules: Vec<LaneRule>,
    pub behavior_rules: BTreeMap<String, BehaviorEvent>,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_CONFIG).expect("shipped safety config parses")
    }
}

/// Condition class from how many of surface, weather and light are adverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionClass {
    Normal,
    Adverse,
    SevereAdverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conditions {
    pub a_r: f64,
    pub a_w: f64,
    pub a_l: f64,
    pub class: ConditionClass,
}

impl Conditions {
    pub const NORMAL: Conditions = Conditions { a_r: 1.0, a_w: 1.0, a_l: 1.0, class: ConditionClass::Normal };

    pub fn factor(&self) -> f64 {
        self.a_r * self.a_w * self.a_l
    }
}

impl SafetyConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let c: SafetyConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), String> {
        let mut problems = Vec::new();
        if !(self.response_time > 0.0 && self.response_time.is_finite()) {
            problems.push("response_time must be positive".to_string());
        }
        let g = &self.time_gap;
        if !(g.normal > 0.0 && g.normal <= g.adverse && g.adverse <= g.severe_adverse) {
            problems.push("time gaps must be positive and non-decreasing with severity".into());
        }
        let cf = &self.correction_factors;
        for (table, m) in [("road_surface", &cf.road_surface), ("atmospheric", &cf.atmospheric), ("light", &cf.light)] {
            for (k, v) in m {
                if !(*v >= 1.0 && v.is_finite()) {
                    problems.push(format!("correction factor {table}.{k} must be >= 1"));
                }
            }
        }
        for (name, c) in std::iter::once(("default".to_string(), &self.default_capability))
            .chain(self.capabilities.iter().map(|(k, c)| (format!("{k:?}"), c)))
        {
            if !(c.accel_max > 0.0 && c.brake_min > 0.0 && c.brake_max >= c.brake_min) {
                problems.push(format!("capability {name}: need accel_max > 0 and brake_max >= brake_min > 0"));
            }
        }
        let l = &self.lateral;
        if !(l.clearance_min >= 0.0 && l.accel_max > 0.0 && l.brake_min > 0.0 && l.margin >= 0.0) {
            problems.push("lateral parameters must be positive".into());
        }
        for (class, cells) in &self.no_zone {
            for c in cells {
                if crate::scene::PositionCode::parse(c).is_err() {
                    problems.push(format!("no_zone {class:?}: bad cell `{c}`"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems.join("; "))
        }
    }

    pub fn capability(&self, class: ActorClass) -> Capability {
        self.capabilities.get(&class).copied().unwrap_or(self.default_capability)
    }

    pub fn time_gap_for(&self, class: ConditionClass) -> f64 {
        match class {
            ConditionClass::Normal => self.time_gap.normal,
            ConditionClass::Adverse => self.time_gap.adverse,
            ConditionClass::SevereAdverse => self.time_gap.severe_adverse,
        }
    }

    pub fn conditions(&self, scene: &Scene) -> Conditions {
        let lookup = |table: &BTreeMap<String, f64>, element: &str| {
            scene.attr(element).and_then(|a| table.get(a)).copied().unwrap_or(1.0)
        };
        let cf = &self.correction_factors;
        let a_r = lookup(&cf.road_surface, ids::SURFACE);
        let a_w = lookup(&cf.atmospheric, ids::ATMOSPHERIC);
        let a_l = lookup(&cf.light, ids::LIGHT);
        let adverse = [a_r, a_w, a_l].iter().filter(|f| **f > 1.0).count();
        let class = match adverse {
            0 => ConditionClass::Normal,
            1 => ConditionClass::Adverse,
            _ => ConditionClass::SevereAdverse,
        };
        Conditions { a_r, a_w, a_l, class }
    }
}
