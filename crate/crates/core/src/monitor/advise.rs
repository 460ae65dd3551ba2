//! Driver advisories: safe speed, distancing, lane and surrounding pattern.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{assess, EngineKind, Engines, FindingDetail, MonitorConfig, Risk};
use crate::element::{ids, ElementValue, MPH_TO_MPS};
use crate::gvk::{neighbor_gaps, Action, NeighborGap, Recommendation, ViolationKind};
use crate::ingest::{ElementCatalog, ElementKind};
use crate::scene::{ActorClass, PositionCode, Scene};

/// Background information entered before driving. Keys are catalog
/// element ids or one of the aliases `vehicle_type`, `weight`,
/// `application`, `use`, `gender`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DriverProfile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vehicle_class: Option<ActorClass>,
    #[serde(flatten)]
    pub attributes: BTreeMap<String, serde_json::Value>,
}

fn alias(key: &str) -> &str {
    match key {
        "weight" => "gross_vehicle_weight_rating",
        "application" | "use" => "special_use",
        "gender" => ids::SEX,
        other => other,
    }
}

/// `scene` with the profile merged into the subject and the scenery.
/// Returns the keys that were ignored.
pub fn merge_profile(scene: &Scene, profile: &DriverProfile, catalog: &ElementCatalog) -> (Scene, Vec<String>) {
    let mut out = scene.clone();
    let mut ignored = Vec::new();
    let mut class = profile.vehicle_class;
    for (key, value) in &profile.attributes {
        if key == "vehicle_type" {
            match serde_json::from_value::<ActorClass>(value.clone()) {
                Ok(c) => class = class.or(Some(c)),
                Err(_) => ignored.push(key.clone()),
            }
            continue;
        }
        let Some(entry) = catalog.entry(alias(key)) else {
            ignored.push(key.clone());
            continue;
        };
        let parsed = match entry.kind {
            ElementKind::Numeric => value
                .as_f64()
                .or_else(|| value.as_str().and_then(|s| s.trim().parse().ok()))
                .map(ElementValue::Number),
            ElementKind::Categorical | ElementKind::Code => value.as_str().and_then(|s| {
                let declared = entry.declared_attributes();
                let by_label = || entry.attributes.iter().find(|m| m.label.eq_ignore_ascii_case(s)).map(|m| m.attribute.as_str());
                declared.get(s).copied().or_else(by_label).map(ElementValue::attr)
            }),
        };
        match parsed {
            Some(v) => {
                if entry.id == ids::BODY_TYPE {
                    class = class.or_else(|| v.as_attr().and_then(ActorClass::from_body_type_attr));
                }
                out.scenery.insert(entry.id.clone(), v);
            }
            None => ignored.push(key.clone()),
        }
    }
    for k in &ignored {
        log::warn!("profile attribute `{k}` does not map to a catalog element value; ignored");
    }
    if let (Some(c), Some(s)) = (class, out.actors.iter_mut().find(|a| a.subject)) {
        s.class = c;
    }
    (out, ignored)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneAction {
    Keep,
    ChangeLane,
    Reposition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneRecommendation {
    pub action: LaneAction,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub avoid_lanes: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_id: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Advisory {
    pub risk: Risk,
    /// min(speed limit, time-gap-feasible speed), m/s.
    pub safe_speed: Option<f64>,
    pub speed_limit: Option<f64>,
    pub time_gap_speed: Option<f64>,
    pub lane_recommendation: LaneRecommendation,
    pub distancing: Vec<NeighborGap>,
    pub surrounding_pattern_notes: Vec<String>,
    /// Crash types of similar crashes and foreseen hazards.
    pub cautions: Vec<String>,
    pub recommendations: Vec<Recommendation>,
    pub ignored_profile: Vec<String>,
    pub unavailable: Vec<EngineKind>,
}

/// Advice only; nothing here actuates.
pub fn advise(engines: &Engines, scene: &Scene, profile: &DriverProfile, cfg: &MonitorConfig) -> Advisory {
    let (scene, ignored_profile) = merge_profile(scene, profile, &ElementCatalog::builtin());
    let a = assess(engines, &scene, &[], cfg);

    let speed_limit = scene.number(ids::SPEED_LIMIT).map(|mph| mph * MPH_TO_MPS);
    let (distancing, time_gap_speed) = match engines.safety.as_deref() {
        Some(safety) => {
            let cond = safety.conditions(&scene);
            let effective = safety.time_gap_for(cond.class) * cond.factor();
            let lead = ["1", "2"]
                .into_iter()
                .find_map(|l| PositionCode::parse(l).ok().and_then(|c| scene.actor_at(c)));
            (neighbor_gaps(&scene, safety).0, lead.and_then(|l| l.distance).map(|d| d / effective))
        }
        None => (Vec::new(), None),
    };
    let safe_speed = match (speed_limit, time_gap_speed) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };

    let mut lane = LaneRecommendation { action: LaneAction::Keep, avoid_lanes: Vec::new(), rule_id: None, text: "keep lane".into() };
    let mut surrounding_pattern_notes = Vec::new();
    let mut recommendations = Vec::new();
    if let Some(g) = a.gvk.available() {
        recommendations = g.recommendations.clone();
        for (v, r) in g.violations.iter().zip(&g.recommendations) {
            match v.kind {
                ViolationKind::BoxedIn | ViolationKind::NoEscapeRoute | ViolationKind::NoZone => {
                    surrounding_pattern_notes.push(format!("{}: {}; {}", v.rule_id, v.explanation, r.text));
                    if v.kind == ViolationKind::NoZone && lane.action == LaneAction::Keep {
                        lane = LaneRecommendation { action: LaneAction::Reposition, avoid_lanes: Vec::new(), rule_id: Some(v.rule_id.clone()), text: r.text.clone() };
                    }
                }
                ViolationKind::LaneUse => {
                    if let Action::ChangeLane { avoid_lanes } = &r.action {
                        lane = LaneRecommendation {
                            action: LaneAction::ChangeLane,
                            avoid_lanes: avoid_lanes.clone(),
                            rule_id: Some(v.rule_id.clone()),
                            text: r.text.clone(),
                        };
                    }
                }
                _ => {}
            }
        }
    }

    let mut cautions: Vec<String> = Vec::new();
    for f in &a.findings {
        let c = match &f.detail {
            FindingDetail::SimilarCrashes { crash_types, .. } => crash_types.iter().map(|t| format!("similar crashes: {t}")).collect(),
            FindingDetail::Foreseen(fs) => vec![format!("foreseen: {}", fs.hazard_event)],
            _ => Vec::new(),
        };
        for c in c {
            if !cautions.contains(&c) {
                cautions.push(c);
            }
        }
    }

    Advisory {
        risk: a.overall_risk,
        safe_speed,
        speed_limit,
        time_gap_speed,
        lane_recommendation: lane,
        distancing,
        surrounding_pattern_notes,
        cautions,
        recommendations,
        ignored_profile,
        unavailable: a.unavailable(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cie::KnowledgeBase;
    use crate::gvk::SafetyConfig;
    use crate::scene::Actor;

    fn engines() -> Engines {
        Engines::new(None, Some(KnowledgeBase::seed()), Some(SafetyConfig::default()))
    }

    fn road(limit_mph: f64) -> Scene {
        let mut s = Scene {
            actors: vec![
                Actor::subject("ego", ActorClass::PassengerCar).with_speed(20.0),
                Actor::new("lead", ActorClass::PassengerCar).at("1").with_distance(80.0),
            ],
            ..Default::default()
        };
        s.scenery.insert(ids::SPEED_LIMIT.into(), ElementValue::Number(limit_mph));
        s
    }

    #[test]
    fn safe_speed_is_the_smaller_bound() {
        let a = advise(&engines(), &road(65.0), &DriverProfile::default(), &MonitorConfig::default());
        assert_eq!(a.time_gap_speed, Some(40.0));
        assert!((a.safe_speed.unwrap() - 65.0 * MPH_TO_MPS).abs() < 1e-12);
        let slow = advise(&engines(), &road(100.0), &DriverProfile::default(), &MonitorConfig::default());
        assert_eq!(slow.safe_speed, Some(40.0));
        assert!(a.cautions.is_empty() && a.lane_recommendation.action == LaneAction::Keep);
    }

    #[test]
    fn lorry_no_zone_note() {
        let s = Scene {
            actors: vec![Actor::subject("ego", ActorClass::PassengerCar), Actor::new("lorry", ActorClass::HeavyTruck).at("R")],
            ..Default::default()
        };
        let a = advise(&engines(), &s, &DriverProfile::default(), &MonitorConfig::default());
        assert!(a.surrounding_pattern_notes.iter().any(|n| n.starts_with("pattern.no_zone")));
        assert_eq!(a.lane_recommendation.action, LaneAction::Reposition);
    }

    #[test]
    fn heavy_vehicle_profile_uses_heavy_caps() {
        let mut s = road(65.0);
        s.actors[1] = s.actors[1].clone().with_speed(0.0);
        let car = advise(&engines(), &s, &DriverProfile::default(), &MonitorConfig::default());
        let truck_profile = DriverProfile { vehicle_class: Some(ActorClass::HeavyTruck), ..Default::default() };
        let truck = advise(&engines(), &s, &truck_profile, &MonitorConfig::default());
        // Weaker minimum braking means a longer stopping gap.
        assert!(truck.distancing[0].required > car.distancing[0].required);
        let by_body = DriverProfile {
            attributes: BTreeMap::from([("body_type".to_string(), serde_json::json!("body_medium_heavy_truck"))]),
            ..Default::default()
        };
        let (merged, ignored) = merge_profile(&s, &by_body, &ElementCatalog::builtin());
        assert!(ignored.is_empty());
        assert_eq!(merged.subject().unwrap().class, ActorClass::HeavyTruck);
    }

    #[test]
    fn unknown_profile_attributes_are_ignored() {
        let p = DriverProfile {
            attributes: BTreeMap::from([
                ("age".to_string(), serde_json::json!(34)),
                ("gender".to_string(), serde_json::json!("sex_female")),
                ("licence_location".to_string(), serde_json::json!("CA")),
                ("sex".to_string(), serde_json::json!("nonsense")),
            ]),
            ..Default::default()
        };
        let (s, ignored) = merge_profile(&road(50.0), &p, &ElementCatalog::builtin());
        assert_eq!(ignored, vec!["licence_location".to_string(), "sex".to_string()]);
        assert_eq!(s.number(ids::AGE), Some(34.0));
        assert_eq!(s.attr(ids::SEX), Some("sex_female"));
    }
}
