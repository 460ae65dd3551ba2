//! Goal and value keeping: safe-distance, surrounding-pattern, lane-use
//! and behavior rules, with recommendations that undo each violation.

pub mod checks;
pub mod config;
pub mod rss;

use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::{Deserialize, Serialize};

pub use checks::{
    check_behavior, check_distances, check_lane_use, check_surrounding_pattern, neighbor_gaps, required_following_distance,
    required_gap, subject_speed, Findings, FrontKinematics, GvkViolation, NeighborGap, Quantity, RequiredDistance,
    ViolationKind,
};
pub use config::{BoundKind, Capability, ConditionClass, Conditions, SafetyConfig};
pub use rss::{rss_min_lateral, rss_min_longitudinal, RssError};

use crate::scene::{ObservedEvent, Scene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    /// Slow to at most this speed, m/s.
    ReduceSpeed { max_speed: f64 },
    /// Let the trailing vehicle pass or open the gap behind.
    OpenTrailingGap,
    IncreaseLateralClearance { by: f64 },
    /// Speed up or slow down until a lateral cell opens.
    AdjustSpeedToOpenEscape,
    LeaveNoZone { vehicle: String },
    ChangeLane { avoid_lanes: Vec<u32> },
    ConformBehavior { param: String, bound: BoundKind, limit: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub rule_id: String,
    #[serde(flatten)]
    pub action: Action,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GvkAssessment {
    pub violations: Vec<GvkViolation>,
    pub recommendations: Vec<Recommendation>,
    pub notes: Vec<String>,
    /// Set when an internal fault emptied the result.
    pub fault: Option<String>,
}

/// Union of every check over the scene and the recent events. Never fails.
pub fn gvk_evaluate(scene: &Scene, recent: &[ObservedEvent], cfg: &SafetyConfig) -> GvkAssessment {
    match catch_unwind(AssertUnwindSafe(|| evaluate(scene, recent, cfg))) {
        Ok(a) => a,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            log::warn!("goal and value assessment fault: {msg}");
            GvkAssessment { fault: Some(msg), ..Default::default() }
        }
    }
}

fn evaluate(scene: &Scene, recent: &[ObservedEvent], cfg: &SafetyConfig) -> GvkAssessment {
    let cond = cfg.conditions(scene);
    let mut all = Findings::default();
    let mut absorb = |f: Findings| {
        all.violations.extend(f.violations);
        all.notes.extend(f.notes);
    };
    absorb(check_distances(scene, cfg));
    absorb(check_surrounding_pattern(scene, cfg));
    absorb(check_lane_use(scene, cfg));
    let subject_id = scene.subject().map(|a| a.id.as_str());
    // Behavior rules bind the subject only; unattributed events count as its own.
    for e in recent.iter().filter(|e| e.actor.is_none() || e.actor.as_deref() == subject_id) {
        absorb(check_behavior(&e.parsed(), &e.params, &cond, cfg));
    }
    let recommendations = all.violations.iter().map(|v| recommend(v, &cond, cfg)).collect();
    GvkAssessment { violations: all.violations, recommendations, notes: all.notes, fault: None }
}

/// The action that removes `v`.
pub fn recommend(v: &GvkViolation, cond: &Conditions, cfg: &SafetyConfig) -> Recommendation {
    let measured = v.measured.as_ref().map_or(0.0, |q| q.value);
    let required = v.required.as_ref().map_or(0.0, |q| q.value);
    let who = v.actor.clone().unwrap_or_default();
    let (action, text) = match v.kind {
        ViolationKind::FollowingDistance => {
            let effective_gap = cfg.time_gap_for(cond.class) * cond.factor();
            let max_speed = measured / effective_gap;
            (
                Action::ReduceSpeed { max_speed },
                format!("reduce speed to at most {max_speed:.1} m/s to restore the gap to `{who}`"),
            )
        }
        ViolationKind::TrailingDistance => {
            (Action::OpenTrailingGap, format!("let `{who}` pass or change lane to open the gap behind"))
        }
        ViolationKind::LateralDistance => {
            let by = required - measured;
            (Action::IncreaseLateralClearance { by }, format!("move {by:.1} m away from `{who}`"))
        }
        ViolationKind::BoxedIn | ViolationKind::NoEscapeRoute => (
            Action::AdjustSpeedToOpenEscape,
            "adjust speed so an adjacent lane cell opens as an escape route".into(),
        ),
        ViolationKind::NoZone => (
            Action::LeaveNoZone { vehicle: who.clone() },
            format!("leave the blind spot of `{who}` by changing lane or adjusting speed"),
        ),
        ViolationKind::LaneUse => {
            let avoid = cfg.lane_rules.iter().find(|r| r.id == v.rule_id).map(|r| r.prohibited_lanes.clone()).unwrap_or_default();
            (Action::ChangeLane { avoid_lanes: avoid.clone() }, format!("move out of lane(s) {avoid:?}"))
        }
        ViolationKind::Behavior => {
            let bound = v.bound.unwrap_or(BoundKind::Min);
            let param = cfg
                .behavior_rules
                .values()
                .flat_map(|b| &b.rules)
                .find(|r| r.id == v.rule_id)
                .map(|r| r.param.clone())
                .unwrap_or_default();
            let word = if bound == BoundKind::Min { "at least" } else { "at most" };
            (
                Action::ConformBehavior { param: param.clone(), bound, limit: required },
                format!("keep {param} {word} {required:.2}"),
            )
        }
    };
    Recommendation { rule_id: v.rule_id.clone(), action, text }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Actor, ActorClass};

    #[test]
    fn safe_scene_has_nothing_to_say() {
        let s = Scene { actors: vec![Actor::subject("ego", ActorClass::PassengerCar).with_speed(20.0)], ..Default::default() };
        let a = gvk_evaluate(&s, &[], &SafetyConfig::default());
        assert!(a.violations.is_empty() && a.recommendations.is_empty() && a.fault.is_none());
    }

    #[test]
    fn tailgating_recommends_the_inverted_time_gap() {
        let s = Scene {
            actors: vec![
                Actor::subject("ego", ActorClass::PassengerCar).with_speed(30.0),
                Actor::new("lead", ActorClass::PassengerCar).at("1").with_distance(30.0),
            ],
            ..Default::default()
        };
        let a = gvk_evaluate(&s, &[], &SafetyConfig::default());
        assert_eq!(a.recommendations.len(), 1);
        assert_eq!(a.recommendations[0].action, Action::ReduceSpeed { max_speed: 15.0 });
    }

    #[test]
    fn boxed_in_recommends_speed_adjustment() {
        let car = |id: &str, cell: &str| Actor::new(id, ActorClass::PassengerCar).at(cell);
        let s = Scene {
            actors: vec![Actor::subject("ego", ActorClass::PassengerCar), car("a", "L"), car("b", "R"), car("c", "1")],
            ..Default::default()
        };
        let a = gvk_evaluate(&s, &[], &SafetyConfig::default());
        assert!(a.recommendations.iter().any(|r| r.action == Action::AdjustSpeedToOpenEscape));
    }

    #[test]
    fn behavior_from_recent_events() {
        let s = Scene { actors: vec![Actor::subject("ego", ActorClass::PassengerCar)], ..Default::default() };
        let turn = ObservedEvent::new("ego turns left").param("indication_lead_time", 1.0);
        let a = gvk_evaluate(&s, &[turn], &SafetyConfig::default());
        assert_eq!(a.violations.len(), 1);
        assert!(matches!(&a.recommendations[0].action, Action::ConformBehavior { param, .. } if param == "indication_lead_time"));
    }

    #[test]
    fn other_actors_events_are_not_held_to_subject_rules() {
        let s = Scene { actors: vec![Actor::subject("ego", ActorClass::PassengerCar)], ..Default::default() };
        let turn = |who: &str| ObservedEvent::new("vehicle turns left").by(who).param("indication_lead_time", 1.0);
        let cfg = SafetyConfig::default();
        assert!(gvk_evaluate(&s, &[turn("taxi")], &cfg).violations.is_empty());
        assert_eq!(gvk_evaluate(&s, &[turn("ego")], &cfg).violations.len(), 1);
    }
}
