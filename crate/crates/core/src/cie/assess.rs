//! Scene-level foresight: chain from the scene's events and flag hazards.

use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::{Deserialize, Serialize};

use super::chain::{chain, ChainLink};
use super::kb::KnowledgeBase;
use super::relation::HAPPENS_AFTER;
use super::unify::unify;
use crate::scene::event::{parse_event, Event};
use crate::scene::Scene;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CieOptions {
    /// Relations followed forward in time.
    pub relations: Vec<String>,
    pub max_hops: usize,
}

impl Default for CieOptions {
    fn default() -> Self {
        CieOptions { relations: vec![HAPPENS_AFTER.into()], max_hops: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum HazardReason {
    /// The terminal event unifies with a `hazard`-tagged KB event.
    HazardTag,
    /// The terminal event realises a trigger event of a similar crash.
    Trigger(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Foreseen {
    pub hazard_event: String,
    pub reasons: Vec<HazardReason>,
    pub start_event: String,
    pub evidence: Vec<ChainLink>,
    /// Lead time in inference steps.
    pub hops: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CieAssessment {
    pub events: Vec<Event>,
    pub foreseen: Vec<Foreseen>,
    /// Set when an internal fault emptied the result.
    pub fault: Option<String>,
}

impl CieAssessment {
    pub fn hazard_found(&self) -> bool {
        !self.foreseen.is_empty()
    }
}

pub fn cie_assess(kb: &KnowledgeBase, scene: &Scene, ere_triggers: &[String]) -> CieAssessment {
    cie_assess_with(kb, scene, ere_triggers, &CieOptions::default())
}

/// Never fails: a panic or KB error inside is reported in `fault` with an
/// empty result.
pub fn cie_assess_with(kb: &KnowledgeBase, scene: &Scene, ere_triggers: &[String], opts: &CieOptions) -> CieAssessment {
    match catch_unwind(AssertUnwindSafe(|| assess(kb, scene, ere_triggers, opts))) {
        Ok(Ok(a)) => a,
        Ok(Err(e)) => CieAssessment { fault: Some(e), ..Default::default() },
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            log::warn!("commonsense assessment fault: {msg}");
            CieAssessment { fault: Some(msg), ..Default::default() }
        }
    }
}

fn assess(kb: &KnowledgeBase, scene: &Scene, ere_triggers: &[String], opts: &CieOptions) -> Result<CieAssessment, String> {
    let events: Vec<Event> = scene.event_texts().into_iter().map(parse_event).collect();

    // Targets: hazard-tagged tails, tails tagged with a matched trigger
    // attribute, and triggers given as free-text events.
    let mut targets: Vec<(Event, HazardReason)> =
        kb.hazard_events().map(|(_, e)| (e.clone(), HazardReason::HazardTag)).collect();
    for t in ere_triggers {
        let tagged: Vec<Event> = kb.trigger_events(t).map(|(_, e)| e.clone()).collect();
        if tagged.is_empty() {
            let e = parse_event(t);
            if !e.low_confidence {
                targets.push((e, HazardReason::Trigger(t.clone())));
            }
        } else {
            targets.extend(tagged.into_iter().map(|e| (e, HazardReason::Trigger(t.clone()))));
        }
    }

    let mut foreseen: Vec<Foreseen> = Vec::new();
    for start in &events {
        for rel in &opts.relations {
            for c in chain(kb, start, rel, opts.max_hops).map_err(|e| e.to_string())? {
                let end = c.terminal();
                let mut reasons: Vec<HazardReason> = Vec::new();
                for (pattern, reason) in &targets {
                    if !reasons.contains(reason) && unify(pattern, end).is_some() {
                        reasons.push(reason.clone());
                    }
                }
                if reasons.is_empty() {
                    continue;
                }
                let hazard_event = end.normalized();
                if foreseen.iter().any(|f| f.hazard_event == hazard_event && f.hops <= c.hops()) {
                    continue;
                }
                foreseen.retain(|f| f.hazard_event != hazard_event);
                foreseen.push(Foreseen {
                    hazard_event,
                    reasons,
                    start_event: start.normalized(),
                    hops: c.hops(),
                    evidence: c.evidence,
                });
            }
        }
    }
    foreseen.sort_by(|a, b| a.hops.cmp(&b.hops).then_with(|| a.hazard_event.cmp(&b.hazard_event)));
    Ok(CieAssessment { events, foreseen, fault: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Actor, ActorClass};

    fn scene_with(event: &str) -> Scene {
        Scene {
            actors: vec![
                Actor::subject("ego", ActorClass::PassengerCar),
                Actor::new("obj", ActorClass::Object).at("1").described(event),
            ],
            ..Default::default()
        }
    }

    #[test]
    fn rolling_ball_foresees_a_person_hit_in_one_hop() {
        let a = cie_assess(&KnowledgeBase::seed(), &scene_with("a ball is rolling at the intersection"), &[]);
        let f = a.foreseen.iter().find(|f| f.hazard_event == "car hits a person").expect("hazard foreseen");
        assert_eq!(f.hops, 1);
        assert_eq!(f.reasons, vec![HazardReason::HazardTag]);
        assert_eq!(f.evidence[0].source_tag, "atomic-example");
    }

    #[test]
    fn exit_only_lane_foresees_cut_in() {
        let a = cie_assess(&KnowledgeBase::seed(), &scene_with("vehicle Y enters the exit-only lane"), &[]);
        assert_eq!(a.foreseen[0].hazard_event, "vehicle {Y} returns to the main lane and cuts in");
    }

    #[test]
    fn triggers_flag_untagged_events() {
        let s = scene_with("a ball is rolling at the intersection");
        let a = cie_assess(&KnowledgeBase::seed(), &s, &["pc19_object_in_road".to_string()]);
        let f = a.foreseen.iter().find(|f| f.hazard_event == "car hits the football").unwrap();
        assert_eq!(f.reasons, vec![HazardReason::Trigger("pc19_object_in_road".into())]);
        let free = cie_assess(&KnowledgeBase::seed(), &s, &["a football is thrown".to_string()]);
        assert!(free.foreseen.iter().all(|f| f.hazard_event != "football is thrown"), "not reachable forward");
    }

    #[test]
    fn quiet_scene_foresees_nothing() {
        let a = cie_assess(&KnowledgeBase::seed(), &scene_with("a cat sleeps on the porch"), &[]);
        assert!(a.foreseen.is_empty() && a.fault.is_none());
        let a = cie_assess(&KnowledgeBase::seed(), &Scene::default(), &[]);
        assert!(a.events.is_empty() && !a.hazard_found());
    }

    #[test]
    fn bad_relation_is_reported_not_raised() {
        let opts = CieOptions { relations: vec!["Nope".into()], max_hops: 2 };
        let a = cie_assess_with(&KnowledgeBase::seed(), &scene_with("a car hits a person"), &[], &opts);
        assert!(a.fault.is_some() && a.foreseen.is_empty());
    }
}
