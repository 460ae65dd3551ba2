//! Scenario replay: gate every step against the scene it produces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gate, Engines, MonitorConfig, MonitorDecision, Verdict};
use crate::scene::{validate_scenario, Scenario, ScenarioViolation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDecision {
    pub step: usize,
    pub event: String,
    pub decision: MonitorDecision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub decisions: Vec<StepDecision>,
    /// Fraction of steps not answered with GO; 0 for an empty scenario.
    pub intervention_rate: f64,
    pub fail_soft_count: usize,
}

/// Sequential over steps. An invalid scenario is rejected before any step runs.
pub fn run_scenario(engines: &Engines, scenario: &Scenario, cfg: &MonitorConfig) -> Result<ScenarioReport, Vec<ScenarioViolation>> {
    let issues = validate_scenario(scenario);
    if !issues.is_empty() {
        return Err(issues);
    }
    let decisions: Vec<StepDecision> = scenario
        .steps
        .iter()
        .enumerate()
        .map(|(i, step)| {
            let current = scenario.scene(i).expect("scene precedes every step");
            StepDecision {
                step: i,
                event: step.event.event.clone(),
                decision: gate(engines, current, &step.scene, std::slice::from_ref(&step.event), cfg),
            }
        })
        .collect();
    let interventions = decisions.iter().filter(|d| d.decision.verdict != Verdict::Go).count();
    let intervention_rate = if decisions.is_empty() { 0.0 } else { interventions as f64 / decisions.len() as f64 };
    let fail_soft_count = decisions.iter().filter(|d| d.decision.fail_soft).count();
    Ok(ScenarioReport { decisions, intervention_rate, fail_soft_count })
}

/// Parallel across scenarios, results in input order.
pub fn run_scenarios(
    engines: &Engines,
    scenarios: &[Scenario],
    cfg: &MonitorConfig,
) -> Vec<Result<ScenarioReport, Vec<ScenarioViolation>>> {
    scenarios.par_iter().map(|s| run_scenario(engines, s, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cie::KnowledgeBase;
    use crate::gvk::SafetyConfig;
    use crate::monitor::FindingDetail;
    use crate::scene::{Actor, ActorClass, ObservedEvent, Scene, ScenarioStep};

    fn engines() -> Engines {
        Engines::new(None, Some(KnowledgeBase::seed()), Some(SafetyConfig::default()))
    }

    fn start() -> Scene {
        Scene { actors: vec![Actor::subject("ego", ActorClass::PassengerCar).with_speed(8.0)], ..Default::default() }
    }

    fn ball_scenario() -> Scenario {
        let mut ball = start();
        ball.actors.push(Actor::new("ball", ActorClass::Object).at("1").with_distance(25.0).described("a ball is rolling at the intersection"));
        Scenario {
            initial: start(),
            steps: vec![ScenarioStep { event: ObservedEvent::new("a ball rolls into the intersection"), scene: ball }],
        }
    }

    #[test]
    fn empty_scenario() {
        let r = run_scenario(&engines(), &Scenario { initial: start(), steps: vec![] }, &MonitorConfig::default()).unwrap();
        assert!(r.decisions.is_empty());
        assert_eq!((r.intervention_rate, r.fail_soft_count), (0.0, 0));
    }

    #[test]
    fn ball_step_is_inhibited_with_chain_evidence() {
        let r = run_scenario(&engines(), &ball_scenario(), &MonitorConfig::default()).unwrap();
        let d = &r.decisions[0].decision;
        assert_ne!(d.verdict, Verdict::Go);
        assert!(d.reasons.iter().any(|f| matches!(&f.detail, FindingDetail::Foreseen(fs) if !fs.evidence.is_empty())));
        assert_eq!(r.fail_soft_count, 1, "no ERE model loaded");
        assert_eq!(r.intervention_rate, 1.0);
    }

    #[test]
    fn replay_is_deterministic_and_parallel_matches_sequential() {
        let s = ball_scenario();
        let a = serde_json::to_string(&run_scenario(&engines(), &s, &MonitorConfig::default()).unwrap()).unwrap();
        let many = run_scenarios(&engines(), &[s.clone(), s], &MonitorConfig::default());
        for r in many {
            assert_eq!(serde_json::to_string(&r.unwrap()).unwrap(), a);
        }
    }

    #[test]
    fn invalid_scenario_is_rejected_whole() {
        let mut s = ball_scenario();
        s.initial.actors.clear();
        assert!(run_scenario(&engines(), &s, &MonitorConfig::default()).is_err());
    }
}
