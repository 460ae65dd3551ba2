//! Strategic monitor: combines the three engines into one scene
//! assessment, gates state-transition requests, advises drivers and
//! replays scripted scenarios.
//!
//! The monitor holds no state between requests. Engines are shared
//! behind `Arc` and never mutated after load, so requests may run
//! concurrently.

pub mod advise;
pub mod scenario;

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cie::{cie_assess_with, CieAssessment, CieOptions, Foreseen, KnowledgeBase};
use crate::ere::{ere_assess_with, EreAssessment, EreModel, SeverityLevel};
use crate::gvk::{gvk_evaluate, GvkAssessment, GvkViolation, SafetyConfig, ViolationKind};
use crate::scene::{ObservedEvent, Scene};

pub use advise::{advise, Advisory, DriverProfile, LaneRecommendation};
pub use scenario::{run_scenario, run_scenarios, ScenarioReport, StepDecision};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Ere,
    Cie,
    Gvk,
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineKind::Ere => "ere",
            EngineKind::Cie => "cie",
            EngineKind::Gvk => "gvk",
        })
    }
}

/// Which engines may run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EngineSet {
    pub ere: bool,
    pub cie: bool,
    pub gvk: bool,
}

impl EngineSet {
    pub const ALL: EngineSet = EngineSet { ere: true, cie: true, gvk: true };
    pub const NONE: EngineSet = EngineSet { ere: false, cie: false, gvk: false };

    /// All 8 subsets, the full set first.
    pub fn subsets() -> [EngineSet; 8] {
        std::array::from_fn(|i| {
            let off = 7 - i;
            EngineSet { ere: off & 1 != 0, cie: off & 2 != 0, gvk: off & 4 != 0 }
        })
    }
}

/// Loaded engines. `None` means unavailable.
#[derive(Debug, Clone, Default)]
pub struct Engines {
    pub ere: Option<Arc<EreModel>>,
    pub kb: Option<Arc<KnowledgeBase>>,
    pub safety: Option<Arc<SafetyConfig>>,
}

impl Engines {
    pub fn new(ere: Option<EreModel>, kb: Option<KnowledgeBase>, safety: Option<SafetyConfig>) -> Self {
        Engines { ere: ere.map(Arc::new), kb: kb.map(Arc::new), safety: safety.map(Arc::new) }
    }

    /// The same engines with those outside `set` removed.
    pub fn restrict(&self, set: EngineSet) -> Engines {
        Engines {
            ere: self.ere.clone().filter(|_| set.ere),
            kb: self.kb.clone().filter(|_| set.cie),
            safety: self.safety.clone().filter(|_| set.gvk),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonitorConfig {
    /// ERE severe predictions at or above this level are `severe` risk.
    pub severe_min_level: SeverityLevel,
    /// Distance violations with measured / required below this are `severe`.
    pub severe_distance_ratio: f64,
    /// Foreseen hazards within this many hops are `hazard`, later ones `caution`.
    pub cie_hazard_max_hops: usize,
    /// Violation kinds that only warrant `caution`.
    pub gvk_caution_kinds: Vec<ViolationKind>,
    pub max_matches: usize,
    pub cie: CieOptions,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            severe_min_level: SeverityLevel::IV,
            severe_distance_ratio: 0.5,
            cie_hazard_max_hops: 3,
            gvk_caution_kinds: vec![ViolationKind::LaneUse, ViolationKind::NoZone],
            max_matches: crate::ere::assess::DEFAULT_MAX_MATCHES,
            cie: CieOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Risk {
    None,
    Caution,
    Hazard,
    Severe,
}

/// Ordered GO < INHIBIT < CANCEL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Go,
    Inhibit,
    Cancel,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Go => 0,
            Verdict::Inhibit => 2,
            Verdict::Cancel => 3,
        }
    }

    pub fn from_risk(r: Risk) -> Self {
        match r {
            Risk::None | Risk::Caution => Verdict::Go,
            Risk::Hazard => Verdict::Inhibit,
            Risk::Severe => Verdict::Cancel,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Go => "GO",
            Verdict::Inhibit => "INHIBIT",
            Verdict::Cancel => "CANCEL",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FindingDetail {
    SimilarCrashes { match_count: usize, crash_types: Vec<String>, nearest_case: Option<String> },
    SeverePredicted { probability: f64, level: Option<SeverityLevel> },
    Foreseen(Foreseen),
    Violation(GvkViolation),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub engine: EngineKind,
    pub risk: Risk,
    pub summary: String,
    pub detail: FindingDetail,
}

/// An engine's output, or why it is missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum EngineOutput<T> {
    Available(T),
    Unavailable(String),
}

impl<T> EngineOutput<T> {
    pub fn available(&self) -> Option<&T> {
        match self {
            EngineOutput::Available(t) => Some(t),
            EngineOutput::Unavailable(_) => None,
        }
    }

    pub fn is_available(&self) -> bool {
        matches!(self, EngineOutput::Available(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategicAssessment {
    pub ere: EngineOutput<EreAssessment>,
    pub cie: EngineOutput<CieAssessment>,
    pub gvk: EngineOutput<GvkAssessment>,
    pub findings: Vec<Finding>,
    pub overall_risk: Risk,
}

impl StrategicAssessment {
    pub fn unavailable(&self) -> Vec<EngineKind> {
        let mut out = Vec::new();
        if !self.ere.is_available() {
            out.push(EngineKind::Ere);
        }
        if !self.cie.is_available() {
            out.push(EngineKind::Cie);
        }
        if !self.gvk.is_available() {
            out.push(EngineKind::Gvk);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorDecision {
    pub verdict: Verdict,
    /// Every finding of the proposed scene, highest risk first.
    pub reasons: Vec<Finding>,
    /// True when any engine was unavailable. Never paired with CANCEL.
    pub fail_soft: bool,
    pub unavailable: Vec<EngineKind>,
    pub overall_risk: Risk,
}

const NOT_LOADED: &str = "not loaded";

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

fn guarded<T>(engine: EngineKind, f: impl FnOnce() -> Result<T, String>) -> EngineOutput<T> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(t)) => EngineOutput::Available(t),
        Ok(Err(e)) => {
            if e == NOT_LOADED {
                log::debug!("{engine} not loaded");
            } else {
                log::warn!("{engine} unavailable: {e}");
            }
            EngineOutput::Unavailable(e)
        }
        Err(p) => {
            let msg = panic_message(p);
            log::warn!("{engine} fault: {msg}");
            EngineOutput::Unavailable(format!("fault: {msg}"))
        }
    }
}

/// Runs every available engine on `scene`. Never fails: a missing or
/// failing engine becomes `Unavailable`.
pub fn assess(engines: &Engines, scene: &Scene, recent: &[ObservedEvent], cfg: &MonitorConfig) -> StrategicAssessment {
    let ere = guarded(EngineKind::Ere, || {
        let m = engines.ere.as_deref().ok_or(NOT_LOADED)?;
        ere_assess_with(m, scene, cfg.max_matches).map_err(|e| e.to_string())
    });
    let triggers = ere.available().map(EreAssessment::trigger_events).unwrap_or_default();
    let cie = guarded(EngineKind::Cie, || {
        let kb = engines.kb.as_deref().ok_or(NOT_LOADED)?;
        let a = cie_assess_with(kb, scene, &triggers, &cfg.cie);
        match a.fault {
            Some(f) => Err(format!("fault: {f}")),
            None => Ok(a),
        }
    });
    let gvk = guarded(EngineKind::Gvk, || {
        let s = engines.safety.as_deref().ok_or(NOT_LOADED)?;
        let a = gvk_evaluate(scene, recent, s);
        match a.fault {
            Some(f) => Err(format!("fault: {f}")),
            None => Ok(a),
        }
    });
    let mut findings = Vec::new();
    if let Some(a) = ere.available() {
        findings.extend(ere_findings(a, cfg));
    }
    if let Some(a) = cie.available() {
        findings.extend(cie_findings(a, cfg));
    }
    if let Some(a) = gvk.available() {
        findings.extend(gvk_findings(a, cfg));
    }
    // Stable: ties keep engine order.
    findings.sort_by_key(|f| std::cmp::Reverse(f.risk));
    let overall_risk = findings.iter().map(|f| f.risk).max().unwrap_or(Risk::None);
    StrategicAssessment { ere, cie, gvk, findings, overall_risk }
}

pub fn ere_findings(a: &EreAssessment, cfg: &MonitorConfig) -> Vec<Finding> {
    let mut out = Vec::new();
    if !a.similar_found {
        return out;
    }
    let mut crash_types: Vec<String> = Vec::new();
    for m in &a.matches {
        if !crash_types.contains(&m.crash_type) {
            crash_types.push(m.crash_type.clone());
        }
    }
    out.push(Finding {
        engine: EngineKind::Ere,
        risk: Risk::Caution,
        summary: format!("{} similar historical crash(es)", a.match_count),
        detail: FindingDetail::SimilarCrashes {
            match_count: a.match_count,
            crash_types,
            nearest_case: a.matches.first().map(|m| m.case_id.clone()),
        },
    });
    if let Some(s) = a.severe.as_ref().filter(|s| s.severe) {
        let level = a.level();
        let risk = if level.is_some_and(|l| l >= cfg.severe_min_level) { Risk::Severe } else { Risk::Hazard };
        let lvl = level.map_or_else(|| "unrated".to_string(), |l| format!("level {l}"));
        out.push(Finding {
            engine: EngineKind::Ere,
            risk,
            summary: format!("similar crashes predict a severe outcome ({lvl}, p = {:.2})", s.probability),
            detail: FindingDetail::SeverePredicted { probability: s.probability, level },
        });
    }
    out
}

pub fn cie_findings(a: &CieAssessment, cfg: &MonitorConfig) -> Vec<Finding> {
    a.foreseen
        .iter()
        .map(|f| Finding {
            engine: EngineKind::Cie,
            risk: if f.hops <= cfg.cie_hazard_max_hops { Risk::Hazard } else { Risk::Caution },
            summary: format!("`{}` may lead to `{}` in {} step(s)", f.start_event, f.hazard_event, f.hops),
            detail: FindingDetail::Foreseen(f.clone()),
        })
        .collect()
}

pub fn gvk_risk(v: &GvkViolation, cfg: &MonitorConfig) -> Risk {
    if v.distance_ratio().is_some_and(|r| r < cfg.severe_distance_ratio) {
        Risk::Severe
    } else if cfg.gvk_caution_kinds.contains(&v.kind) {
        Risk::Caution
    } else {
        Risk::Hazard
    }
}

pub fn gvk_findings(a: &GvkAssessment, cfg: &MonitorConfig) -> Vec<Finding> {
    a.violations
        .iter()
        .map(|v| Finding {
            engine: EngineKind::Gvk,
            risk: gvk_risk(v, cfg),
            summary: format!("{}: {}", v.rule_id, v.explanation),
            detail: FindingDetail::Violation(v.clone()),
        })
        .collect()
}

/// Verdict for a set of findings. With `fail_soft` the verdict is capped
/// at INHIBIT: degraded engines cannot veto a mission.
pub fn verdict_for(findings: &[Finding], fail_soft: bool) -> Verdict {
    let v = Verdict::from_risk(findings.iter().map(|f| f.risk).max().unwrap_or(Risk::None));
    if fail_soft { v.min(Verdict::Inhibit) } else { v }
}

pub fn decide(a: &StrategicAssessment) -> MonitorDecision {
    let unavailable = a.unavailable();
    let fail_soft = !unavailable.is_empty();
    MonitorDecision {
        verdict: verdict_for(&a.findings, fail_soft),
        reasons: a.findings.clone(),
        fail_soft,
        unavailable,
        overall_risk: a.overall_risk,
    }
}

/// Judge the transition from `current` to `proposed`. The verdict depends
/// on the proposed scene and the events that lead to it; `current` is part
/// of the request so callers can re-evaluate after an INHIBIT.
pub fn gate(
    engines: &Engines,
    _current: &Scene,
    proposed: &Scene,
    events: &[ObservedEvent],
    cfg: &MonitorConfig,
) -> MonitorDecision {
    decide(&assess(engines, proposed, events, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ere::synthetic::{scene_from_case, synthetic_cases, synthetic_specs};
    use crate::ere::{train_ere, TrainParams};
    use crate::cie::RelationCatalog;
    use crate::scene::{Actor, ActorClass};
    use std::sync::OnceLock;

    fn model() -> &'static EreModel {
        static M: OnceLock<EreModel> = OnceLock::new();
        M.get_or_init(|| train_ere(&synthetic_cases(1500, 7), &synthetic_specs(), &TrainParams::default()).unwrap())
    }

    fn engines() -> Engines {
        Engines::new(Some(model().clone()), Some(KnowledgeBase::seed()), Some(SafetyConfig::default()))
    }

    fn benign() -> Scene {
        Scene { actors: vec![Actor::subject("ego", ActorClass::PassengerCar).with_speed(10.0)], ..Default::default() }
    }

    #[test]
    fn subsets_cover_all_eight() {
        let s = EngineSet::subsets();
        assert_eq!(s[0], EngineSet::ALL);
        assert_eq!(s[7], EngineSet::NONE);
        let distinct: std::collections::HashSet<_> = s.iter().collect();
        assert_eq!(distinct.len(), 8);
    }

    #[test]
    fn benign_scene_with_empty_kb_is_quiet() {
        let e = Engines::new(None, Some(KnowledgeBase::new(RelationCatalog::builtin())), Some(SafetyConfig::default()));
        let a = assess(&e, &benign(), &[], &MonitorConfig::default());
        assert_eq!(a.overall_risk, Risk::None);
        let d = decide(&a);
        assert_eq!((d.verdict, d.fail_soft), (Verdict::Go, true));
        assert!(d.reasons.is_empty());
    }

    #[test]
    fn following_violation_is_at_least_hazard() {
        let mut s = benign();
        s.actors[0] = Actor::subject("ego", ActorClass::PassengerCar).with_speed(30.0);
        s.actors.push(Actor::new("lead", ActorClass::PassengerCar).at("1").with_distance(30.0));
        let e = Engines::new(None, None, Some(SafetyConfig::default()));
        let a = assess(&e, &s, &[], &MonitorConfig::default());
        assert!(a.overall_risk >= Risk::Hazard);
        let d = decide(&a);
        assert_eq!(d.verdict, Verdict::Inhibit);
        s.actors[1] = Actor::new("lead", ActorClass::PassengerCar).at("1").with_distance(20.0);
        let all = Engines::new(None, Some(KnowledgeBase::new(RelationCatalog::builtin())), Some(SafetyConfig::default()));
        let a = assess(&all, &s, &[], &MonitorConfig::default());
        assert_eq!(a.overall_risk, Risk::Severe);
    }

    #[test]
    fn broken_ere_model_is_contained() {
        let mut broken = model().clone();
        broken.schema_fingerprint = "corrupt".into();
        let e = Engines::new(Some(broken), Some(KnowledgeBase::seed()), Some(SafetyConfig::default()));
        let a = assess(&e, &benign(), &[], &MonitorConfig::default());
        assert!(!a.ere.is_available());
        assert!(a.cie.is_available() && a.gvk.is_available());
        assert!(decide(&a).fail_soft);
    }

    #[test]
    fn severe_exemplar_cancels_and_is_capped_without_ere() {
        let case = synthetic_cases(400, 99)
            .into_iter()
            .find(|c| c.severity_level == SeverityLevel::V)
            .expect("generator plants level V cases");
        let s = scene_from_case(&case);
        let cfg = MonitorConfig::default();
        let d = gate(&engines(), &benign(), &s, &[], &cfg);
        assert_eq!(d.verdict, Verdict::Cancel);
        assert!(d.reasons.iter().any(|f| matches!(f.detail, FindingDetail::SeverePredicted { .. })));
        let no_ere = engines().restrict(EngineSet { ere: false, ..EngineSet::ALL });
        let d = gate(&no_ere, &benign(), &s, &[], &cfg);
        assert!(d.verdict <= Verdict::Inhibit && d.fail_soft);
    }

    #[test]
    fn no_findings_means_go() {
        let d = gate(&engines(), &benign(), &Scene::default(), &[], &MonitorConfig::default());
        assert!(d.reasons.iter().all(|f| f.risk <= Risk::Caution));
        assert_eq!(d.verdict, Verdict::Go);
    }
}
