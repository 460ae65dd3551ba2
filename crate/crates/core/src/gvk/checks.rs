//! Distance, surrounding-pattern, lane-use and behavior checks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{BoundKind, Capability, Conditions, SafetyConfig};
use super::rss::{rss_min_lateral, rss_min_longitudinal, RssError};
use crate::element::{ids, MPH_TO_MPS};
use crate::scene::event::Event;
use crate::scene::{Actor, PositionCode, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    FollowingDistance,
    TrailingDistance,
    LateralDistance,
    LaneUse,
    BoxedIn,
    NoEscapeRoute,
    NoZone,
    Behavior,
}

impl ViolationKind {
    pub fn is_distance(self) -> bool {
        matches!(self, ViolationKind::FollowingDistance | ViolationKind::TrailingDistance | ViolationKind::LateralDistance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub unit: String,
}

impl Quantity {
    pub fn new(value: f64, unit: &str) -> Self {
        Quantity { value, unit: unit.into() }
    }
}

/// Invariant: distance and behavior violations carry `measured`,
/// `required` and `bound`, and `bound.violated(measured, required)` holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GvkViolation {
    pub rule_id: String,
    pub kind: ViolationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundKind>,
    pub explanation: String,
}

impl GvkViolation {
    /// Re-evaluate the comparison the violation was raised on.
    pub fn holds(&self) -> bool {
        match (&self.measured, &self.required, self.bound) {
            (Some(m), Some(r), Some(b)) => b.violated(m.value, r.value),
            (None, None, None) => !self.kind.is_distance() && self.kind != ViolationKind::Behavior,
            _ => false,
        }
    }

    /// measured / required for minimum-distance violations.
    pub fn distance_ratio(&self) -> Option<f64> {
        if !self.kind.is_distance() {
            return None;
        }
        let (m, r) = (self.measured.as_ref()?.value, self.required.as_ref()?.value);
        (r > 0.0).then(|| m / r)
    }
}

/// Output of a check: violations plus notes on what could not be checked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Findings {
    pub violations: Vec<GvkViolation>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequiredDistance {
    pub meters: f64,
    /// `None` when the other vehicle's kinematics are unknown.
    pub rss: Option<f64>,
    pub time_gap_term: f64,
    pub factor: f64,
}

/// Kinematics of the vehicle ahead in a longitudinal pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontKinematics {
    pub speed: f64,
    pub brake_max: f64,
}

/// `max(rss, v_rear * time_gap) * a_r * a_w * a_l`. Without front
/// kinematics only the time-gap term is used.
pub fn required_gap(
    v_rear: f64,
    rear: Capability,
    front: Option<FrontKinematics>,
    cond: &Conditions,
    cfg: &SafetyConfig,
) -> Result<RequiredDistance, RssError> {
    let rss = front
        .map(|f| rss_min_longitudinal(v_rear, f.speed, cfg.response_time, rear.accel_max, rear.brake_min, f.brake_max))
        .transpose()?;
    let time_gap_term = v_rear * cfg.time_gap_for(cond.class);
    let factor = cond.factor();
    Ok(RequiredDistance { meters: rss.unwrap_or(0.0).max(time_gap_term) * factor, rss, time_gap_term, factor })
}

/// The following-distance requirement for a subject at `v_s`.
pub fn required_following_distance(
    v_s: f64,
    subject: Capability,
    lead: Option<FrontKinematics>,
    cond: &Conditions,
    cfg: &SafetyConfig,
) -> Result<RequiredDistance, RssError> {
    required_gap(v_s, subject, lead, cond, cfg)
}

fn capability_of(a: &Actor, cfg: &SafetyConfig) -> Capability {
    let mut c = cfg.capability(a.class);
    if let Some(k) = a.kinematics {
        c.accel_max = k.accel_cap_max.unwrap_or(c.accel_max);
        c.brake_min = k.brake_cap_min.unwrap_or(c.brake_min);
        c.brake_max = k.brake_cap_max.unwrap_or(c.brake_max);
    }
    c
}

/// Subject speed in m/s from its kinematics, else from the travel-speed
/// scenery element (mph).
pub fn subject_speed(scene: &Scene) -> Option<f64> {
    scene.subject().and_then(Actor::speed).or_else(|| scene.number(ids::TRAVEL_SPEED).map(|mph| mph * MPH_TO_MPS))
}

fn at<'a>(scene: &'a Scene, label: &str) -> Option<&'a Actor> {
    scene.actor_at(PositionCode::parse(label).ok()?)
}

/// Measured and required gap to one neighbor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborGap {
    pub actor: String,
    pub cell: String,
    pub kind: ViolationKind,
    pub required: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<f64>,
}

/// Required gaps to the lead ("1", else "2"), the trailer ("-1") and the
/// lateral neighbors ("L", "R").
pub fn neighbor_gaps(scene: &Scene, cfg: &SafetyConfig) -> (Vec<NeighborGap>, Vec<String>) {
    let mut gaps = Vec::new();
    let mut notes = Vec::new();
    let Some(subject) = scene.subject() else {
        notes.push("no subject actor; distances not checked".into());
        return (gaps, notes);
    };
    let cond = cfg.conditions(scene);
    let subj_cap = capability_of(subject, cfg);
    let v_s = subject_speed(scene);
    let mut push = |r: Result<RequiredDistance, RssError>, a: &Actor, cell: &str, kind: ViolationKind, notes: &mut Vec<String>| {
        match r {
            Ok(req) => {
                if req.rss.is_none() {
                    notes.push(format!("{}: kinematics unknown, time-gap term only", a.id));
                }
                gaps.push(NeighborGap { actor: a.id.clone(), cell: cell.into(), kind, required: req.meters, measured: a.distance });
            }
            Err(e) => notes.push(format!("{}: {e}", a.id)),
        }
    };

    let lead_cell = if at(scene, "1").is_some() { "1" } else { "2" };
    if let Some(lead) = at(scene, lead_cell) {
        match v_s {
            Some(v) => {
                let front = lead.speed().map(|s| FrontKinematics { speed: s, brake_max: capability_of(lead, cfg).brake_max });
                push(required_following_distance(v, subj_cap, front, &cond, cfg), lead, lead_cell, ViolationKind::FollowingDistance, &mut notes);
            }
            None => notes.push("subject speed unknown; following distance not checked".into()),
        }
    }
    if let Some(trailer) = at(scene, "-1") {
        match trailer.speed() {
            Some(v_t) => {
                let front = v_s.map(|s| FrontKinematics { speed: s, brake_max: subj_cap.brake_max });
                push(required_gap(v_t, capability_of(trailer, cfg), front, &cond, cfg), trailer, "-1", ViolationKind::TrailingDistance, &mut notes);
            }
            None => notes.push(format!("{}: trailing speed unknown; trailing distance not checked", trailer.id)),
        }
    }
    let subj_lat = subject.kinematics.and_then(|k| k.lateral_speed).unwrap_or(0.0);
    for (cell, toward) in [("L", subj_lat), ("R", -subj_lat)] {
        let Some(n) = at(scene, cell) else { continue };
        let l = &cfg.lateral;
        let u_n = n.kinematics.and_then(|k| k.lateral_speed).unwrap_or(0.0);
        match rss_min_lateral(toward, u_n, cfg.response_time, l.accel_max, l.brake_min, l.margin) {
            Ok(d) => gaps.push(NeighborGap {
                actor: n.id.clone(),
                cell: cell.into(),
                kind: ViolationKind::LateralDistance,
                required: d.max(l.clearance_min) * cond.factor(),
                measured: n.lateral_distance,
            }),
            Err(e) => notes.push(format!("{}: {e}", n.id)),
        }
    }
    (gaps, notes)
}

pub fn check_distances(scene: &Scene, cfg: &SafetyConfig) -> Findings {
    let (gaps, mut notes) = neighbor_gaps(scene, cfg);
    let mut violations = Vec::new();
    for g in gaps {
        let Some(m) = g.measured else {
            notes.push(format!("{}: no measured gap", g.actor));
            continue;
        };
        if !BoundKind::Min.violated(m, g.required) {
            continue;
        }
        let (rule_id, what) = match g.kind {
            ViolationKind::FollowingDistance => ("distance.following", "lead vehicle"),
            ViolationKind::TrailingDistance => ("distance.trailing", "trailing vehicle"),
            _ => ("distance.lateral", "lateral neighbor"),
        };
        violations.push(GvkViolation {
            rule_id: rule_id.into(),
            kind: g.kind,
            actor: Some(g.actor.clone()),
            measured: Some(Quantity::new(m, "m")),
            required: Some(Quantity::new(g.required, "m")),
            bound: Some(BoundKind::Min),
            explanation: format!("{what} `{}` at {m:.1} m, at least {:.1} m required", g.actor, g.required),
        });
    }
    Findings { violations, notes }
}

fn pattern(rule_id: &str, kind: ViolationKind, actor: Option<String>, explanation: String) -> GvkViolation {
    GvkViolation { rule_id: rule_id.into(), kind, actor, measured: None, required: None, bound: None, explanation }
}

pub fn check_surrounding_pattern(scene: &Scene, cfg: &SafetyConfig) -> Findings {
    let mut f = Findings::default();
    if scene.subject().is_none() {
        f.notes.push("no subject actor; surrounding pattern not checked".into());
        return f;
    }
    let occ = |l: &str| at(scene, l).is_some();
    if occ("1") && occ("L") && occ("R") {
        f.violations.push(pattern(
            "pattern.boxed_in",
            ViolationKind::BoxedIn,
            None,
            "vehicles on both sides and ahead: sandwiched with no lateral way out".into(),
        ));
    }
    if occ("1") && occ("L1") && occ("R1") {
        f.violations.push(pattern(
            "pattern.no_escape_route",
            ViolationKind::NoEscapeRoute,
            None,
            "the cell ahead and both forward adjacent cells are occupied: no escape route if the lead stops".into(),
        ));
    }
    for a in scene.actors.iter().filter(|a| !a.subject && a.class.is_large_vehicle()) {
        let (Some(pos), Some(cells)) = (a.position, cfg.no_zone.get(&a.class)) else { continue };
        let Some(rel) = PositionCode::SUBJECT.relative_to(pos) else { continue };
        let label = rel.label();
        if cells.iter().any(|c| PositionCode::parse(c).ok() == Some(rel)) {
            f.violations.push(pattern(
                "pattern.no_zone",
                ViolationKind::NoZone,
                Some(a.id.clone()),
                format!("subject sits in the no-zone of `{}` (cell {label} relative to it)", a.id),
            ));
        }
    }
    f
}

pub fn check_lane_use(scene: &Scene, cfg: &SafetyConfig) -> Findings {
    let mut f = Findings::default();
    let Some(s) = scene.subject() else { return f };
    let Some(lane) = s.lane else { return f };
    let total = scene.number(ids::TOTAL_LANES);
    for r in &cfg.lane_rules {
        let applies = r.classes.contains(&s.class) && total.is_some_and(|t| t >= f64::from(r.min_total_lanes));
        if applies && r.prohibited_lanes.contains(&lane) {
            f.violations.push(pattern(&r.id, ViolationKind::LaneUse, Some(s.id.clone()), format!("lane {lane}: {}", r.description)));
        }
    }
    f
}

fn contains_phrase(text: &str, phrase: &str) -> bool {
    format!(" {text} ").contains(&format!(" {} ", phrase.to_lowercase()))
}

/// Behavior kinds whose keywords occur in the event text.
pub fn behavior_kinds<'a>(event: &Event, cfg: &'a SafetyConfig) -> Vec<&'a str> {
    let text = event.normalized();
    cfg.behavior_rules
        .iter()
        .filter(|(_, b)| b.keywords.iter().any(|k| contains_phrase(&text, k)))
        .map(|(k, _)| k.as_str())
        .collect()
}

pub fn check_behavior(event: &Event, params: &BTreeMap<String, f64>, cond: &Conditions, cfg: &SafetyConfig) -> Findings {
    let mut f = Findings::default();
    let kinds = behavior_kinds(event, cfg);
    if kinds.is_empty() {
        log::info!("no behavior rules for event `{}`", event.normalized());
        f.notes.push(format!("no behavior rules for `{}`", event.normalized()));
        return f;
    }
    for kind in kinds {
        for r in &cfg.behavior_rules[kind].rules {
            let Some(&m) = params.get(&r.param) else { continue };
            let required = match (r.scale_with_conditions, r.bound) {
                (false, _) => r.value,
                (true, BoundKind::Min) => r.value * cond.factor(),
                (true, BoundKind::Max) => r.value / cond.factor(),
            };
            if r.bound.violated(m, required) {
                let word = if r.bound == BoundKind::Min { "at least" } else { "at most" };
                f.violations.push(GvkViolation {
                    rule_id: r.id.clone(),
                    kind: ViolationKind::Behavior,
                    actor: None,
                    measured: Some(Quantity::new(m, &r.unit)),
                    required: Some(Quantity::new(required, &r.unit)),
                    bound: Some(r.bound),
                    explanation: format!("{kind}: {} {m} {} where {word} {required:.2} is required", r.element, r.unit),
                });
            }
        }
    }
    f
}
