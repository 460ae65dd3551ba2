//! Scenes, actors and scenarios shared by all three engines.

pub mod encoding;
pub mod event;
pub mod position;
pub mod scenario;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::element::{ids, ElementValue, MPH_TO_MPS};

pub use encoding::{EncodingError, EncodingSchema, FeatureVector};
pub use event::{parse_event, Event};
pub use position::{PositionCode, PositionError};
pub use scenario::{validate_scenario, ObservedEvent, Scenario, ScenarioStep, ScenarioViolation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorClass {
    PassengerCar,
    #[serde(alias = "utility_vehicle")]
    Suv,
    Van,
    Pickup,
    LightTruck,
    Bus,
    #[serde(alias = "lorry", alias = "medium_heavy_truck")]
    HeavyTruck,
    Motorcycle,
    OtherVehicle,
    Pedestrian,
    Cyclist,
    Animal,
    Object,
}

impl ActorClass {
    pub fn is_vehicle(self) -> bool {
        !matches!(self, ActorClass::Pedestrian | ActorClass::Cyclist | ActorClass::Animal | ActorClass::Object)
    }

    /// Vehicles with blind-spot no-zones.
    pub fn is_large_vehicle(self) -> bool {
        matches!(self, ActorClass::Bus | ActorClass::HeavyTruck)
    }

    /// Body-type attribute id in the element catalog.
    pub fn body_type_attr(self) -> Option<&'static str> {
        Some(match self {
            ActorClass::PassengerCar => "body_passenger_car",
            ActorClass::Suv => "body_suv",
            ActorClass::Van => "body_van",
            ActorClass::Pickup => "body_pickup",
            ActorClass::LightTruck => "body_light_truck_other",
            ActorClass::Bus => "body_bus",
            ActorClass::HeavyTruck => "body_medium_heavy_truck",
            ActorClass::Motorcycle => "body_motorcycle",
            ActorClass::OtherVehicle => "body_other",
            _ => return None,
        })
    }

    pub fn from_body_type_attr(attr: &str) -> Option<Self> {
        [
            ActorClass::PassengerCar,
            ActorClass::Suv,
            ActorClass::Van,
            ActorClass::Pickup,
            ActorClass::LightTruck,
            ActorClass::Bus,
            ActorClass::HeavyTruck,
            ActorClass::Motorcycle,
            ActorClass::OtherVehicle,
        ]
        .into_iter()
        .find(|c| c.body_type_attr() == Some(attr))
    }
}

/// Speeds in m/s, accelerations as positive magnitudes in m/s².
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Kinematics {
    pub speed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accel_cap_max: Option<f64>,
    /// Hardest braking the actor is capable of.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brake_cap_max: Option<f64>,
    /// Braking the actor is guaranteed to apply when it must respond.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brake_cap_min: Option<f64>,
    /// Lateral speed toward the subject, m/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lateral_speed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Actor {
    pub id: String,
    pub class: ActorClass,
    #[serde(default, skip_serializing_if = "is_false")]
    pub subject: bool,
    /// Maintained relationship label, e.g. `following`, `waiting`.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub state: String,
    /// Event sentence describing what the actor is doing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Grid cell; `None` means outside the 5x5 grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<PositionCode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinematics: Option<Kinematics>,
    /// Longitudinal bumper-to-bumper gap to the subject, m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
    /// Lateral clearance to the subject, m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lateral_distance: Option<f64>,
    /// Lane number counted from the leftmost lane (1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane: Option<u32>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl Actor {
    pub fn new(id: impl Into<String>, class: ActorClass) -> Self {
        Actor {
            id: id.into(),
            class,
            subject: false,
            state: String::new(),
            description: None,
            position: None,
            kinematics: None,
            distance: None,
            lateral_distance: None,
            lane: None,
        }
    }

    pub fn subject(id: impl Into<String>, class: ActorClass) -> Self {
        Actor { subject: true, position: Some(PositionCode::SUBJECT), ..Actor::new(id, class) }
    }

    pub fn at(mut self, label: &str) -> Self {
        self.position = Some(PositionCode::parse(label).expect("valid position label"));
        self
    }

    pub fn with_speed(mut self, speed: f64) -> Self {
        self.kinematics.get_or_insert_with(Kinematics::default).speed = speed;
        self
    }

    pub fn with_distance(mut self, d: f64) -> Self {
        self.distance = Some(d);
        self
    }

    pub fn with_lateral_distance(mut self, d: f64) -> Self {
        self.lateral_distance = Some(d);
        self
    }

    pub fn described(mut self, text: impl Into<String>) -> Self {
        self.description = Some(text.into());
        self
    }

    pub fn speed(&self) -> Option<f64> {
        self.kinematics.map(|k| k.speed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationEdge {
    pub from: String,
    pub to: String,
    pub relation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default)]
    pub scenery: BTreeMap<String, ElementValue>,
    #[serde(default)]
    pub actors: Vec<Actor>,
    #[serde(default)]
    pub relations: Vec<RelationEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneIssue {
    NoSubject,
    MultipleSubjects { actors: Vec<String> },
    SubjectOffCentre { actor: String },
    CentreOccupied { actor: String },
    DuplicateActor { actor: String },
    DanglingRelation { relation: String, reference: String },
    NonPositiveCapability { actor: String, field: String },
}

impl fmt::Display for SceneIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SceneIssue::NoSubject => write!(f, "no subject actor"),
            SceneIssue::MultipleSubjects { actors } => write!(f, "more than one subject: {}", actors.join(", ")),
            SceneIssue::SubjectOffCentre { actor } => write!(f, "subject `{actor}` is not at the grid centre"),
            SceneIssue::CentreOccupied { actor } => write!(f, "non-subject `{actor}` occupies the grid centre"),
            SceneIssue::DuplicateActor { actor } => write!(f, "duplicate actor id `{actor}`"),
            SceneIssue::DanglingRelation { relation, reference } => {
                write!(f, "relation `{relation}` references unknown `{reference}`")
            }
            SceneIssue::NonPositiveCapability { actor, field } => write!(f, "actor `{actor}` has non-positive {field}"),
        }
    }
}

impl Scene {
    pub fn subject(&self) -> Option<&Actor> {
        self.actors.iter().find(|a| a.subject)
    }

    pub fn actor(&self, id: &str) -> Option<&Actor> {
        self.actors.iter().find(|a| a.id == id)
    }

    /// First non-subject actor in `cell`.
    pub fn actor_at(&self, cell: PositionCode) -> Option<&Actor> {
        self.actors.iter().find(|a| !a.subject && a.position == Some(cell))
    }

    pub fn occupied(&self, label: &str) -> bool {
        PositionCode::parse(label).is_ok_and(|c| self.actor_at(c).is_some())
    }

    pub fn attr(&self, element: &str) -> Option<&str> {
        self.scenery.get(element).and_then(ElementValue::as_attr)
    }

    pub fn number(&self, element: &str) -> Option<f64> {
        self.scenery.get(element).and_then(ElementValue::as_number)
    }

    /// Scenery plus elements implied by the subject actor: travel speed
    /// in mph and body type. Explicit scenery entries win.
    pub fn causal_map(&self) -> BTreeMap<String, ElementValue> {
        let mut map = self.scenery.clone();
        if let Some(s) = self.subject() {
            if let Some(v) = s.speed() {
                map.entry(ids::TRAVEL_SPEED.to_string())
                    .or_insert(ElementValue::Number(v / MPH_TO_MPS));
            }
            if let Some(body) = s.class.body_type_attr() {
                map.entry(ids::BODY_TYPE.to_string()).or_insert_with(|| ElementValue::attr(body));
            }
        }
        map
    }

    /// Event sentences carried by actor descriptions and relation
    /// descriptions, in scene order.
    pub fn event_texts(&self) -> Vec<&str> {
        self.actors
            .iter()
            .filter_map(|a| a.description.as_deref())
            .chain(self.relations.iter().filter_map(|r| r.description.as_deref()))
            .collect()
    }

    pub fn validate(&self) -> Vec<SceneIssue> {
        let mut issues = Vec::new();
        let subjects: Vec<String> = self.actors.iter().filter(|a| a.subject).map(|a| a.id.clone()).collect();
        match subjects.len() {
            0 => issues.push(SceneIssue::NoSubject),
            1 => {}
            _ => issues.push(SceneIssue::MultipleSubjects { actors: subjects }),
        }
        let mut seen = HashSet::new();
        for a in &self.actors {
            if !seen.insert(a.id.as_str()) {
                issues.push(SceneIssue::DuplicateActor { actor: a.id.clone() });
            }
            match (a.subject, a.position.map(PositionCode::is_subject)) {
                (true, Some(false)) => issues.push(SceneIssue::SubjectOffCentre { actor: a.id.clone() }),
                (false, Some(true)) => issues.push(SceneIssue::CentreOccupied { actor: a.id.clone() }),
                _ => {}
            }
            if let Some(k) = a.kinematics {
                let caps = [
                    ("accel_cap_max", k.accel_cap_max),
                    ("brake_cap_max", k.brake_cap_max),
                    ("brake_cap_min", k.brake_cap_min),
                ];
                for (field, v) in caps {
                    if v.is_some_and(|v| v.is_nan() || v <= 0.0) {
                        issues.push(SceneIssue::NonPositiveCapability { actor: a.id.clone(), field: field.into() });
                    }
                }
            }
        }
        for r in &self.relations {
            for reference in [&r.from, &r.to] {
                if self.actor(reference).is_none() && !self.scenery.contains_key(reference.as_str()) {
                    issues.push(SceneIssue::DanglingRelation {
                        relation: r.relation.clone(),
                        reference: reference.clone(),
                    });
                }
            }
        }
        issues
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basic() -> Scene {
        Scene {
            scenery: BTreeMap::from([(ids::LIGHT.to_string(), ElementValue::attr("light_daylight"))]),
            actors: vec![
                Actor::subject("ego", ActorClass::PassengerCar).with_speed(20.0),
                Actor::new("lead", ActorClass::HeavyTruck).at("1").with_distance(40.0),
            ],
            relations: vec![RelationEdge {
                from: "ego".into(),
                to: "lead".into(),
                relation: "following".into(),
                description: None,
            }],
        }
    }

    #[test]
    fn valid_scene_has_no_issues() {
        assert!(basic().validate().is_empty());
    }

    #[test]
    fn subject_rules() {
        let mut s = basic();
        s.actors.push(Actor::subject("ego2", ActorClass::Van));
        assert!(matches!(s.validate()[0], SceneIssue::MultipleSubjects { .. }));
        let mut s = basic();
        s.actors[0].subject = false;
        assert!(s.validate().contains(&SceneIssue::NoSubject));
        assert!(s.validate().contains(&SceneIssue::CentreOccupied { actor: "ego".into() }));
    }

    #[test]
    fn dangling_relation_and_bad_caps() {
        let mut s = basic();
        s.relations[0].to = "ghost".into();
        s.actors[1].kinematics = Some(Kinematics { brake_cap_max: Some(0.0), ..Default::default() });
        let issues = s.validate();
        assert_eq!(issues.len(), 2);
        assert!(issues.iter().any(|i| matches!(i, SceneIssue::DanglingRelation { reference, .. } if reference == "ghost")));
    }

    #[test]
    fn causal_map_derives_subject_elements() {
        let map = basic().causal_map();
        let mph = map[ids::TRAVEL_SPEED].as_number().unwrap();
        assert!((mph * MPH_TO_MPS - 20.0).abs() < 1e-9);
        assert_eq!(map[ids::BODY_TYPE].as_attr(), Some("body_passenger_car"));
    }

    #[test]
    fn json_uses_grid_labels() {
        let json = serde_json::to_string(&basic()).unwrap();
        assert!(json.contains("\"position\":\"1\""));
        let back: Scene = serde_json::from_str(&json).unwrap();
        assert_eq!(back, basic());
        let lorry: Actor = serde_json::from_str(r#"{"id":"t","class":"lorry","position":"-L1"}"#).unwrap();
        assert_eq!(lorry.class, ActorClass::HeavyTruck);
        assert!(serde_json::from_str::<Actor>(r#"{"id":"t","class":"bus","position":"Q"}"#).is_err());
    }

    #[test]
    fn body_type_mapping_round_trips() {
        for c in [ActorClass::Bus, ActorClass::Motorcycle, ActorClass::Suv] {
            assert_eq!(ActorClass::from_body_type_attr(c.body_type_attr().unwrap()), Some(c));
        }
        assert_eq!(ActorClass::Pedestrian.body_type_attr(), None);
    }
}
