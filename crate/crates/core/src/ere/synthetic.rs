//! Seeded synthetic crash cases with a planted severity rule.
//!
//! Severe iff the subject travels more than 10 mph over the limit in the
//! dark. Severe cases are graded by the excess speed: II below 20 mph
//! over, III below 30, IV below 40, V beyond. Every other element is
//! noise.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::severity::{SeverityCounts, SeverityLevel};
use crate::element::{ids, ElementValue};
use crate::ingest::{ConsolidatedCase, ElementCatalog};
use crate::scene::encoding::ElementSpec;
use crate::scene::{Actor, ActorClass, Scene};

pub const ELEMENTS: [&str; 12] = [
    ids::LIGHT,
    ids::ATMOSPHERIC,
    ids::SURFACE,
    ids::SPEED_LIMIT,
    ids::TRAVEL_SPEED,
    ids::HOUR,
    ids::BODY_TYPE,
    ids::SEX,
    ids::AGE,
    ids::TOTAL_LANES,
    "relation_to_junction",
    ids::TRIGGER_EVENT,
];

const DARK: [&str; 2] = ["light_dark_not_lighted", "light_dark_lighted"];
const ATMOS: [&str; 4] = ["atmos_clear", "atmos_rain", "atmos_snow", "atmos_fog"];
const SURFACE: [&str; 4] = ["surface_dry", "surface_wet", "surface_snow", "surface_ice_frost"];
const LIMITS: [f64; 6] = [25.0, 35.0, 45.0, 55.0, 65.0, 70.0];
const BODIES: [&str; 5] = ["body_passenger_car", "body_suv", "body_van", "body_pickup", "body_medium_heavy_truck"];
const SEXES: [&str; 2] = ["sex_male", "sex_female"];
const JUNCTIONS: [&str; 4] =
    ["junction_non_junction", "junction_intersection", "junction_intersection_related", "junction_driveway_access"];
const TRIGGERS: [&str; 6] = [
    "pc19_pedestrian_in_road",
    "pc19_object_in_road",
    "pc19_animal_in_road",
    "pc19_other_vehicle_stopped",
    "pc19_other_vehicle_slower",
    "pc19_turning_left",
];
const CRASH_TYPES: [&str; 5] = ["ct_1", "ct_20", "ct_44", "ct_68", "ct_92"];

/// The planted label. `None` inputs never yield a severe case.
pub fn planted_level(speed_over_limit: Option<f64>, dark: bool) -> SeverityLevel {
    match speed_over_limit {
        Some(s) if dark && s > 10.0 => match s {
            s if s < 20.0 => SeverityLevel::II,
            s if s < 30.0 => SeverityLevel::III,
            s if s < 40.0 => SeverityLevel::IV,
            _ => SeverityLevel::V,
        },
        _ => SeverityLevel::I,
    }
}

/// Counts whose index lands exactly in `level`.
pub fn counts_for(level: SeverityLevel) -> SeverityCounts {
    match level {
        SeverityLevel::I => SeverityCounts::default(),
        SeverityLevel::II => SeverityCounts { e: 1, ..Default::default() },
        SeverityLevel::III => SeverityCounts { b: 1, ..Default::default() },
        SeverityLevel::IV => SeverityCounts { a: 1, ..Default::default() },
        SeverityLevel::V => SeverityCounts { a: 1, b: 1, ..Default::default() },
    }
}

/// Specs for the generated elements, with unknown ids from the shipped catalog.
pub fn synthetic_specs() -> Vec<ElementSpec> {
    let all = ElementSpec::from_catalog(&ElementCatalog::builtin());
    ELEMENTS
        .iter()
        .map(|id| all.iter().find(|s| s.id == *id).cloned().expect("synthetic element is in the catalog"))
        .collect()
}

pub fn synthetic_cases(n: usize, seed: u64) -> Vec<ConsolidatedCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| one_case(i, &mut rng)).collect()
}

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).copied().expect("non-empty choice")
}

fn one_case(i: usize, rng: &mut ChaCha8Rng) -> ConsolidatedCase {
    let attr = |s: &str| ElementValue::attr(s);
    let mut m = BTreeMap::new();
    // Light and hour agree with each other.
    let (light, hour) = match rng.random_range(0..100) {
        0..45 => ("light_daylight", rng.random_range(7..=17)),
        45..65 => (DARK[0], night_hour(rng)),
        65..85 => (DARK[1], night_hour(rng)),
        85..92 => ("light_dawn", rng.random_range(5..=6)),
        _ => ("light_dusk", rng.random_range(18..=20)),
    };
    m.insert(ids::LIGHT.into(), attr(light));
    m.insert(ids::HOUR.into(), ElementValue::Number(f64::from(hour)));
    m.insert(ids::ATMOSPHERIC.into(), attr(pick(rng, &ATMOS)));
    m.insert(ids::SURFACE.into(), attr(pick(rng, &SURFACE)));
    let limit = *LIMITS.choose(rng).expect("limits");
    let travel = (limit + rng.random_range(-20.0..50.0_f64)).max(0.0).round();
    m.insert(ids::SPEED_LIMIT.into(), ElementValue::Number(limit));
    m.insert(ids::TRAVEL_SPEED.into(), ElementValue::Number(travel));
    m.insert(ids::BODY_TYPE.into(), attr(pick(rng, &BODIES)));
    m.insert(ids::SEX.into(), attr(pick(rng, &SEXES)));
    m.insert(ids::AGE.into(), ElementValue::Number(f64::from(rng.random_range(16..=90))));
    m.insert(ids::TOTAL_LANES.into(), ElementValue::Number(f64::from(rng.random_range(1..=5))));
    m.insert("relation_to_junction".into(), attr(pick(rng, &JUNCTIONS)));
    m.insert(ids::TRIGGER_EVENT.into(), attr(pick(rng, &TRIGGERS)));

    let level = planted_level(Some(travel - limit), DARK.contains(&light));
    let crash_type = pick(rng, &CRASH_TYPES);
    ConsolidatedCase::from_parts(format!("SYN{i:07}"), 2020, m, crash_type, counts_for(level))
}

fn night_hour(rng: &mut ChaCha8Rng) -> u32 {
    (21 + rng.random_range(0..8)) % 24
}

/// A one-actor scene whose encoding equals the case's encoding.
pub fn scene_from_case(case: &ConsolidatedCase) -> Scene {
    let class = case
        .causal
        .get(ids::BODY_TYPE)
        .and_then(ElementValue::as_attr)
        .and_then(ActorClass::from_body_type_attr)
        .unwrap_or(ActorClass::PassengerCar);
    Scene { scenery: case.causal.clone(), actors: vec![Actor::subject("ego", class)], relations: Vec::new() }
}
