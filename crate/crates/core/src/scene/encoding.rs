//! Feature encoding shared by cases and scenes.
//!
//! Block layout, in schema order:
//! * categorical: `[c_1 .. c_k, other, unknown]`, one-hot
//! * numeric: `[standardised value, unknown flag]`
//! * speed over limit: `[standardised travel_speed - speed_limit, unknown flag]`
//! * time of day: `[night, dawn, day, dusk, unknown]`, one-hot from the hour

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::element::{ids, ElementValue};
use crate::ingest::{ElementCatalog, ElementKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodingError {
    #[error("element `{0}` is not part of the encoding schema")]
    UnknownElement(String),
    #[error("element `{element}` expects a {expected} value, got `{found}`")]
    WrongKind { element: String, expected: &'static str, found: String },
    #[error("feature schema mismatch: expected fingerprint {expected}, found {found}")]
    FingerprintMismatch { expected: String, found: String },
}

/// One element the schema is fitted over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementSpec {
    pub id: String,
    pub numeric: bool,
    pub unknown: String,
}

impl ElementSpec {
    pub fn categorical(id: &str) -> Self {
        ElementSpec { id: id.into(), numeric: false, unknown: format!("{id}_unknown") }
    }

    pub fn numeric(id: &str) -> Self {
        ElementSpec { id: id.into(), numeric: true, unknown: format!("{id}_unknown") }
    }

    /// All causal elements of the catalog, in catalog order.
    pub fn from_catalog(catalog: &ElementCatalog) -> Vec<ElementSpec> {
        catalog
            .causal_entries()
            .map(|e| ElementSpec {
                id: e.id.clone(),
                numeric: e.kind == ElementKind::Numeric,
                unknown: e.unknown.id.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Block {
    Categorical { element: String, unknown: String, categories: Vec<String> },
    Numeric { element: String, unknown: String, mean: f64, scale: f64 },
    SpeedOverLimit { mean: f64, scale: f64 },
    TimeOfDay,
}

impl Block {
    pub fn name(&self) -> &str {
        match self {
            Block::Categorical { element, .. } | Block::Numeric { element, .. } => element,
            Block::SpeedOverLimit { .. } => ids::SPEED_OVER_LIMIT,
            Block::TimeOfDay => ids::TIME_OF_DAY,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            Block::Categorical { categories, .. } => categories.len() + 2,
            Block::Numeric { .. } | Block::SpeedOverLimit { .. } => 2,
            Block::TimeOfDay => TIME_BUCKETS.len() + 1,
        }
    }
}

pub const TIME_BUCKETS: [&str; 4] = ["night", "dawn", "day", "dusk"];

/// night 21-4, dawn 5-6, day 7-17, dusk 18-20.
pub fn time_bucket(hour: f64) -> Option<usize> {
    if !(0.0..24.0).contains(&hour) {
        return None;
    }
    Some(match hour as u32 {
        5..=6 => 1,
        7..=17 => 2,
        18..=20 => 3,
        _ => 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncodingSchema {
    blocks: Vec<Block>,
    #[serde(skip)]
    fingerprint: String,
    #[serde(skip)]
    offsets: Vec<usize>,
}

/// Values in schema order with the fingerprint of the schema that made them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub fingerprint: String,
}

impl FeatureVector {
    pub fn ensure_fingerprint(&self, expected: &str) -> Result<(), EncodingError> {
        if self.fingerprint == expected {
            Ok(())
        } else {
            Err(EncodingError::FingerprintMismatch { expected: expected.into(), found: self.fingerprint.clone() })
        }
    }
}

fn is_unknown(v: &ElementValue, unknown: &str) -> bool {
    matches!(v, ElementValue::Attr(a) if a == unknown || a == "unknown")
}

fn mean_scale(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 1.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    (mean, if sd > 1e-12 { sd } else { 1.0 })
}

impl EncodingSchema {
    pub fn from_blocks(blocks: Vec<Block>) -> Self {
        let mut s = EncodingSchema { blocks, fingerprint: String::new(), offsets: Vec::new() };
        s.finish();
        s
    }

    fn finish(&mut self) {
        let mut off = 0;
        self.offsets = self
            .blocks
            .iter()
            .map(|b| {
                let o = off;
                off += b.width();
                o
            })
            .collect();
        self.offsets.push(off);
        let bytes = serde_json::to_vec(&self.blocks).expect("blocks serialise");
        let digest = Sha256::digest(&bytes);
        self.fingerprint = digest.iter().take(12).map(|b| format!("{b:02x}")).collect();
    }

    /// Fit category sets (most frequent first, at most `max_categories`)
    /// and standardisation constants from training maps.
    pub fn fit<'a, I>(specs: &[ElementSpec], maps: I, max_categories: usize) -> Self
    where
        I: IntoIterator<Item = &'a BTreeMap<String, ElementValue>>,
    {
        let maps: Vec<&BTreeMap<String, ElementValue>> = maps.into_iter().collect();
        let mut blocks = Vec::with_capacity(specs.len() + 2);
        for spec in specs {
            let values = maps.iter().filter_map(|m| m.get(&spec.id)).filter(|v| !is_unknown(v, &spec.unknown));
            if spec.numeric {
                let nums: Vec<f64> = values.filter_map(ElementValue::as_number).collect();
                let (mean, scale) = mean_scale(&nums);
                blocks.push(Block::Numeric { element: spec.id.clone(), unknown: spec.unknown.clone(), mean, scale });
            } else {
                let mut counts: HashMap<&str, usize> = HashMap::new();
                for a in values.filter_map(ElementValue::as_attr) {
                    *counts.entry(a).or_default() += 1;
                }
                let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
                ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
                let mut categories: Vec<String> =
                    ranked.into_iter().take(max_categories).map(|(a, _)| a.to_string()).collect();
                categories.sort();
                blocks.push(Block::Categorical {
                    element: spec.id.clone(),
                    unknown: spec.unknown.clone(),
                    categories,
                });
            }
        }
        let has = |id: &str| specs.iter().any(|s| s.id == id && s.numeric);
        if has(ids::TRAVEL_SPEED) && has(ids::SPEED_LIMIT) {
            let diffs: Vec<f64> = maps.iter().filter_map(|m| speed_over_limit(m)).collect();
            let (mean, scale) = mean_scale(&diffs);
            blocks.push(Block::SpeedOverLimit { mean, scale });
        }
        if has(ids::HOUR) {
            blocks.push(Block::TimeOfDay);
        }
        Self::from_blocks(blocks)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn dimension(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn covers(&self, element: &str) -> bool {
        self.blocks.iter().any(|b| b.name() == element)
    }

    /// Index range of a block within the vector.
    pub fn block_range(&self, name: &str) -> Option<Range<usize>> {
        let i = self.blocks.iter().position(|b| b.name() == name)?;
        Some(self.offsets[i]..self.offsets[i + 1])
    }

    /// Encode a causal map. Absent elements encode as unknown; elements
    /// the schema does not know are an error.
    pub fn encode(&self, map: &BTreeMap<String, ElementValue>) -> Result<FeatureVector, EncodingError> {
        for key in map.keys() {
            if !self.blocks.iter().any(|b| matches!(b, Block::Categorical { element, .. } | Block::Numeric { element, .. } if element == key)) {
                return Err(EncodingError::UnknownElement(key.clone()));
            }
        }
        let mut values = vec![0.0; self.dimension()];
        for (block, &off) in self.blocks.iter().zip(&self.offsets) {
            let out = &mut values[off..off + block.width()];
            match block {
                Block::Categorical { element, unknown, categories } => {
                    let slot = match map.get(element) {
                        None => categories.len() + 1,
                        Some(v) if is_unknown(v, unknown) => categories.len() + 1,
                        Some(ElementValue::Attr(a)) => match categories.binary_search(a) {
                            Ok(i) => i,
                            Err(_) => categories.len(),
                        },
                        Some(ElementValue::Number(n)) => {
                            return Err(EncodingError::WrongKind {
                                element: element.clone(),
                                expected: "categorical",
                                found: n.to_string(),
                            })
                        }
                    };
                    out[slot] = 1.0;
                }
                Block::Numeric { element, unknown, mean, scale } => match map.get(element) {
                    Some(ElementValue::Number(v)) if v.is_finite() => out[0] = (v - mean) / scale,
                    None => out[1] = 1.0,
                    Some(v) if is_unknown(v, unknown) => out[1] = 1.0,
                    Some(v) => {
                        return Err(EncodingError::WrongKind {
                            element: element.clone(),
                            expected: "numeric",
                            found: v.to_string(),
                        })
                    }
                },
                Block::SpeedOverLimit { mean, scale } => match speed_over_limit(map) {
                    Some(d) => out[0] = (d - mean) / scale,
                    None => out[1] = 1.0,
                },
                Block::TimeOfDay => {
                    let bucket = map.get(ids::HOUR).and_then(ElementValue::as_number).and_then(time_bucket);
                    out[bucket.unwrap_or(TIME_BUCKETS.len())] = 1.0;
                }
            }
        }
        Ok(FeatureVector { values, fingerprint: self.fingerprint.clone() })
    }

    pub fn encode_scene(&self, scene: &super::Scene) -> Result<FeatureVector, EncodingError> {
        self.encode(&scene.causal_map())
    }
}

/// `travel_speed - speed_limit` when both are known numbers.
pub fn speed_over_limit(map: &BTreeMap<String, ElementValue>) -> Option<f64> {
    let travel = map.get(ids::TRAVEL_SPEED)?.as_number()?;
    let limit = map.get(ids::SPEED_LIMIT)?.as_number()?;
    Some(travel - limit)
}

impl<'de> Deserialize<'de> for EncodingSchema {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            blocks: Vec<Block>,
        }
        Ok(EncodingSchema::from_blocks(Raw::deserialize(d)?.blocks))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn specs() -> Vec<ElementSpec> {
        vec![
            ElementSpec::categorical(ids::LIGHT),
            ElementSpec::categorical(ids::ATMOSPHERIC),
            ElementSpec::numeric(ids::TRAVEL_SPEED),
            ElementSpec::numeric(ids::SPEED_LIMIT),
            ElementSpec::numeric(ids::HOUR),
        ]
    }

    fn case(light: &str, atmos: &str, travel: f64, limit: f64, hour: f64) -> BTreeMap<String, ElementValue> {
        BTreeMap::from([
            (ids::LIGHT.to_string(), ElementValue::attr(light)),
            (ids::ATMOSPHERIC.to_string(), ElementValue::attr(atmos)),
            (ids::TRAVEL_SPEED.to_string(), ElementValue::Number(travel)),
            (ids::SPEED_LIMIT.to_string(), ElementValue::Number(limit)),
            (ids::HOUR.to_string(), ElementValue::Number(hour)),
        ])
    }

    fn schema() -> EncodingSchema {
        let train = [
            case("light_daylight", "atmos_clear", 50.0, 55.0, 12.0),
            case("light_dark_not_lighted", "atmos_rain", 70.0, 55.0, 23.0),
            case("light_dusk", "atmos_clear", 30.0, 25.0, 19.0),
        ];
        EncodingSchema::fit(&specs(), train.iter(), 8)
    }

    #[test]
    fn deterministic_and_fingerprinted() {
        let s = schema();
        let c = case("light_daylight", "atmos_clear", 50.0, 55.0, 12.0);
        let a = s.encode(&c).unwrap();
        let b = s.encode(&c).unwrap();
        assert_eq!(a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(a.values.len(), s.dimension());
        assert_eq!(a.fingerprint, schema().fingerprint());
        let json = serde_json::to_string(&s).unwrap();
        let back: EncodingSchema = serde_json::from_str(&json).unwrap();
        assert_eq!(back.fingerprint(), s.fingerprint());
        assert!(a.ensure_fingerprint("other").is_err());
    }

    #[test]
    fn unknown_atmosphere_sets_only_unknown_slot() {
        let s = schema();
        let v = s.encode(&case("light_daylight", "atmospheric_conditions_unknown", 50.0, 55.0, 12.0)).unwrap();
        let r = s.block_range(ids::ATMOSPHERIC).unwrap();
        let block = &v.values[r];
        assert_eq!(block.last(), Some(&1.0));
        assert!(block[..block.len() - 1].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn derived_features() {
        let s = schema();
        let diff = s.block_range(ids::SPEED_OVER_LIMIT).unwrap();
        let Block::SpeedOverLimit { mean, scale } = s.blocks()[5] else { panic!() };
        let v = s.encode(&case("light_daylight", "atmos_clear", 70.0, 55.0, 12.0)).unwrap();
        assert!((v.values[diff.start] * scale + mean - 15.0).abs() < 1e-9);
        assert_eq!(v.values[diff.start + 1], 0.0);

        let mut m = case("light_daylight", "atmos_clear", 0.0, 55.0, 3.0);
        m.insert(ids::TRAVEL_SPEED.into(), ElementValue::attr("travel_speed_unknown"));
        let v = s.encode(&m).unwrap();
        assert_eq!(&v.values[diff.clone()], &[0.0, 1.0]);
        let tod = s.block_range(ids::TIME_OF_DAY).unwrap();
        assert_eq!(&v.values[tod], &[1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn time_buckets() {
        assert_eq!(time_bucket(0.0), Some(0));
        assert_eq!(time_bucket(5.0), Some(1));
        assert_eq!(time_bucket(12.0), Some(2));
        assert_eq!(time_bucket(20.0), Some(3));
        assert_eq!(time_bucket(22.0), Some(0));
        assert_eq!(time_bucket(99.0), None);
    }

    #[test]
    fn mismatches_name_the_element() {
        let s = schema();
        let mut m = case("light_daylight", "atmos_clear", 50.0, 55.0, 12.0);
        m.insert("no_such_element".into(), ElementValue::attr("x"));
        assert_eq!(s.encode(&m), Err(EncodingError::UnknownElement("no_such_element".into())));
        let mut m = case("light_daylight", "atmos_clear", 50.0, 55.0, 12.0);
        m.insert(ids::LIGHT.into(), ElementValue::Number(3.0));
        assert!(matches!(s.encode(&m), Err(EncodingError::WrongKind { element, .. }) if element == ids::LIGHT));
    }

    #[test]
    fn rare_categories_fold_into_other() {
        let train: Vec<_> = ["a", "a", "b", "c"].iter().map(|l| case(l, "atmos_clear", 1.0, 1.0, 1.0)).collect();
        let s = EncodingSchema::fit(&specs(), train.iter(), 1);
        let r = s.block_range(ids::LIGHT).unwrap();
        assert_eq!(r.len(), 3);
        let v = s.encode(&case("c", "atmos_clear", 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(&v.values[r], &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn shipped_catalog_schema_covers_causal_elements() {
        let cat = ElementCatalog::builtin();
        let specs = ElementSpec::from_catalog(&cat);
        let s = EncodingSchema::fit(&specs, std::iter::empty(), 16);
        for e in cat.causal_entries() {
            assert!(s.covers(&e.id), "{}", e.id);
        }
        assert!(s.covers(ids::SPEED_OVER_LIMIT) && s.covers(ids::TIME_OF_DAY));
    }

    proptest! {
        #[test]
        fn changing_one_category_touches_only_its_block(
            l1 in 0usize..4, l2 in 0usize..4, atmos in 0usize..3, travel in 0.0f64..100.0, hour in 0.0f64..24.0,
        ) {
            let lights = ["light_daylight", "light_dark_not_lighted", "light_dusk", "light_unseen"];
            let atmoses = ["atmos_clear", "atmos_rain", "atmospheric_conditions_unknown"];
            let s = schema();
            let a = s.encode(&case(lights[l1], atmoses[atmos], travel, 55.0, hour)).unwrap();
            let b = s.encode(&case(lights[l2], atmoses[atmos], travel, 55.0, hour)).unwrap();
            let r = s.block_range(ids::LIGHT).unwrap();
            for i in 0..a.values.len() {
                if !r.contains(&i) {
                    prop_assert_eq!(a.values[i].to_bits(), b.values[i].to_bits());
                }
            }
            prop_assert_eq!(a.values[r.clone()].iter().sum::<f64>(), 1.0);
        }
    }
}
