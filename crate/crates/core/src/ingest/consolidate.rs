use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::catalog::{CatalogEntry, ElementCatalog, ElementGroup, Measure, Resolution};
use super::raw::{IngestIssue, RawCase, Row};
use crate::element::{ids, ElementValue};
use crate::ere::severity::{binary_severity, compute_csi, severity_level, SeverityCounts, SeverityLevel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectElements {
    pub crash_type: String,
    /// Categorical effect elements (crash type, harmful events, rollover...).
    pub attributes: BTreeMap<String, String>,
    pub counts: SeverityCounts,
}

/// One crash case expressed in canonical, year-independent terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsolidatedCase {
    pub case_id: String,
    pub year: u16,
    pub causal: BTreeMap<String, ElementValue>,
    pub effects: EffectElements,
    pub csi: u64,
    pub severity_level: SeverityLevel,
    pub binary_severity: u8,
}

impl ConsolidatedCase {
    /// Build a case from already-canonical parts; labels are derived from the counts.
    pub fn from_parts(
        case_id: impl Into<String>,
        year: u16,
        causal: BTreeMap<String, ElementValue>,
        crash_type: impl Into<String>,
        counts: SeverityCounts,
    ) -> Self {
        let crash_type = crash_type.into();
        let mut attributes = BTreeMap::new();
        attributes.insert(ids::CRASH_TYPE.to_string(), crash_type.clone());
        let csi = compute_csi(&counts);
        let level = severity_level(csi);
        ConsolidatedCase {
            case_id: case_id.into(),
            year,
            causal,
            effects: EffectElements { crash_type, attributes, counts },
            csi,
            severity_level: level,
            binary_severity: binary_severity(level),
        }
    }

    /// The pre-crash critical event, used as the case's trigger event.
    pub fn trigger_event(&self) -> Option<&str> {
        self.causal.get(ids::TRIGGER_EVENT).and_then(ElementValue::as_attr)
    }
}

/// Normalise one raw case. Never fails: unresolvable codes become the
/// element's unknown attribute and are reported as catalog gaps.
pub fn consolidate(raw: &RawCase, catalog: &ElementCatalog) -> (ConsolidatedCase, Vec<IngestIssue>) {
    let mut issues = Vec::new();
    let mut causal = BTreeMap::new();
    let mut attributes = BTreeMap::new();
    let mut counts = SeverityCounts::default();

    for entry in catalog.entries() {
        let Some(locator) = entry.locator_for(raw.year) else {
            if entry.group.is_causal() {
                causal.insert(entry.id.clone(), entry.unknown_value());
            } else if entry.measure.is_none() {
                attributes.insert(entry.id.clone(), entry.unknown.id.clone());
            }
            continue;
        };
        let rows: Vec<&Row> = raw
            .rows(locator.level)
            .iter()
            .filter(|r| r.get(&locator.column).is_some())
            .collect();
        let mut resolve = |row: &Row| {
            let cell = row.get(&locator.column).unwrap_or_default();
            let res = catalog.resolve(entry, raw.year, cell);
            if res == Resolution::Gap {
                issues.push(IngestIssue::CatalogGap {
                    year: raw.year,
                    case_id: raw.case_id.clone(),
                    element: entry.id.clone(),
                    locator: locator.code.clone(),
                    raw_value: cell.to_string(),
                });
            }
            res
        };
        let resolved: Vec<Resolution> = rows.iter().map(|r| resolve(r)).collect();

        match (entry.group, entry.measure) {
            (ElementGroup::Effect, Some(measure)) => {
                let n = measure_count(entry, &resolved);
                *slot(&mut counts, measure) = n;
                attributes.insert(entry.id.clone(), first_known(entry, &resolved).to_string());
            }
            (ElementGroup::Effect, None) => {
                attributes.insert(entry.id.clone(), first_known(entry, &resolved).to_string());
            }
            _ => {
                let value = resolved
                    .iter()
                    .find_map(|r| match r {
                        Resolution::Value(v) => Some(v.clone()),
                        _ => None,
                    })
                    .unwrap_or_else(|| entry.unknown_value());
                causal.insert(entry.id.clone(), value);
            }
        }
    }

    let crash_type = attributes
        .get(ids::CRASH_TYPE)
        .cloned()
        .or_else(|| catalog.entry(ids::CRASH_TYPE).map(|e| e.unknown.id.clone()))
        .unwrap_or_else(|| "unknown".to_string());
    let csi = compute_csi(&counts);
    let level = severity_level(csi);
    let case = ConsolidatedCase {
        case_id: raw.case_id.clone(),
        year: raw.year,
        causal,
        effects: EffectElements { crash_type, attributes, counts },
        csi,
        severity_level: level,
        binary_severity: binary_severity(level),
    };
    (case, issues)
}

/// Consolidate many cases in parallel; output order follows input order.
pub fn consolidate_all(raws: &[RawCase], catalog: &ElementCatalog) -> (Vec<ConsolidatedCase>, Vec<IngestIssue>) {
    let results: Vec<_> = raws.par_iter().map(|r| consolidate(r, catalog)).collect();
    let mut cases = Vec::with_capacity(results.len());
    let mut issues = Vec::new();
    for (case, mut i) in results {
        cases.push(case);
        issues.append(&mut i);
    }
    (cases, issues)
}

fn first_known<'a>(entry: &'a CatalogEntry, resolved: &'a [Resolution]) -> std::borrow::Cow<'a, str> {
    for r in resolved {
        if let Resolution::Value(v) = r {
            return match v {
                ElementValue::Attr(a) => a.as_str().into(),
                ElementValue::Number(n) => n.to_string().into(),
            };
        }
    }
    entry.unknown.id.as_str().into()
}

fn measure_count(entry: &CatalogEntry, resolved: &[Resolution]) -> u32 {
    if entry.counted.is_empty() {
        // Reported-number measures: sum the known values.
        let total: f64 = resolved
            .iter()
            .filter_map(|r| match r {
                Resolution::Value(ElementValue::Number(n)) if *n >= 0.0 => Some(*n),
                _ => None,
            })
            .sum();
        total.round().min(f64::from(u32::MAX)) as u32
    } else {
        let counted = resolved
            .iter()
            .filter(|r| match r {
                Resolution::Value(ElementValue::Attr(a)) => entry.counted.contains(a),
                Resolution::Unknown => entry.counted.contains(&entry.unknown.id),
                _ => false,
            })
            .count();
        u32::try_from(counted).unwrap_or(u32::MAX)
    }
}

fn slot(counts: &mut SeverityCounts, m: Measure) -> &mut u32 {
    match m {
        Measure::A => &mut counts.a,
        Measure::B => &mut counts.b,
        Measure::C => &mut counts.c,
        Measure::D => &mut counts.d,
        Measure::E => &mut counts.e,
        Measure::F => &mut counts.f,
        Measure::G => &mut counts.g,
    }
}
