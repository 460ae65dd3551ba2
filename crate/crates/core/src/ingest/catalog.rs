//! Year-aware element catalog.
//!
//! The catalog is plain text so that a new data year only needs new catalog
//! lines. Grammar, one directive per line (`#` starts a comment):
//!
//! ```text
//! case_id years=1975..2022 [level=CRASH] column=ST_CASE[|CASENUM]
//! element <id> group=<scenery|trigger|driving_status|effect> [type=<categorical|code|numeric>]
//!         [measure=<a..g>] [count=<attr>,<attr>] [unknown_values=<x>,<y>] [label="..."]
//!   unknown <attr_id> "label"
//!   years=A..B level=<CRASH|VEHICLE|PERSON|EVENT> locator=<CODE> [column=<CSV column>]
//!   years=A..B code=N -> <attr_id> "label"
//! ```
//!
//! Locator and attribute lines attach to the most recent `element`.
//! `categorical` elements resolve only explicitly mapped codes, `code`
//! elements fall back to `<id>:<code>` for unmapped codes and `numeric`
//! elements fall back to the raw number. Explicit mappings always win, which
//! is how sentinel codes such as 998/999 are routed to the unknown attribute;
//! `unknown_values` covers non-integer sentinels of numeric elements.
//! Alternative case id columns are separated by `|`; the first one present
//! in a file's header is used.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::element::{ElementValue, FileLevel, YearRange};

#[derive(Debug, Error, PartialEq)]
pub enum CatalogError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("element `{element}`: {what} year ranges {first} and {second} overlap")]
    OverlappingYears {
        element: String,
        what: String,
        first: YearRange,
        second: YearRange,
    },
    #[error("line {line}: duplicate canonical element id `{id}`")]
    DuplicateElement { line: usize, id: String },
    #[error("element `{0}` declares no unknown attribute")]
    MissingUnknown(String),
    #[error("element `{element}` counts attribute `{attr}` that it never declares")]
    UndeclaredCountAttr { element: String, attr: String },
    #[error("i/o error reading catalog: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementGroup {
    Scenery,
    Trigger,
    DrivingStatus,
    Effect,
}

impl ElementGroup {
    pub fn is_causal(self) -> bool {
        !matches!(self, ElementGroup::Effect)
    }
}

impl FromStr for ElementGroup {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scenery" => Ok(ElementGroup::Scenery),
            "trigger" => Ok(ElementGroup::Trigger),
            "driving_status" => Ok(ElementGroup::DrivingStatus),
            "effect" => Ok(ElementGroup::Effect),
            other => Err(format!("unknown element group `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Categorical,
    Code,
    Numeric,
}

impl FromStr for ElementKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "categorical" => Ok(ElementKind::Categorical),
            "code" => Ok(ElementKind::Code),
            "numeric" => Ok(ElementKind::Numeric),
            other => Err(format!("unknown element type `{other}`")),
        }
    }
}

/// Which severity count an effect element feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
}

impl FromStr for Measure {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "a" => Measure::A,
            "b" => Measure::B,
            "c" => Measure::C,
            "d" => Measure::D,
            "e" => Measure::E,
            "f" => Measure::F,
            "g" => Measure::G,
            other => return Err(format!("measure must be one of a..g, got `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Locator {
    pub years: YearRange,
    pub level: FileLevel,
    pub code: String,
    /// Upper-cased CSV column name.
    pub column: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeMapping {
    pub years: YearRange,
    pub raw_code: i64,
    pub attribute: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalAttribute {
    pub id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: String,
    pub label: String,
    pub group: ElementGroup,
    pub kind: ElementKind,
    pub measure: Option<Measure>,
    pub counted: BTreeSet<String>,
    pub unknown_values: Vec<f64>,
    pub unknown: CanonicalAttribute,
    pub locators: Vec<Locator>,
    pub attributes: Vec<AttributeMapping>,
}

impl CatalogEntry {
    pub fn locator_for(&self, year: u16) -> Option<&Locator> {
        self.locators.iter().find(|l| l.years.contains(year))
    }

    pub fn mapping_for(&self, year: u16, raw_code: i64) -> Option<&AttributeMapping> {
        self.attributes
            .iter()
            .find(|m| m.raw_code == raw_code && m.years.contains(year))
    }

    /// Canonical attribute ids this element can produce from explicit
    /// mappings (including the unknown attribute), sorted.
    pub fn declared_attributes(&self) -> BTreeSet<&str> {
        let mut out: BTreeSet<&str> = self.attributes.iter().map(|m| m.attribute.as_str()).collect();
        out.insert(self.unknown.id.as_str());
        out
    }

    pub fn label_of(&self, attribute: &str) -> Option<&str> {
        if attribute == self.unknown.id {
            return Some(&self.unknown.label);
        }
        self.attributes
            .iter()
            .find(|m| m.attribute == attribute)
            .map(|m| m.label.as_str())
    }

    pub fn unknown_value(&self) -> ElementValue {
        ElementValue::Attr(self.unknown.id.clone())
    }

    pub fn is_unknown(&self, value: &ElementValue) -> bool {
        value.as_attr() == Some(self.unknown.id.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseIdRule {
    pub years: YearRange,
    pub level: Option<FileLevel>,
    /// Candidate column names, upper-cased, in preference order.
    pub columns: Vec<String>,
}

/// Outcome of resolving one raw cell against the catalog.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolution {
    Value(ElementValue),
    /// Blank cell or a code explicitly mapped to the unknown attribute.
    Unknown,
    /// A code the catalog has no mapping for in that year.
    Gap,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ElementCatalog {
    entries: Vec<CatalogEntry>,
    case_ids: Vec<CaseIdRule>,
    index: HashMap<String, usize>,
}

impl ElementCatalog {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| CatalogError::Io(format!("{}: {e}", path.as_ref().display())))?;
        text.parse()
    }

    /// The catalog shipped with this crate.
    pub fn builtin() -> Self {
        include_str!("../../data/catalog/fars_crss.catalog")
            .parse()
            .expect("shipped catalog parses")
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, id: &str) -> Option<&CatalogEntry> {
        self.index.get(id).map(|&i| &self.entries[i])
    }

    pub fn causal_entries(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.iter().filter(|e| e.group.is_causal())
    }

    pub fn case_id_rules(&self) -> &[CaseIdRule] {
        &self.case_ids
    }

    /// Years for which a case identifier column is declared.
    pub fn covers_year(&self, year: u16) -> bool {
        self.case_ids.iter().any(|r| r.years.contains(year))
    }

    /// Candidate case identifier columns for a file of `level` in `year`;
    /// a level-specific rule wins over a level-agnostic one.
    pub fn case_id_columns(&self, year: u16, level: FileLevel) -> Option<&[String]> {
        let matching = self.case_ids.iter().filter(|r| r.years.contains(year));
        let mut fallback = None;
        for rule in matching {
            match rule.level {
                Some(l) if l == level => return Some(&rule.columns),
                None => fallback = Some(rule.columns.as_slice()),
                _ => {}
            }
        }
        fallback
    }

    pub fn locator(&self, element: &str, year: u16) -> Option<&Locator> {
        self.entry(element)?.locator_for(year)
    }

    /// Canonical attribute for an integer code of an element in a year.
    pub fn resolve_code(&self, element: &str, year: u16, raw_code: i64) -> Option<&AttributeMapping> {
        self.entry(element)?.mapping_for(year, raw_code)
    }

    /// Resolve a raw CSV cell. Pure: the same inputs always give the same
    /// resolution.
    pub fn resolve(&self, entry: &CatalogEntry, year: u16, raw: &str) -> Resolution {
        let raw = raw.trim();
        if raw.is_empty() || raw == "." {
            return Resolution::Unknown;
        }
        let as_code = parse_code(raw);
        if let Some(code) = as_code {
            if let Some(m) = entry.mapping_for(year, code) {
                return if m.attribute == entry.unknown.id {
                    Resolution::Unknown
                } else {
                    Resolution::Value(ElementValue::Attr(m.attribute.clone()))
                };
            }
        }
        match entry.kind {
            ElementKind::Categorical => Resolution::Gap,
            ElementKind::Code => match as_code {
                Some(code) => Resolution::Value(ElementValue::Attr(format!("{}:{code}", entry.id))),
                None => Resolution::Value(ElementValue::Attr(format!("{}:{}", entry.id, raw.to_ascii_lowercase()))),
            },
            ElementKind::Numeric => match raw.parse::<f64>() {
                Ok(v) if entry.unknown_values.iter().any(|u| (u - v).abs() < 1e-9) => Resolution::Unknown,
                Ok(v) if v.is_finite() => Resolution::Value(ElementValue::Number(v)),
                _ => Resolution::Gap,
            },
        }
    }

    fn rebuild_index(&mut self) {
        self.index = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.clone(), i))
            .collect();
    }

    fn validate(&self) -> Result<(), CatalogError> {
        for e in &self.entries {
            check_disjoint(
                &e.id,
                "locator",
                e.locators.iter().map(|l| l.years).collect::<Vec<_>>(),
            )?;
            let mut by_code: HashMap<i64, Vec<YearRange>> = HashMap::new();
            for m in &e.attributes {
                by_code.entry(m.raw_code).or_default().push(m.years);
            }
            let mut codes: Vec<_> = by_code.into_iter().collect();
            codes.sort_by_key(|(c, _)| *c);
            for (code, ranges) in codes {
                check_disjoint(&e.id, &format!("code {code}"), ranges)?;
            }
            let declared = e.declared_attributes();
            for attr in &e.counted {
                if !declared.contains(attr.as_str()) {
                    return Err(CatalogError::UndeclaredCountAttr {
                        element: e.id.clone(),
                        attr: attr.clone(),
                    });
                }
            }
        }
        let mut by_level: HashMap<Option<FileLevel>, Vec<YearRange>> = HashMap::new();
        for r in &self.case_ids {
            by_level.entry(r.level).or_default().push(r.years);
        }
        let mut levels: Vec<_> = by_level.into_iter().collect();
        levels.sort_by_key(|(l, _)| *l);
        for (level, ranges) in levels {
            let what = match level {
                Some(l) => format!("case_id ({l})"),
                None => "case_id".to_string(),
            };
            check_disjoint("<case_id>", &what, ranges)?;
        }
        Ok(())
    }
}

fn parse_code(raw: &str) -> Option<i64> {
    if let Ok(v) = raw.parse::<i64>() {
        return Some(v);
    }
    // Some releases write integer codes as "55.0".
    let f: f64 = raw.parse().ok()?;
    (f.fract() == 0.0 && f.abs() < 1e15).then_some(f as i64)
}

fn check_disjoint(element: &str, what: &str, mut ranges: Vec<YearRange>) -> Result<(), CatalogError> {
    ranges.sort();
    for pair in ranges.windows(2) {
        if pair[0].overlaps(&pair[1]) {
            return Err(CatalogError::OverlappingYears {
                element: element.to_string(),
                what: what.to_string(),
                first: pair[0],
                second: pair[1],
            });
        }
    }
    Ok(())
}

impl FromStr for ElementCatalog {
    type Err = CatalogError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut catalog = ElementCatalog::default();
        let mut pending: Option<(usize, PartialEntry)> = None;
        let mut seen = HashMap::new();

        let finish = |pending: Option<(usize, PartialEntry)>,
                      catalog: &mut ElementCatalog|
         -> Result<(), CatalogError> {
            if let Some((_, p)) = pending {
                let unknown = p.unknown.ok_or_else(|| CatalogError::MissingUnknown(p.id.clone()))?;
                catalog.entries.push(CatalogEntry {
                    label: p.label.unwrap_or_else(|| p.id.clone()),
                    id: p.id,
                    group: p.group,
                    kind: p.kind,
                    measure: p.measure,
                    counted: p.counted,
                    unknown_values: p.unknown_values,
                    unknown,
                    locators: p.locators,
                    attributes: p.attributes,
                });
            }
            Ok(())
        };

        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(raw_line).trim();
            if line.is_empty() {
                continue;
            }
            let tokens = tokenize(line).map_err(|message| CatalogError::Parse { line: line_no, message })?;
            let err = |message: String| CatalogError::Parse { line: line_no, message };
            let head = tokens[0].text.as_str();
            match head {
                "case_id" if !tokens[0].quoted => {
                    let kv = key_values(&tokens[1..]).map_err(err)?;
                    let years = kv.require("years").map_err(err)?.parse().map_err(err)?;
                    let level = kv.get("level").map(str::parse).transpose().map_err(err)?;
                    let columns: Vec<String> = kv
                        .require("column")
                        .map_err(err)?
                        .split('|')
                        .map(|c| c.trim().to_ascii_uppercase())
                        .filter(|c| !c.is_empty())
                        .collect();
                    if columns.is_empty() {
                        return Err(err("case_id needs at least one column".into()));
                    }
                    kv.reject_unknown(&["years", "level", "column"]).map_err(err)?;
                    catalog.case_ids.push(CaseIdRule { years, level, columns });
                }
                "element" if !tokens[0].quoted => {
                    finish(pending.take(), &mut catalog)?;
                    let id = tokens
                        .get(1)
                        .filter(|t| !t.quoted && !t.text.contains('='))
                        .ok_or_else(|| err("`element` needs an id".into()))?
                        .text
                        .clone();
                    if seen.insert(id.clone(), line_no).is_some() {
                        return Err(CatalogError::DuplicateElement { line: line_no, id });
                    }
                    let kv = key_values(&tokens[2..]).map_err(err)?;
                    kv.reject_unknown(&["group", "type", "measure", "count", "unknown_values", "label"])
                        .map_err(err)?;
                    let group = kv.require("group").map_err(err)?.parse().map_err(err)?;
                    let kind = kv
                        .get("type")
                        .map(str::parse)
                        .transpose()
                        .map_err(err)?
                        .unwrap_or(ElementKind::Categorical);
                    let measure = kv.get("measure").map(str::parse).transpose().map_err(err)?;
                    let counted = kv
                        .get("count")
                        .map(|c| c.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
                        .unwrap_or_default();
                    let unknown_values = kv
                        .get("unknown_values")
                        .map(|v| {
                            v.split(',')
                                .map(|x| x.trim().parse::<f64>().map_err(|_| format!("bad unknown value `{x}`")))
                                .collect::<Result<Vec<_>, _>>()
                        })
                        .transpose()
                        .map_err(err)?
                        .unwrap_or_default();
                    pending = Some((
                        line_no,
                        PartialEntry {
                            id,
                            label: kv.get("label").map(str::to_string),
                            group,
                            kind,
                            measure,
                            counted,
                            unknown_values,
                            unknown: None,
                            locators: Vec::new(),
                            attributes: Vec::new(),
                        },
                    ));
                }
                "unknown" if !tokens[0].quoted => {
                    let (_, p) = pending
                        .as_mut()
                        .ok_or_else(|| err("`unknown` outside an element".into()))?;
                    if tokens.len() != 3 || tokens[1].quoted || !tokens[2].quoted {
                        return Err(err("expected: unknown <attr_id> \"label\"".into()));
                    }
                    if p.unknown.is_some() {
                        return Err(err(format!("element `{}` declares unknown twice", p.id)));
                    }
                    p.unknown = Some(CanonicalAttribute {
                        id: tokens[1].text.clone(),
                        label: tokens[2].text.clone(),
                    });
                }
                _ if head.starts_with("years=") => {
                    let (_, p) = pending
                        .as_mut()
                        .ok_or_else(|| err("mapping line outside an element".into()))?;
                    if let Some(arrow) = tokens.iter().position(|t| t.text == "->" && !t.quoted) {
                        let kv = key_values(&tokens[..arrow]).map_err(err)?;
                        kv.reject_unknown(&["years", "code"]).map_err(err)?;
                        let years = kv.require("years").map_err(err)?.parse().map_err(err)?;
                        let raw_code = kv
                            .require("code")
                            .map_err(err)?
                            .parse::<i64>()
                            .map_err(|_| err("code must be an integer".into()))?;
                        let rest = &tokens[arrow + 1..];
                        let (attribute, label) = match rest {
                            [a] if !a.quoted => (a.text.clone(), a.text.clone()),
                            [a, l] if !a.quoted && l.quoted => (a.text.clone(), l.text.clone()),
                            _ => return Err(err("expected `-> attr_id \"label\"`".into())),
                        };
                        p.attributes.push(AttributeMapping { years, raw_code, attribute, label });
                    } else {
                        let kv = key_values(&tokens).map_err(err)?;
                        kv.reject_unknown(&["years", "level", "locator", "column"]).map_err(err)?;
                        let years = kv.require("years").map_err(err)?.parse().map_err(err)?;
                        let level = kv.require("level").map_err(err)?.parse().map_err(err)?;
                        let code = kv.require("locator").map_err(err)?.to_string();
                        let column = kv.get("column").unwrap_or(&code).to_ascii_uppercase();
                        p.locators.push(Locator { years, level, code, column });
                    }
                }
                other => return Err(err(format!("unrecognised directive `{other}`"))),
            }
        }
        finish(pending.take(), &mut catalog)?;
        catalog.rebuild_index();
        catalog.validate()?;
        Ok(catalog)
    }
}

struct PartialEntry {
    id: String,
    label: Option<String>,
    group: ElementGroup,
    kind: ElementKind,
    measure: Option<Measure>,
    counted: BTreeSet<String>,
    unknown_values: Vec<f64>,
    unknown: Option<CanonicalAttribute>,
    locators: Vec<Locator>,
    attributes: Vec<AttributeMapping>,
}

#[derive(Debug)]
struct Token {
    text: String,
    quoted: bool,
}

fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

/// Whitespace tokenizer honouring double quotes. A token is `quoted` only
/// when it starts with a quote, so `label="a b"` stays a key/value token.
fn tokenize(line: &str) -> Result<Vec<Token>, String> {
    let mut tokens = Vec::new();
    let mut chars = line.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let quoted = c == '"';
        let mut text = String::new();
        while let Some(&c) = chars.peek() {
            if c.is_whitespace() {
                break;
            }
            chars.next();
            if c == '"' {
                let mut closed = false;
                for q in chars.by_ref() {
                    if q == '"' {
                        closed = true;
                        break;
                    }
                    text.push(q);
                }
                if !closed {
                    return Err("unterminated quote".into());
                }
            } else {
                text.push(c);
            }
        }
        tokens.push(Token { text, quoted });
    }
    if tokens.is_empty() {
        return Err("empty line".into());
    }
    Ok(tokens)
}

struct KeyValues(Vec<(String, String)>);

impl KeyValues {
    fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn require(&self, key: &str) -> Result<&str, String> {
        self.get(key).ok_or_else(|| format!("missing `{key}=`"))
    }

    fn reject_unknown(&self, allowed: &[&str]) -> Result<(), String> {
        match self.0.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            Some((k, _)) => Err(format!("unexpected key `{k}`")),
            None => Ok(()),
        }
    }
}

fn key_values(tokens: &[Token]) -> Result<KeyValues, String> {
    let mut out = Vec::new();
    for t in tokens {
        let (k, v) = t
            .text
            .split_once('=')
            .filter(|_| !t.quoted)
            .ok_or_else(|| format!("expected key=value, found `{}`", t.text))?;
        if out.iter().any(|(seen, _): &(String, String)| seen == k) {
            return Err(format!("key `{k}` given twice"));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(KeyValues(out))
}

impl fmt::Display for ElementCatalog {
    /// Renders back into the catalog text format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.case_ids {
            write!(f, "case_id years={}", r.years)?;
            if let Some(l) = r.level {
                write!(f, " level={l}")?;
            }
            writeln!(f, " column={}", r.columns.join("|"))?;
        }
        for e in &self.entries {
            let group = match e.group {
                ElementGroup::Scenery => "scenery",
                ElementGroup::Trigger => "trigger",
                ElementGroup::DrivingStatus => "driving_status",
                ElementGroup::Effect => "effect",
            };
            let kind = match e.kind {
                ElementKind::Categorical => "categorical",
                ElementKind::Code => "code",
                ElementKind::Numeric => "numeric",
            };
            write!(f, "element {} group={group} type={kind}", e.id)?;
            if let Some(m) = e.measure {
                write!(f, " measure={}", serde_json::to_string(&m).unwrap_or_default().trim_matches('"'))?;
            }
            if !e.counted.is_empty() {
                write!(f, " count={}", e.counted.iter().cloned().collect::<Vec<_>>().join(","))?;
            }
            if !e.unknown_values.is_empty() {
                let vals: Vec<String> = e.unknown_values.iter().map(f64::to_string).collect();
                write!(f, " unknown_values={}", vals.join(","))?;
            }
            writeln!(f, " label=\"{}\"", e.label)?;
            writeln!(f, "  unknown {} \"{}\"", e.unknown.id, e.unknown.label)?;
            for l in &e.locators {
                writeln!(f, "  years={} level={} locator={} column={}", l.years, l.level, l.code, l.column)?;
            }
            for m in &e.attributes {
                writeln!(f, "  years={} code={} -> {} \"{}\"", m.years, m.raw_code, m.attribute, m.label)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HARM: &str = r#"
# sample
case_id years=1975..2030 column=ST_CASE
element first_harmful_event group=effect label="First Harmful Event"
  unknown fhe_unknown "Unknown"
  years=1975..2030 level=CRASH locator=C19 column=HARM_EV
  years=2005..2007 code=55 -> fhe_other_not_in_transport_mv "Other Not in Transport Motor Vehicle"
  years=2008..2030 code=55 -> fhe_mv_in_motion_outside_trafficway "Motor Vehicle in Motion Outside the Trafficway"
  years=1975..2030 code=99 -> fhe_unknown "Unknown"
element most_harmful_event group=effect
  unknown mhe_unknown "Unknown"
  years=1975..2021 level=VEHICLE locator=V33 column=M_HARM
  years=2022..2030 level=VEHICLE locator=V38 column=M_HARM
"#;

    #[test]
    fn code_meaning_drift_resolves_by_year() {
        let cat: ElementCatalog = HARM.parse().unwrap();
        let a = cat.resolve_code("first_harmful_event", 2006, 55).unwrap();
        let b = cat.resolve_code("first_harmful_event", 2010, 55).unwrap();
        assert_eq!(a.label, "Other Not in Transport Motor Vehicle");
        assert_eq!(b.label, "Motor Vehicle in Motion Outside the Trafficway");
        assert_ne!(a.attribute, b.attribute);
    }

    #[test]
    fn locator_change_keeps_canonical_element() {
        let cat: ElementCatalog = HARM.parse().unwrap();
        assert_eq!(cat.locator("most_harmful_event", 2021).unwrap().code, "V33");
        assert_eq!(cat.locator("most_harmful_event", 2022).unwrap().code, "V38");
    }

    #[test]
    fn empty_catalog_is_fine() {
        let cat: ElementCatalog = "".parse().unwrap();
        assert!(cat.is_empty());
        let cat: ElementCatalog = "# only a comment\n\n".parse().unwrap();
        assert!(cat.is_empty());
    }

    #[test]
    fn overlapping_locators_rejected() {
        let text = "element x group=scenery\n unknown x_u \"U\"\n years=2000..2010 level=CRASH locator=C1\n years=2010..2012 level=CRASH locator=C2\n";
        assert!(matches!(text.parse::<ElementCatalog>(), Err(CatalogError::OverlappingYears { .. })));
    }

    #[test]
    fn overlapping_attribute_codes_rejected() {
        let text = "element x group=scenery\n unknown x_u \"U\"\n years=2000..2010 code=1 -> a\n years=2005..2012 code=1 -> b\n";
        assert!(matches!(text.parse::<ElementCatalog>(), Err(CatalogError::OverlappingYears { .. })));
    }

    #[test]
    fn duplicate_element_rejected_with_line() {
        let text = "element x group=scenery\n unknown x_u \"U\"\nelement x group=scenery\n unknown x_u \"U\"\n";
        assert_eq!(
            text.parse::<ElementCatalog>(),
            Err(CatalogError::DuplicateElement { line: 3, id: "x".into() })
        );
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "case_id years=1975..2030 column=ST_CASE\nelement x group=nowhere\n";
        match text.parse::<ElementCatalog>() {
            Err(CatalogError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match "  years=2000..2001 code=1 -> a\n".parse::<ElementCatalog>() {
            Err(CatalogError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_unknown_rejected() {
        let text = "element x group=scenery\n years=2000..2010 level=CRASH locator=C1\n";
        assert_eq!(text.parse::<ElementCatalog>(), Err(CatalogError::MissingUnknown("x".into())));
    }

    #[test]
    fn resolution_by_kind() {
        let text = r#"
element speed group=driving_status type=numeric
  unknown speed_unknown "Unknown"
  years=2000..2030 level=VEHICLE locator=V25 column=TRAV_SP
  years=2000..2030 code=999 -> speed_unknown "Unknown"
element lat group=scenery type=numeric unknown_values=77.7777,99.9999
  unknown lat_unknown "Unknown"
  years=2000..2030 level=CRASH locator=C17A column=LATITUDE
element county group=scenery type=code
  unknown county_unknown "Unknown"
  years=2000..2030 level=CRASH locator=C6 column=COUNTY
element light group=scenery
  unknown light_unknown "Unknown"
  years=2000..2030 level=CRASH locator=C25 column=LGT_COND
  years=2000..2030 code=1 -> light_daylight "Daylight"
"#;
        let cat: ElementCatalog = text.parse().unwrap();
        let speed = cat.entry("speed").unwrap();
        assert_eq!(cat.resolve(speed, 2010, "70"), Resolution::Value(ElementValue::Number(70.0)));
        assert_eq!(cat.resolve(speed, 2010, "999"), Resolution::Unknown);
        assert_eq!(cat.resolve(speed, 2010, ""), Resolution::Unknown);
        let county = cat.entry("county").unwrap();
        assert_eq!(cat.resolve(county, 2010, "31"), Resolution::Value(ElementValue::attr("county:31")));
        assert_eq!(cat.resolve(county, 2010, "I-95"), Resolution::Value(ElementValue::attr("county:i-95")));
        let lat = cat.entry("lat").unwrap();
        assert_eq!(cat.resolve(lat, 2010, "77.7777"), Resolution::Unknown);
        assert_eq!(cat.resolve(lat, 2010, "40.5"), Resolution::Value(ElementValue::Number(40.5)));
        let light = cat.entry("light").unwrap();
        assert_eq!(cat.resolve(light, 2010, "1.0"), Resolution::Value(ElementValue::attr("light_daylight")));
        assert_eq!(cat.resolve(light, 2010, "7"), Resolution::Gap);
        assert_eq!(cat.resolve(light, 2010, "x"), Resolution::Gap);
        let again: ElementCatalog = cat.to_string().parse().unwrap();
        assert_eq!(again.entries(), cat.entries());
    }

    #[test]
    fn case_id_rules_prefer_level_specific() {
        let text = "case_id years=1975..2030 column=ST_CASE\ncase_id years=2016..2030 level=PERSON column=CASENUM|ST_CASE\n";
        let cat: ElementCatalog = text.parse().unwrap();
        assert_eq!(cat.case_id_columns(2020, FileLevel::Person).unwrap(), ["CASENUM", "ST_CASE"]);
        assert_eq!(cat.case_id_columns(2020, FileLevel::Crash).unwrap(), ["ST_CASE"]);
        assert!(cat.covers_year(1975));
        assert!(!cat.covers_year(1974));
    }

    #[test]
    fn display_round_trips() {
        let cat: ElementCatalog = HARM.parse().unwrap();
        let again: ElementCatalog = cat.to_string().parse().unwrap();
        assert_eq!(cat.entries(), again.entries());
        assert_eq!(cat.case_id_rules(), again.case_id_rules());
    }

    #[test]
    fn builtin_catalog_is_valid() {
        let cat = ElementCatalog::builtin();
        assert!(cat.entry("first_harmful_event").is_some());
        assert!(cat.entry("bus_use").is_some());
        assert!(cat.entry("jackknife").is_some());
        assert_ne!(cat.entry("bus_use").unwrap().id, cat.entry("jackknife").unwrap().id);
        for e in cat.entries() {
            assert!(!e.locators.is_empty(), "element {} has no locators", e.id);
        }
    }
}
