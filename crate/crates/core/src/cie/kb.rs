//! Triple store with set semantics, inverse closure and a predicate index.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::relation::{RelationCatalog, RelationDef};
use super::unify::{instantiate, match_key, predicate_key, unify, Binding};
use crate::scene::event::{is_variable, parse_event, Event};

const SEED_KB: &str = include_str!("../../data/kb/seed.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Handcrafted,
    Imported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeTriple {
    pub head: Event,
    pub relation: String,
    pub tail: Event,
    pub provenance: Provenance,
    pub source_tag: String,
    /// The tail event is a hazard in its own right.
    pub hazard: bool,
    /// Pre-crash trigger attributes the tail event realises.
    pub triggers: Vec<String>,
}

impl KnowledgeTriple {
    pub fn new(head: &str, relation: &str, tail: &str) -> Self {
        KnowledgeTriple {
            head: parse_event(head),
            relation: relation.into(),
            tail: parse_event(tail),
            provenance: Provenance::Handcrafted,
            source_tag: "kb".into(),
            hazard: false,
            triggers: Vec::new(),
        }
    }

    pub fn hazard(mut self) -> Self {
        self.hazard = true;
        self
    }

    pub fn source(mut self, tag: &str) -> Self {
        self.source_tag = tag.into();
        self
    }

    pub fn trigger(mut self, attr: &str) -> Self {
        self.triggers.push(attr.into());
        self
    }

    fn key(&self) -> (String, String, String) {
        (match_key(&self.head), self.relation.clone(), match_key(&self.tail))
    }

    /// One line of the triple file format.
    pub fn to_tsv(&self) -> String {
        let mut tags = Vec::new();
        if self.hazard {
            tags.push("hazard".to_string());
        }
        if self.provenance == Provenance::Imported {
            tags.push("imported".into());
        }
        tags.push(format!("source={}", self.source_tag));
        tags.extend(self.triggers.iter().map(|t| format!("trigger={t}")));
        format!("{}\t{}\t{}\t{}", self.head.normalized(), self.relation, self.tail.normalized(), tags.join(","))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum KbError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{}unknown relation `{relation}`", at(*.line))]
    UnknownRelation { line: Option<usize>, relation: String },
    #[error("{}event `{text}` has no recognisable verb", at(*.line))]
    BadEvent { line: Option<usize>, text: String },
    #[error("knowledge base i/o: {0}")]
    Io(String),
}

fn at(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

/// One side of a triple seen as a pattern for some relation: the head for
/// the triple's own relation, the tail for its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct View {
    triple: usize,
    inverse: bool,
}

#[derive(Debug, Clone, Default)]
struct RelationIndex {
    by_predicate: HashMap<String, Vec<View>>,
    /// Patterns whose predicate contains a variable.
    wildcard: Vec<View>,
    all: Vec<View>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inference {
    pub tail: Event,
    pub binding: Binding,
    pub triple: usize,
    /// Found through the inverse of the queried relation.
    pub inverse: bool,
    pub source_tag: String,
}

/// Immutable once shared; `add_triple` returns a new value.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    relations: RelationCatalog,
    triples: Vec<KnowledgeTriple>,
    keys: HashSet<(String, String, String)>,
    index: HashMap<String, RelationIndex>,
}

impl KnowledgeBase {
    pub fn new(relations: RelationCatalog) -> Self {
        KnowledgeBase { relations, ..Default::default() }
    }

    /// The shipped seed knowledge.
    pub fn seed() -> Self {
        Self::parse(SEED_KB).expect("shipped seed KB is valid")
    }

    pub fn load(path: &Path) -> Result<Self, KbError> {
        let text = std::fs::read_to_string(path).map_err(|e| KbError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parse the triple file format with the builtin relation catalog.
    pub fn parse(src: &str) -> Result<Self, KbError> {
        let mut kb = Self::new(RelationCatalog::builtin());
        for (i, raw) in src.lines().enumerate() {
            let line = i + 1;
            let text = raw.trim_end_matches('\r');
            if text.trim().is_empty() || text.trim_start().starts_with('#') {
                continue;
            }
            if let Some(rest) = text.trim().strip_prefix("@relation") {
                kb.parse_relation(rest, line)?;
                continue;
            }
            let fields: Vec<&str> = text.split('\t').map(str::trim).collect();
            if !(3..=4).contains(&fields.len()) {
                return Err(KbError::Syntax {
                    line,
                    message: format!("expected `head<TAB>relation<TAB>tail[<TAB>tags]`, found {} fields", fields.len()),
                });
            }
            let mut t = KnowledgeTriple::new(fields[0], fields[1], fields[2]);
            for tag in fields.get(3).into_iter().flat_map(|s| s.split(',')).map(str::trim).filter(|s| !s.is_empty()) {
                match tag.split_once('=') {
                    None if tag == "hazard" => t.hazard = true,
                    None if tag == "imported" => t.provenance = Provenance::Imported,
                    Some(("source", v)) => t.source_tag = v.trim().into(),
                    Some(("trigger", v)) => t.triggers.push(v.trim().into()),
                    _ => return Err(KbError::Syntax { line, message: format!("unknown tag `{tag}`") }),
                }
            }
            kb.insert_at(t, Some(line))?;
        }
        Ok(kb)
    }

    fn parse_relation(&mut self, rest: &str, line: usize) -> Result<(), KbError> {
        let mut words = rest.split_whitespace();
        let id = words.next().ok_or(KbError::Syntax { line, message: "`@relation` needs an id".into() })?;
        let mut def = RelationDef::new(id, false, "");
        for w in words {
            match w.split_once('=') {
                None if w == "temporal" => def.temporal = true,
                None if w == "undirected" => def.directed = false,
                Some(("inverse", inv)) => def.inverse = Some(inv.into()),
                _ => return Err(KbError::Syntax { line, message: format!("unknown relation option `{w}`") }),
            }
        }
        self.relations.register(def).map_err(|message| KbError::Syntax { line, message })
    }

    pub fn relations(&self) -> &RelationCatalog {
        &self.relations
    }

    pub fn register_relation(&mut self, def: RelationDef) -> Result<(), String> {
        self.relations.register(def)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[KnowledgeTriple] {
        &self.triples
    }

    pub fn triple(&self, i: usize) -> &KnowledgeTriple {
        &self.triples[i]
    }

    /// Copy-on-write insert.
    pub fn add_triple(&self, t: KnowledgeTriple) -> Result<Self, KbError> {
        let mut kb = self.clone();
        kb.insert(t)?;
        Ok(kb)
    }

    /// Returns `false` when an equal triple was already present; its
    /// hazard flag and trigger list absorb the new ones.
    pub fn insert(&mut self, t: KnowledgeTriple) -> Result<bool, KbError> {
        self.insert_at(t, None)
    }

    fn insert_at(&mut self, mut t: KnowledgeTriple, line: Option<usize>) -> Result<bool, KbError> {
        let rel = self
            .relations
            .resolve(&t.relation)
            .ok_or_else(|| KbError::UnknownRelation { line, relation: t.relation.clone() })?;
        t.relation = rel.id.clone();
        for e in [&t.head, &t.tail] {
            if e.low_confidence || e.normalized().is_empty() {
                return Err(KbError::BadEvent { line, text: e.raw_text.clone() });
            }
        }
        let key = t.key();
        if self.keys.contains(&key) {
            let existing = self.triples.iter_mut().find(|x| x.key() == key).expect("key set mirrors triples");
            existing.hazard |= t.hazard;
            for tr in t.triggers {
                if !existing.triggers.contains(&tr) {
                    existing.triggers.push(tr);
                }
            }
            return Ok(false);
        }
        let idx = self.triples.len();
        let inverse = self.relations.inverse_of(&t.relation).map(str::to_string);
        self.index_view(&t.relation, &t.head, View { triple: idx, inverse: false });
        if let Some(inv) = inverse {
            self.index_view(&inv, &t.tail, View { triple: idx, inverse: true });
        }
        self.keys.insert(key);
        self.triples.push(t);
        Ok(true)
    }

    fn index_view(&mut self, relation: &str, pattern: &Event, view: View) {
        let ri = self.index.entry(relation.to_string()).or_default();
        ri.all.push(view);
        if pattern.predicate_tokens().iter().any(|t| is_variable(t)) {
            ri.wildcard.push(view);
        } else {
            ri.by_predicate.entry(predicate_key(pattern)).or_default().push(view);
        }
    }

    fn view_parts(&self, v: View) -> (&Event, &Event) {
        let t = &self.triples[v.triple];
        if v.inverse {
            (&t.tail, &t.head)
        } else {
            (&t.head, &t.tail)
        }
    }

    fn resolve_relation(&self, relation: &str) -> Result<String, KbError> {
        self.relations
            .resolve(relation)
            .map(|r| r.id.clone())
            .ok_or_else(|| KbError::UnknownRelation { line: None, relation: relation.into() })
    }

    /// Tails of every triple whose head unifies with `query` under
    /// `relation`, including inverse-closure hits, ordered by source tag
    /// then tail text.
    pub fn infer(&self, query: &Event, relation: &str) -> Result<Vec<Inference>, KbError> {
        let rel = self.resolve_relation(relation)?;
        let Some(ri) = self.index.get(&rel) else {
            return Ok(Vec::new());
        };
        let candidates: Vec<View> = if query.low_confidence {
            ri.all.clone()
        } else {
            let exact = ri.by_predicate.get(&predicate_key(query)).into_iter().flatten();
            exact.chain(&ri.wildcard).copied().collect()
        };
        Ok(self.collect(query, candidates))
    }

    /// Reference implementation of `infer` by linear scan, no index.
    pub fn infer_scan(&self, query: &Event, relation: &str) -> Result<Vec<Inference>, KbError> {
        let rel = self.resolve_relation(relation)?;
        let inverse = self.relations.inverse_of(&rel);
        let mut views = Vec::new();
        for (i, t) in self.triples.iter().enumerate() {
            if t.relation == rel {
                views.push(View { triple: i, inverse: false });
            }
            if inverse == Some(t.relation.as_str()) {
                views.push(View { triple: i, inverse: true });
            }
        }
        Ok(self.collect(query, views))
    }

    fn collect(&self, query: &Event, views: Vec<View>) -> Vec<Inference> {
        let mut out: Vec<Inference> = views
            .into_iter()
            .filter_map(|v| {
                let (pattern, tail) = self.view_parts(v);
                let binding = unify(pattern, query)?;
                Some(Inference {
                    tail: instantiate(tail, &binding),
                    binding,
                    triple: v.triple,
                    inverse: v.inverse,
                    source_tag: self.triples[v.triple].source_tag.clone(),
                })
            })
            .collect();
        out.sort_by(|a, b| {
            (a.source_tag.as_str(), a.tail.normalized(), a.triple, a.inverse).cmp(&(
                b.source_tag.as_str(),
                b.tail.normalized(),
                b.triple,
                b.inverse,
            ))
        });
        out
    }

    /// Tail patterns of hazard-tagged triples.
    pub fn hazard_events(&self) -> impl Iterator<Item = (usize, &Event)> {
        self.triples.iter().enumerate().filter(|(_, t)| t.hazard).map(|(i, t)| (i, &t.tail))
    }

    /// Tail patterns tagged as realising the trigger attribute `attr`.
    pub fn trigger_events<'a>(&'a self, attr: &'a str) -> impl Iterator<Item = (usize, &'a Event)> + 'a {
        self.triples
            .iter()
            .enumerate()
            .filter(move |(_, t)| t.triggers.iter().any(|x| x == attr))
            .map(|(i, t)| (i, &t.tail))
    }

    pub fn to_tsv(&self) -> String {
        self.triples.iter().map(|t| t.to_tsv() + "\n").collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cie::relation::{HAPPENS_AFTER, HAPPENS_BEFORE, X_WANT};

    #[test]
    fn empty_file_gives_empty_kb() {
        let kb = KnowledgeBase::parse("# nothing\n\n").unwrap();
        assert!(kb.is_empty());
        assert!(kb.infer(&parse_event("a car hits a person"), HAPPENS_AFTER).unwrap().is_empty());
    }

    #[test]
    fn duplicates_are_idempotent() {
        let kb = KnowledgeBase::default();
        let t = KnowledgeTriple::new("a car stops", HAPPENS_AFTER, "a bus hits the car");
        let kb = kb.add_triple(t.clone()).unwrap();
        let kb2 = kb.add_triple(t.clone().hazard()).unwrap();
        assert_eq!(kb2.len(), 1);
        assert!(kb2.triple(0).hazard);
        assert!(!kb.triple(0).hazard, "copy-on-write leaves the original untouched");
        let articles = KnowledgeTriple::new("the car stops", HAPPENS_AFTER, "a bus hits a car");
        assert_eq!(kb2.add_triple(articles).unwrap().len(), 1);
    }

    #[test]
    fn inverse_closure() {
        let kb = KnowledgeBase::default()
            .add_triple(KnowledgeTriple::new("a ball rolls into the road", HAPPENS_BEFORE, "a child kicks the ball"))
            .unwrap();
        let hits = kb.infer(&parse_event("a child kicks the ball"), HAPPENS_AFTER).unwrap();
        assert_eq!(hits.len(), 1);
        assert!(hits[0].inverse);
        assert_eq!(hits[0].tail.normalized(), "ball rolls into the road");
        assert!(kb.infer(&parse_event("a child kicks the ball"), X_WANT).unwrap().is_empty());
    }

    #[test]
    fn file_errors_carry_line_numbers() {
        let e = KnowledgeBase::parse("a car stops\tCauses\ta bus stops").unwrap_err();
        assert_eq!(e, KbError::UnknownRelation { line: Some(1), relation: "Causes".into() });
        let e = KnowledgeBase::parse("# c\na car stops\tHappensAfter\tbig red thing").unwrap_err();
        assert!(matches!(e, KbError::BadEvent { line: Some(2), .. }));
        let e = KnowledgeBase::parse("a car stops\tHappensAfter").unwrap_err();
        assert!(matches!(e, KbError::Syntax { line: 1, .. }));
        let e = KnowledgeBase::parse("a car stops\tHappensAfter\ta bus stops\tloud").unwrap_err();
        assert!(e.to_string().contains("unknown tag `loud`"));
    }

    #[test]
    fn relation_directive_and_tags() {
        let kb = KnowledgeBase::parse(
            "@relation Causes temporal inverse=CausedBy\n\
             a driver brakes hard\tCauses\ta car skids\thazard,imported,source=test,trigger=pc19_too_fast\n",
        )
        .unwrap();
        let t = kb.triple(0);
        assert!(t.hazard && t.provenance == Provenance::Imported && t.source_tag == "test");
        assert_eq!(t.triggers, vec!["pc19_too_fast"]);
        assert_eq!(kb.infer(&parse_event("a car skids"), "CausedBy").unwrap().len(), 1);
        let back = KnowledgeBase::parse(&("@relation Causes temporal inverse=CausedBy\n".to_string() + &kb.to_tsv())).unwrap();
        assert_eq!(back.to_tsv(), kb.to_tsv());
        assert_eq!(back.triple(0).key(), kb.triple(0).key());
    }

    #[test]
    fn unknown_query_relation_is_an_error() {
        assert!(KnowledgeBase::default().infer(&parse_event("a car stops"), "Nope").is_err());
    }
}
