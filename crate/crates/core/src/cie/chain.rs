//! Breadth-first event chains over repeated inference.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::kb::{KbError, KnowledgeBase};
use super::unify::match_key;
use crate::scene::event::Event;

/// One inference step with the triple that justified it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainLink {
    pub from: String,
    pub relation: String,
    pub to: String,
    pub triple: usize,
    /// Taken through the inverse of `relation`.
    pub inverse: bool,
    pub source_tag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventChain {
    /// Start event first; `events.len() == evidence.len() + 1`.
    pub events: Vec<Event>,
    pub evidence: Vec<ChainLink>,
}

impl EventChain {
    pub fn hops(&self) -> usize {
        self.evidence.len()
    }

    pub fn terminal(&self) -> &Event {
        self.events.last().expect("a chain holds at least its start event")
    }
}

/// Every event reachable from `start` in at most `max_hops` steps, one
/// chain per event along its first-found shortest path. Events already
/// visited are not expanded again, which cuts cycles. Chains come out in
/// hop order, and within a hop in inference order.
pub fn chain(kb: &KnowledgeBase, start: &Event, relation: &str, max_hops: usize) -> Result<Vec<EventChain>, KbError> {
    let mut visited: HashSet<String> = HashSet::from([match_key(start)]);
    let mut frontier = vec![EventChain { events: vec![start.clone()], evidence: Vec::new() }];
    let mut out = Vec::new();
    for _ in 0..max_hops {
        let mut next = Vec::new();
        for c in &frontier {
            let from = c.terminal();
            for inf in kb.infer(from, relation)? {
                if !visited.insert(match_key(&inf.tail)) {
                    continue;
                }
                let mut grown = c.clone();
                grown.evidence.push(ChainLink {
                    from: from.normalized(),
                    relation: kb.triple(inf.triple).relation.clone(),
                    to: inf.tail.normalized(),
                    triple: inf.triple,
                    inverse: inf.inverse,
                    source_tag: inf.source_tag,
                });
                grown.events.push(inf.tail);
                next.push(grown);
            }
        }
        if next.is_empty() {
            break;
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    Ok(out)
}
