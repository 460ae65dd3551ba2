//! Registered relation ids and their inverses.

use serde::{Deserialize, Serialize};

pub const HAPPENS_BEFORE: &str = "HappensBefore";
pub const HAPPENS_AFTER: &str = "HappensAfter";
pub const X_WANT: &str = "XWant";
pub const X_NEED: &str = "XNeed";
pub const X_EFFECT: &str = "XEffect";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationDef {
    pub id: String,
    /// Undirected relations are their own inverse.
    pub directed: bool,
    pub temporal: bool,
    pub description: String,
    pub inverse: Option<String>,
}

impl RelationDef {
    pub fn new(id: &str, temporal: bool, description: &str) -> Self {
        RelationDef { id: id.into(), directed: true, temporal, description: description.into(), inverse: None }
    }
}

/// Invariant: ids are unique and every `inverse` names a registered
/// relation whose own `inverse` points back.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationCatalog {
    relations: Vec<RelationDef>,
}

impl Default for RelationCatalog {
    fn default() -> Self {
        Self::builtin()
    }
}

fn canonical(name: &str) -> String {
    name.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect()
}

impl RelationCatalog {
    pub fn empty() -> Self {
        RelationCatalog { relations: Vec::new() }
    }

    /// The two temporal relations as mutual inverses plus three intent relations.
    pub fn builtin() -> Self {
        let mut c = Self::empty();
        c.register_pair(
            RelationDef::new(HAPPENS_BEFORE, true, "the tail event happens before the head event"),
            RelationDef::new(HAPPENS_AFTER, true, "the tail event happens after the head event"),
        )
        .expect("builtin relations are distinct");
        for (id, d) in [
            (X_WANT, "what the head's subject wants next"),
            (X_NEED, "what the head's subject needed beforehand"),
            (X_EFFECT, "effect of the head event on its subject"),
        ] {
            c.register(RelationDef::new(id, false, d)).expect("builtin relations are distinct");
        }
        c
    }

    pub fn relations(&self) -> &[RelationDef] {
        &self.relations
    }

    /// Look up by id, ignoring case, spaces and underscores ("Happens Before").
    pub fn resolve(&self, name: &str) -> Option<&RelationDef> {
        let key = canonical(name);
        self.relations.iter().find(|r| canonical(&r.id) == key)
    }

    /// Id of the relation to scan on the other side of a triple.
    pub fn inverse_of(&self, id: &str) -> Option<&str> {
        let r = self.resolve(id)?;
        if r.directed {
            r.inverse.as_deref()
        } else {
            Some(&r.id)
        }
    }

    pub fn register(&mut self, mut def: RelationDef) -> Result<(), String> {
        if self.resolve(&def.id).is_some() {
            return Err(format!("relation `{}` is already registered", def.id));
        }
        if let Some(inv) = def.inverse.take() {
            return self.register_pair(def, RelationDef::new(&inv, false, ""));
        }
        self.relations.push(def);
        Ok(())
    }

    /// Register two relations as mutual inverses. The second one inherits
    /// the first's temporal flag.
    pub fn register_pair(&mut self, mut a: RelationDef, mut b: RelationDef) -> Result<(), String> {
        if canonical(&a.id) == canonical(&b.id) {
            return Err(format!("relation `{}` cannot be its own directed inverse", a.id));
        }
        for r in [&a, &b] {
            if self.resolve(&r.id).is_some() {
                return Err(format!("relation `{}` is already registered", r.id));
            }
        }
        a.directed = true;
        b.directed = true;
        b.temporal = a.temporal;
        a.inverse = Some(b.id.clone());
        b.inverse = Some(a.id.clone());
        self.relations.push(a);
        self.relations.push(b);
        Ok(())
    }
}
