//! Commonsense inference over a hand-editable knowledge base of event
//! triples: unification, multi-hop chains, and scene hazard foresight.

pub mod assess;
pub mod chain;
pub mod kb;
pub mod relation;
pub mod unify;

pub use kb::{Inference, KbError, KnowledgeBase, KnowledgeTriple, Provenance};
pub use relation::{RelationCatalog, RelationDef, HAPPENS_AFTER, HAPPENS_BEFORE, X_EFFECT, X_NEED, X_WANT};
pub use unify::{instantiate, match_key, unify, Binding};
pub use assess::{cie_assess, cie_assess_with, CieAssessment, CieOptions, Foreseen, HazardReason};
pub use chain::{chain, ChainLink, EventChain};
