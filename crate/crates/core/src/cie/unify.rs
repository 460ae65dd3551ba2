//! Slot-variable unification of event patterns against concrete events.
//!
//! Matching runs on determiner-free tokens with `noun@TAG` split into
//! `noun` and `@TAG`, so a variable can bind a position tag. When both
//! sides parsed confidently the three slots are matched separately;
//! otherwise the full token sequences are compared.

use std::collections::BTreeMap;

use crate::scene::event::{is_variable, parse_event, Event, Lexicon};

/// Variable name (`{X}`) to the tokens it stands for.
pub type Binding = BTreeMap<String, Vec<String>>;

const SLOT_BREAK: &str = "\u{1}";

fn push_tokens(out: &mut Vec<String>, slot: &[&str], lex: &Lexicon) {
    for t in slot {
        if lex.is_det(t) {
            continue;
        }
        match t.split_once('@') {
            Some((noun, tag)) if !noun.is_empty() => {
                out.push(noun.to_string());
                out.push(format!("@{tag}"));
            }
            _ => out.push((*t).to_string()),
        }
    }
}

fn shape(e: &Event, slotted: bool) -> Vec<String> {
    let lex = Lexicon::builtin();
    let mut out = Vec::new();
    push_tokens(&mut out, &e.subject_tokens(), lex);
    if slotted {
        out.push(SLOT_BREAK.into());
    }
    push_tokens(&mut out, &e.predicate_tokens(), lex);
    if slotted {
        out.push(SLOT_BREAK.into());
    }
    push_tokens(&mut out, &e.object_tokens(), lex);
    out
}

/// Index key for a confidently parsed event's predicate.
pub(crate) fn predicate_key(e: &Event) -> String {
    let mut out = Vec::new();
    push_tokens(&mut out, &e.predicate_tokens(), Lexicon::builtin());
    out.join(" ")
}

/// Identity used for visited sets and de-duplication: two events with the
/// same key unify with exactly the same patterns.
pub fn match_key(e: &Event) -> String {
    let mut s = shape(e, !e.low_confidence).join(" ");
    if e.low_confidence {
        s.insert(0, '~');
    }
    s
}

/// First binding under which `pattern` matches `query`. Variables in the
/// query are plain tokens.
pub fn unify(pattern: &Event, query: &Event) -> Option<Binding> {
    let slotted = !pattern.low_confidence && !query.low_confidence;
    let p = shape(pattern, slotted);
    let q = shape(query, slotted);
    let mut b = Binding::new();
    walk(&p, &q, &mut b).then_some(b)
}

fn walk(p: &[String], q: &[String], b: &mut Binding) -> bool {
    let Some((head, rest)) = p.split_first() else {
        return q.is_empty();
    };
    if !is_variable(head) {
        return q.first() == Some(head) && walk(rest, &q[1..], b);
    }
    if let Some(bound) = b.get(head).cloned() {
        let n = bound.len();
        return q.len() >= n && q[..n] == bound[..] && walk(rest, &q[n..], b);
    }
    // A variable spans one or more tokens inside a single slot.
    let max = q.iter().take_while(|t| *t != SLOT_BREAK).count();
    for n in 1..=max {
        b.insert(head.clone(), q[..n].to_vec());
        if walk(rest, &q[n..], b) {
            return true;
        }
    }
    b.remove(head);
    false
}

/// Replace bound variables in `pattern` and re-parse. Unbound variables
/// stay as they are.
pub fn instantiate(pattern: &Event, binding: &Binding) -> Event {
    let lex = Lexicon::builtin();
    let mut tokens: Vec<String> = Vec::new();
    for t in pattern.normalized().split(' ').filter(|t| !t.is_empty()) {
        match binding.get(t) {
            Some(v) => tokens.extend(v.iter().cloned()),
            None => tokens.push(t.to_string()),
        }
    }
    // Re-attach a position tag to the plain noun in front of it.
    let mut joined: Vec<String> = Vec::with_capacity(tokens.len());
    for t in tokens {
        let fuse = t.starts_with('@')
            && joined.last().is_some_and(|prev| {
                !prev.contains('@')
                    && !is_variable(prev)
                    && !(lex.is_aux(prev) || lex.is_verb(prev) || lex.is_prep(prev) || lex.is_det(prev))
            });
        if fuse {
            joined.last_mut().expect("checked").push_str(&t);
        } else {
            joined.push(t);
        }
    }
    let mut e = parse_event(&joined.join(" "));
    e.raw_text = e.normalized();
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(s: &str) -> Event {
        parse_event(s)
    }

    #[test]
    fn ground_events_match_modulo_articles() {
        assert!(unify(&ev("a car hits a person"), &ev("the car hits the person")).is_some());
        assert!(unify(&ev("a car hits a person"), &ev("a car hits a dog")).is_none());
        assert!(unify(&ev("a car hits a person"), &ev("a car strikes a person")).is_none());
    }

    #[test]
    fn variables_bind_consistently() {
        let p = ev("person X throws the ball to person Y");
        let b = unify(&p, &ev("person Z throws the ball to person W")).unwrap();
        assert_eq!(b["{X}"], vec!["{Z}"]);
        assert_eq!(b["{Y}"], vec!["{W}"]);
        let same = ev("{X} hits {X}");
        assert!(unify(&same, &ev("car hits car")).is_some());
        assert!(unify(&same, &ev("car hits bus")).is_none());
    }

    #[test]
    fn variables_stay_inside_their_slot() {
        // {X} cannot swallow the predicate.
        assert!(unify(&ev("{X} enters the lane"), &ev("a red car enters the lane")).is_some());
        assert!(unify(&ev("{X} enters the lane"), &ev("car enters")).is_none());
    }

    #[test]
    fn position_tags_bind_to_variables() {
        let p = ev("vehicle {Y} enters the exit-only lane");
        let q = ev("a vehicle at position_RR2 enters the exit-only lane");
        let b = unify(&p, &q).unwrap();
        assert_eq!(b["{Y}"], vec!["@RR2"]);
        let tail = instantiate(&ev("vehicle {Y} returns to the main lane and cuts in"), &b);
        assert_eq!(tail.subject, "vehicle@RR2");
        assert_eq!(tail.subject_position(), Some("RR2"));
    }

    #[test]
    fn low_confidence_events_compare_whole_text() {
        let q = ev("ball rolling");
        assert!(q.low_confidence);
        assert!(unify(&ev("ball rolling"), &q).is_some());
        assert!(unify(&ev("{X} rolling"), &q).is_some());
    }

    proptest! {
        /// Substituting the binding into the pattern reproduces the query.
        #[test]
        fn bindings_are_sound(
            subj in prop::sample::select(vec!["car", "red car", "x", "vehicle at position_L1", "person y"]),
            verb in prop::sample::select(vec!["hits", "is passing", "enters", "cuts into"]),
            obj in prop::sample::select(vec!["the lane", "a person", "z", "the exit-only lane", ""]),
            mask in 0u8..8,
        ) {
            let query = ev(&format!("{subj} {verb} {obj}"));
            let var = |on: bool, s: &str, v: &str| if on { v.to_string() } else { s.to_string() };
            let pattern = ev(&format!(
                "{} {verb} {}",
                var(mask & 1 == 1, subj, "{P}"),
                var(mask & 2 == 2 && !obj.is_empty(), obj, "{Q}"),
            ));
            let b = unify(&pattern, &query);
            prop_assert!(b.is_some(), "{:?} vs {:?}", pattern, query);
            prop_assert_eq!(match_key(&instantiate(&pattern, &b.unwrap())), match_key(&query));
        }
    }
}
