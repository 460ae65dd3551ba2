//! Event sentences: subject, predicate, object.
//!
//! Normalisation lower-cases and collapses whitespace, turns single-letter
//! or braced tokens into `{X}` slot variables, folds `at position_rr2` into
//! the preceding token as `@RR2`, and strips articles from the front of the
//! subject only. The predicate is the first verb group found with the
//! shipped closed lexicon.

use std::collections::HashSet;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

const LEXICON_SRC: &str = include_str!("../../data/lexicon/verbs.txt");

#[derive(Debug, Default)]
pub struct Lexicon {
    aux: HashSet<String>,
    verbs: HashSet<String>,
    preps: HashSet<String>,
    dets: HashSet<String>,
}

impl Lexicon {
    pub fn parse(src: &str) -> Result<Self, String> {
        let mut lex = Lexicon::default();
        for (i, line) in src.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (kind, word) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| format!("line {}: expected `<kind> <word>`", i + 1))?;
            let word = word.trim().to_lowercase();
            let set = match kind {
                "aux" => &mut lex.aux,
                "verb" => &mut lex.verbs,
                "prep" => &mut lex.preps,
                "det" => &mut lex.dets,
                other => return Err(format!("line {}: unknown word kind `{other}`", i + 1)),
            };
            set.insert(word);
        }
        Ok(lex)
    }

    pub fn builtin() -> &'static Lexicon {
        static LEX: OnceLock<Lexicon> = OnceLock::new();
        LEX.get_or_init(|| Lexicon::parse(LEXICON_SRC).expect("shipped lexicon is valid"))
    }

    pub fn is_aux(&self, w: &str) -> bool {
        self.aux.contains(w)
    }
    pub fn is_verb(&self, w: &str) -> bool {
        self.verbs.contains(w)
    }
    pub fn is_prep(&self, w: &str) -> bool {
        self.preps.contains(w)
    }
    pub fn is_det(&self, w: &str) -> bool {
        self.dets.contains(w)
    }
}

/// A parsed event sentence. `subject` is empty for infinitives and for
/// low-confidence parses; `object` is empty when nothing follows the verb.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub subject: String,
    pub predicate: String,
    pub object: String,
    pub raw_text: String,
    #[serde(default)]
    pub low_confidence: bool,
}

impl Event {
    /// Canonical text; parsing it again yields the same parts.
    pub fn normalized(&self) -> String {
        [&self.subject, &self.predicate, &self.object]
            .into_iter()
            .filter(|s| !s.is_empty())
            .map(String::as_str)
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Parts without the raw text, for comparisons.
    pub fn parts(&self) -> (&str, &str, &str) {
        (&self.subject, &self.predicate, &self.object)
    }

    pub fn subject_tokens(&self) -> Vec<&str> {
        split_tokens(&self.subject)
    }
    pub fn predicate_tokens(&self) -> Vec<&str> {
        split_tokens(&self.predicate)
    }
    pub fn object_tokens(&self) -> Vec<&str> {
        split_tokens(&self.object)
    }

    /// Grid label of a subject written as `noun@LABEL`.
    pub fn subject_position(&self) -> Option<&str> {
        self.subject_tokens().into_iter().find_map(|t| t.split_once('@').map(|(_, p)| p))
    }

    /// Variables appearing anywhere in the event, in first-seen order.
    pub fn variables(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for t in split_tokens(&self.subject)
            .into_iter()
            .chain(split_tokens(&self.predicate))
            .chain(split_tokens(&self.object))
        {
            if is_variable(t) && !seen.contains(&t) {
                seen.push(t);
            }
        }
        seen
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.normalized())
    }
}

fn split_tokens(s: &str) -> Vec<&str> {
    s.split(' ').filter(|t| !t.is_empty()).collect()
}

/// `{X}`-style slot variable.
pub fn is_variable(token: &str) -> bool {
    token.len() > 2 && token.starts_with('{') && token.ends_with('}')
}

pub fn parse_event(text: &str) -> Event {
    parse_event_with(text, Lexicon::builtin())
}

pub fn parse_event_with(text: &str, lex: &Lexicon) -> Event {
    let tokens = normalize_tokens(text, lex);
    let raw_text = text.to_string();
    let join = |ts: &[String]| ts.join(" ");

    let mut subj_start = 0;
    while subj_start < tokens.len() && lex.is_det(&tokens[subj_start]) {
        subj_start += 1;
    }
    let function_word = |w: &str| lex.is_aux(w) || lex.is_prep(w) || lex.is_det(w);
    if tokens.len() >= subj_start + 2 && tokens[subj_start] == "to" && !function_word(&tokens[subj_start + 1]) {
        return Event {
            subject: String::new(),
            predicate: join(&tokens[subj_start..subj_start + 2]),
            object: join(&tokens[subj_start + 2..]),
            raw_text,
            low_confidence: false,
        };
    }

    let verb_at = (subj_start + 1..tokens.len()).find(|&i| lex.is_aux(&tokens[i]) || lex.is_verb(&tokens[i]));
    let Some(start) = verb_at else {
        return Event {
            subject: String::new(),
            predicate: join(&tokens),
            object: String::new(),
            raw_text,
            low_confidence: true,
        };
    };

    let mut end = start + 1;
    if lex.is_aux(&tokens[start]) {
        while end < tokens.len() && (lex.is_aux(&tokens[end]) || is_participle(&tokens[end], lex)) {
            end += 1;
        }
    }
    if end < tokens.len() && lex.is_prep(&tokens[end]) {
        end += 1;
    }
    Event {
        subject: join(&tokens[subj_start..start]),
        predicate: join(&tokens[start..end]),
        object: join(&tokens[end..]),
        raw_text,
        low_confidence: false,
    }
}

fn is_participle(w: &str, lex: &Lexicon) -> bool {
    (w.len() > 4 && (w.ends_with("ing") || w.ends_with("ed"))) || lex.is_verb(w)
}

fn normalize_tokens(text: &str, lex: &Lexicon) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for raw in text.split_whitespace() {
        let t = raw
            .trim_matches(|c: char| matches!(c, '.' | ',' | ';' | ':' | '!' | '?' | '"' | '\u{201c}' | '\u{201d}'))
            .trim_matches('\'');
        if t.is_empty() {
            continue;
        }
        let lower = t.to_lowercase();
        if let Some(pos) = lower.strip_prefix("position_") {
            let tag = format!("@{}", pos.to_uppercase());
            // `<noun> at position_x` folds into `<noun>@X`.
            let n = out.len();
            let noun_before_at = n >= 2
                && out[n - 1] == "at"
                && !out[n - 2].contains('@')
                && !(lex.is_aux(&out[n - 2]) || lex.is_verb(&out[n - 2]) || lex.is_prep(&out[n - 2]) || lex.is_det(&out[n - 2]));
            if noun_before_at {
                out.pop();
                out.last_mut().expect("checked length").push_str(&tag);
            } else {
                out.push(tag);
            }
            continue;
        }
        out.push(normalize_token(&lower));
    }
    out
}

fn normalize_token(lower: &str) -> String {
    if let Some((noun, pos)) = lower.split_once('@') {
        let noun = if noun.is_empty() { String::new() } else { normalize_token(noun) };
        return format!("{noun}@{}", pos.to_uppercase());
    }
    let inner = lower.strip_prefix('{').and_then(|s| s.strip_suffix('}'));
    if let Some(name) = inner {
        if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return format!("{{{}}}", name.to_uppercase());
        }
    }
    let mut chars = lower.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        if c.is_alphabetic() && c != 'a' && c != 'i' {
            return format!("{{{}}}", c.to_uppercase());
        }
    }
    lower.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parts(text: &str) -> (String, String, String) {
        let e = parse_event(text);
        (e.subject, e.predicate, e.object)
    }

    fn owned(s: &str, p: &str, o: &str) -> (String, String, String) {
        (s.into(), p.into(), o.into())
    }

    #[test]
    fn position_sentence() {
        assert_eq!(
            parts("A Vehicle at Position_RR2 Is Changing into Its Left Line"),
            owned("vehicle@RR2", "is changing into", "its left line")
        );
    }

    #[test]
    fn variable_subject() {
        let e = parse_event("x is chasing a ball");
        assert_eq!(e.parts(), ("{X}", "is chasing", "a ball"));
        assert_eq!(e.variables(), vec!["{X}"]);
    }

    #[test]
    fn finite_verbs_and_infinitives() {
        assert_eq!(parts("a car hits a person"), owned("car", "hits", "a person"));
        assert_eq!(parts("to catch the ball"), owned("", "to catch", "the ball"));
        assert_eq!(parts("to go outside"), owned("", "to go", "outside"));
        assert_eq!(
            parts("person X throws the ball to person Y"),
            owned("person {X}", "throws", "the ball to person {Y}")
        );
        assert_eq!(
            parts("vehicle Y returns to the main lane and cuts in"),
            owned("vehicle {Y}", "returns to", "the main lane and cuts in")
        );
        assert_eq!(parts("a ball is rolling at the intersection"), owned("ball", "is rolling at", "the intersection"));
    }

    #[test]
    fn no_verb_is_low_confidence() {
        let e = parse_event("Heavy Rain   ahead");
        assert!(e.low_confidence);
        assert_eq!(e.parts(), ("", "heavy rain ahead", ""));
    }

    #[test]
    fn braced_variables_and_quotes() {
        let e = parse_event("Vehicle {y} enters the \"Exit-Only\" lane.");
        assert_eq!(e.parts(), ("vehicle {Y}", "enters", "the exit-only lane"));
        assert_eq!(parse_event("the @l1 pedestrian is crossing").subject, "@L1 pedestrian");
    }

    #[test]
    fn subject_position_is_exposed() {
        let e = parse_event("A Vehicle at Position_RR2 Is Changing into Its Left Line");
        assert_eq!(e.subject_position(), Some("RR2"));
    }

    #[test]
    fn shipped_lexicon_loads() {
        let lex = Lexicon::builtin();
        assert!(lex.is_aux("is") && lex.is_verb("hits") && lex.is_prep("into") && lex.is_det("the"));
        assert!(Lexicon::parse("noun car").is_err());
    }

    proptest! {
        #[test]
        fn normalisation_is_idempotent(words in prop::collection::vec(
            prop::sample::select(vec![
                "A", "the", "Vehicle", "car", "x", "Y", "{z}", "is", "was", "chasing", "hits", "into",
                "at", "position_L1", "ball", "to", "catch", "lane", "red", "turned", "not", "I",
            ]),
            1..10,
        )) {
            let text = words.join(" ");
            let first = parse_event(&text);
            let again = parse_event(&first.normalized());
            prop_assert_eq!(first.parts(), again.parts());
            prop_assert_eq!(first.low_confidence, again.low_confidence);
        }
    }
}
