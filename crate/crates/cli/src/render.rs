//! Human-readable output.

use std::fmt::Write;

use adsb::cie::{EventChain, Inference, KnowledgeBase};
use adsb::ere::Evaluation;
use adsb::monitor::{Advisory, EngineOutput, Finding, MonitorDecision, ScenarioReport, StrategicAssessment};
use adsb::scene::event::Event;

pub fn evaluation(e: &Evaluation) -> String {
    format!("severe vs non-severe\n{}\nseverity level\n{}", e.severe, e.rating)
}

fn findings(out: &mut String, fs: &[Finding]) {
    for f in fs {
        let _ = writeln!(out, "  [{:?}] {}: {}", f.risk, f.engine, f.summary);
    }
}

fn status<T>(name: &str, o: &EngineOutput<T>) -> String {
    match o {
        EngineOutput::Available(_) => format!("{name}: available"),
        EngineOutput::Unavailable(why) => format!("{name}: unavailable ({why})"),
    }
}

pub fn assessment(a: &StrategicAssessment) -> String {
    let mut out = format!("overall risk: {:?}\n", a.overall_risk);
    let _ = writeln!(out, "{}; {}; {}", status("ere", &a.ere), status("cie", &a.cie), status("gvk", &a.gvk));
    if let Some(g) = a.gvk.available() {
        for r in &g.recommendations {
            let _ = writeln!(out, "  recommend ({}): {}", r.rule_id, r.text);
        }
    }
    if a.findings.is_empty() {
        out.push_str("no findings\n");
    } else {
        out.push_str("findings:\n");
        findings(&mut out, &a.findings);
    }
    out
}

pub fn decision(d: &MonitorDecision) -> String {
    let mut out = format!("{}", d.verdict);
    if d.fail_soft {
        let names: Vec<String> = d.unavailable.iter().map(ToString::to_string).collect();
        let _ = write!(out, " (fail-soft: {} unavailable)", names.join(", "));
    }
    out.push('\n');
    findings(&mut out, &d.reasons);
    out
}

pub fn advisory(a: &Advisory) -> String {
    let mut out = format!("risk: {:?}\n", a.risk);
    match a.safe_speed {
        Some(v) => {
            let _ = writeln!(out, "safe speed: {v:.1} m/s ({:.0} mph)", v / adsb::element::MPH_TO_MPS);
        }
        None => out.push_str("safe speed: unknown (no speed limit or lead gap)\n"),
    }
    let _ = writeln!(out, "lane: {}", a.lane_recommendation.text);
    for g in &a.distancing {
        let measured = g.measured.map_or_else(|| "unmeasured".to_string(), |m| format!("{m:.1} m"));
        let _ = writeln!(out, "keep {:.1} m from `{}` at {} (now {measured})", g.required, g.actor, g.cell);
    }
    for n in &a.surrounding_pattern_notes {
        let _ = writeln!(out, "pattern: {n}");
    }
    for c in &a.cautions {
        let _ = writeln!(out, "caution: {c}");
    }
    for k in &a.ignored_profile {
        let _ = writeln!(out, "ignored profile attribute: {k}");
    }
    out
}

pub fn scenario(name: &str, r: &ScenarioReport) -> String {
    let mut out = format!(
        "{name}: {} step(s), intervention rate {:.2}, {} fail-soft\n",
        r.decisions.len(),
        r.intervention_rate,
        r.fail_soft_count
    );
    for s in &r.decisions {
        let _ = writeln!(out, "  step {} `{}` -> {}", s.step, s.event, s.decision.verdict);
        for f in &s.decision.reasons {
            let _ = writeln!(out, "    [{:?}] {}: {}", f.risk, f.engine, f.summary);
        }
    }
    out
}

pub fn inferences(kb: &KnowledgeBase, query: &Event, relation: &str, xs: &[Inference]) -> String {
    let mut out = format!("{query} --{relation}-->\n");
    if xs.is_empty() {
        out.push_str("  (nothing)\n");
    }
    for i in xs {
        let t = kb.triple(i.triple);
        let via = if i.inverse { " (via inverse)" } else { "" };
        let _ = writeln!(out, "  {}   [{}: {} {} {}]{via}", i.tail, i.source_tag, t.head, t.relation, t.tail);
    }
    out
}

pub fn chains(cs: &[EventChain]) -> String {
    let mut out = String::new();
    if cs.is_empty() {
        out.push_str("(no chains)\n");
    }
    for c in cs {
        let texts: Vec<String> = c.events.iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "{} hop(s): {}", c.hops(), texts.join(" -> "));
    }
    out
}
