// SPDX-License-Identifier: Apache-2.0

//! Check results as human diagnostics and as line-delimited JSON.

use std::fmt::Write;

use serde::Serialize;

use pfil_core::solver::{Obligation, Verdict};
use pfil_core::typecheck::CheckReport;

use crate::source::SourceMap;

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record<'a> {
    Obligation {
        component: &'a str,
        location: String,
        category: &'static str,
        verdict: &'static str,
        #[serde(skip_serializing_if = "Option::is_none")]
        counterexample: Option<&'a pfil_core::Binding>,
        #[serde(skip_serializing_if = "Option::is_none")]
        reason: Option<&'a str>,
        goal: String,
        path_condition: String,
        note: &'a str,
    },
    Trusted {
        component: &'a str,
        location: String,
        fact: String,
    },
    Error {
        component: &'a str,
        location: String,
        message: &'a str,
    },
}

/// One JSON object per line: every obligation, every trusted fact and
/// every structural error.
pub fn jsonl(reports: &[CheckReport], map: &SourceMap) -> String {
    let mut out = String::new();
    let mut push = |r: Record| {
        out.push_str(&serde_json::to_string(&r).expect("records serialize"));
        out.push('\n');
    };
    for r in reports {
        let c = r.component.as_str();
        for (o, v) in &r.results {
            push(Record::Obligation {
                component: c,
                location: map.locate(c, o.span),
                category: o.category.name(),
                verdict: v.label(),
                counterexample: match v {
                    Verdict::Refuted(m) => Some(m),
                    _ => None,
                },
                reason: match v {
                    Verdict::Unknown(why) => Some(why),
                    _ => None,
                },
                goal: o.goal.to_string(),
                path_condition: o.path_condition.to_string(),
                note: &o.note,
            });
        }
        for (span, fact) in &r.trusted {
            push(Record::Trusted {
                component: c,
                location: map.locate(c, *span),
                fact: fact.to_string(),
            });
        }
        for (span, msg) in &r.errors {
            push(Record::Error {
                component: c,
                location: map.locate(c, *span),
                message: msg,
            });
        }
    }
    out
}

fn describe(o: &Obligation) -> String {
    if o.note.is_empty() {
        format!("cannot prove `{}`", o.goal)
    } else {
        o.note.clone()
    }
}

/// Diagnostics for failures, then the trusted facts.
pub fn human(reports: &[CheckReport], map: &SourceMap) -> String {
    let mut out = String::new();
    for r in reports {
        let c = r.component.as_str();
        for (span, msg) in &r.errors {
            let _ = writeln!(out, "{}: error: {msg}", map.locate(c, *span));
        }
        for (o, v) in r.failures() {
            let at = map.locate(c, o.span);
            match v {
                Verdict::Refuted(model) => {
                    let _ = writeln!(out, "{at}: error[{}]: in `{c}`: {}", o.category, describe(o));
                    if !model.is_empty() {
                        let m: Vec<String> = model.iter().map(|(k, v)| format!("{k} = {v}")).collect();
                        let _ = writeln!(out, "  counterexample: {}", m.join(", "));
                    }
                }
                Verdict::Unknown(why) => {
                    let _ = writeln!(
                        out,
                        "{at}: error[{}]: in `{c}`: could not decide: {}",
                        o.category,
                        describe(o)
                    );
                    let _ = writeln!(out, "  reason: {why}");
                    let _ = writeln!(
                        out,
                        "  help: if `{}` always holds here, state it with `assume` (trusted without proof)",
                        o.goal
                    );
                }
                Verdict::Proven => {}
            }
        }
    }
    let trusted: Vec<_> = reports
        .iter()
        .flat_map(|r| r.trusted.iter().map(move |t| (r.component.as_str(), t)))
        .collect();
    if !trusted.is_empty() {
        out.push_str("trusted assumptions:\n");
        for (c, (span, fact)) in trusted {
            let _ = writeln!(out, "  {}: in `{c}`: {fact}", map.locate(c, *span));
        }
    }
    out
}

/// One line per component: proven, refuted and unknown counts.
pub fn summary(reports: &[CheckReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let count = |label: &str| r.results.iter().filter(|(_, v)| v.label() == label).count();
        let _ = writeln!(
            out,
            "{}: {} ({} proven, {} refuted, {} unknown)",
            r.component,
            if r.passed() { "ok" } else { "FAILED" },
            count("proven"),
            count("refuted"),
            count("unknown")
        );
    }
    out
}
