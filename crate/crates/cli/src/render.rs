//! Plain-text rendering. Every list is already sorted by the core, so output
//! depends only on the input file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fmt::Write as _;

use matterprov::{
    ConstitutionView, GranuleHistory, Origin, Phase, ProvenanceEdge, Report, Status, TimePoint,
    WorldView,
};

fn join<T: Display>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn interval(from: TimePoint, to: Option<TimePoint>) -> String {
    match to {
        Some(to) => format!("[{from}, {to})"),
        None => format!("[{from}, ∞)"),
    }
}

pub fn ids<T: Display>(set: &BTreeSet<T>) -> String {
    set.iter().map(|i| format!("{i}\n")).collect()
}

pub fn report(report: &Report) -> String {
    let mut out = String::new();
    for (rule, violations) in report.by_rule() {
        let _ = writeln!(out, "{rule} ({})", violations.len());
        for v in violations {
            let at = v.at.map(|t| format!("{t} ")).unwrap_or_default();
            let _ = writeln!(out, "  {at}{}: {}", v.subjects.join(" "), v.message);
        }
    }
    let n = report.violations.len();
    let _ = writeln!(out, "{n} violation{}", if n == 1 { "" } else { "s" });
    out
}

pub fn history(h: &GranuleHistory) -> String {
    let mut out = String::new();
    for e in &h.episodes {
        let _ = write!(
            out,
            "{} {} {}",
            e.quantity,
            interval(e.from, e.to),
            e.in_event
        );
        if let Some(end) = &e.out_event {
            let _ = write!(out, " -> {end}");
        }
        out.push('\n');
    }
    out
}

pub fn world(w: &WorldView) -> String {
    let mut out = format!("world {}\n", w.at);
    let _ = writeln!(out, "objects ({})", w.objects.len());
    for o in &w.objects {
        let _ = writeln!(out, "  {} : {} since {}", o.id, o.kind, o.created_at);
    }
    let _ = writeln!(out, "quantities ({})", w.quantities.len());
    for q in &w.quantities {
        let status = match q.status {
            Status::Live => "live",
            Status::Historical => "historical",
            Status::NotYetCreated => "not yet created",
        };
        let _ = writeln!(
            out,
            "  {} : {} {status} {} {{ {} }}",
            q.id,
            q.kind,
            interval(q.created_at, q.terminated_at),
            join(&q.granules)
        );
    }
    let _ = writeln!(out, "adjacency ({})", w.adjacency.len());
    for (a, b) in &w.adjacency {
        let _ = writeln!(out, "  {a} {b}");
    }
    if !w.subquantities.is_empty() {
        let _ = writeln!(out, "subquantities ({})", w.subquantities.len());
        for s in &w.subquantities {
            let _ = writeln!(out, "  {} of {}", s.part, s.whole);
        }
    }
    out
}

pub fn classification<K: Display>(map: &BTreeMap<K, Origin>) -> String {
    map.iter().map(|(q, o)| format!("{q} {o}\n")).collect()
}

pub fn constitution(v: &ConstitutionView) -> String {
    let phase = match v.phase {
        Phase::Connected => "connected",
        Phase::Scattered => "scattered",
    };
    format!(
        "{} constitutes {} at {}: {phase} {{ {} }}\n",
        v.collection_id,
        v.quantity,
        v.at,
        join(&v.members)
    )
}

pub fn edges(edges: &[ProvenanceEdge]) -> String {
    let mut out = String::new();
    for e in edges {
        let _ = write!(out, "{} <- {} via {}", e.inheritor, e.donor, e.event);
        for (flag, name) in [
            (e.complete_inheritance, "complete-inheritance"),
            (e.complete_donation, "complete-donation"),
            (e.is_sub_portion, "sub-portion"),
        ] {
            if flag {
                let _ = write!(out, " {name}");
            }
        }
        out.push('\n');
    }
    out
}

pub fn replay_check(ok: bool, detail: Option<&str>, counts: &BTreeMap<&str, usize>) -> String {
    let summary = join(counts.iter().map(|(k, v)| format!("{v} {k}")));
    match (ok, detail) {
        (true, _) => format!("replay identical ({summary})\n"),
        (false, Some(d)) => format!("replay differs: {d} ({summary})\n"),
        (false, None) => format!("replay differs ({summary})\n"),
    }
}

/// 1-based number of the first line where `a` and `b` differ.
pub fn first_difference(a: &str, b: &str) -> Option<usize> {
    if a == b {
        return None;
    }
    let mut la = a.lines();
    let mut lb = b.lines();
    let mut n = 1;
    loop {
        match (la.next(), lb.next()) {
            (Some(x), Some(y)) if x == y => n += 1,
            _ => return Some(n),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_difference_lines() {
        assert_eq!(first_difference("a\nb\n", "a\nb\n"), None);
        assert_eq!(first_difference("a\nb\n", "a\nc\n"), Some(2));
        assert_eq!(first_difference("a\n", "a\nb\n"), Some(2));
    }

    #[test]
    fn open_intervals() {
        assert_eq!(interval(TimePoint(2), None), "[t2, ∞)");
        assert_eq!(interval(TimePoint(0), Some(TimePoint(1))), "[t0, t1)");
    }
}
