//! Axiom and mereotopology checks over a knowledge base.
//!
//! Every check is read-only and returns violations tagged with a rule from
//! the closed [`Rule`] registry. Time-dependent checks run at every change
//! point of the KB, since worlds only differ there.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::event::EventKind;
use crate::graph::DisjointSets;
use crate::ids::{ObjectId, QuantityId, TimePoint};
use crate::model::{Kb, KindMeta, QuantityInst, MIN_GRANULES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Rule {
    #[serde(rename = "A1_TYPING")]
    A1Typing,
    #[serde(rename = "SUPPLEMENTATION_MIN2")]
    SupplementationMin2,
    #[serde(rename = "A2_SUBQUANTITY_INCLUSION")]
    A2SubquantityInclusion,
    #[serde(rename = "AA1_GGD")]
    Aa1Ggd,
    #[serde(rename = "CONNECTIVITY")]
    Connectivity,
    #[serde(rename = "EXTERNAL_CONNECTION")]
    ExternalConnection,
    #[serde(rename = "MAXIMALITY_SAME_KIND")]
    MaximalitySameKind,
    #[serde(rename = "H1_HISTORY")]
    H1History,
    #[serde(rename = "SUBQ_KIND_DISTINCT")]
    SubqKindDistinct,
}

impl Rule {
    pub const ALL: [Rule; 9] = [
        Rule::A1Typing,
        Rule::SupplementationMin2,
        Rule::A2SubquantityInclusion,
        Rule::Aa1Ggd,
        Rule::Connectivity,
        Rule::ExternalConnection,
        Rule::MaximalitySameKind,
        Rule::H1History,
        Rule::SubqKindDistinct,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Rule::A1Typing => "A1_TYPING",
            Rule::SupplementationMin2 => "SUPPLEMENTATION_MIN2",
            Rule::A2SubquantityInclusion => "A2_SUBQUANTITY_INCLUSION",
            Rule::Aa1Ggd => "AA1_GGD",
            Rule::Connectivity => "CONNECTIVITY",
            Rule::ExternalConnection => "EXTERNAL_CONNECTION",
            Rule::MaximalitySameKind => "MAXIMALITY_SAME_KIND",
            Rule::H1History => "H1_HISTORY",
            Rule::SubqKindDistinct => "SUBQ_KIND_DISTINCT",
        }
    }

    pub fn parse(s: &str) -> Option<Rule> {
        Rule::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Violation {
    pub rule: Rule,
    pub subjects: Vec<String>,
    pub at: Option<TimePoint>,
    pub message: String,
}

impl Violation {
    fn new<S: ToString>(
        rule: Rule,
        subjects: impl IntoIterator<Item = S>,
        at: Option<TimePoint>,
        message: impl Into<String>,
    ) -> Self {
        Violation {
            rule,
            subjects: subjects.into_iter().map(|s| s.to_string()).collect(),
            at,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WorldSummary {
    pub at: TimePoint,
    pub live_quantities: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Report {
    /// Sorted by rule, then subjects, then time.
    pub violations: Vec<Violation>,
    pub worlds: Vec<WorldSummary>,
}

impl Report {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn by_rule(&self) -> BTreeMap<Rule, Vec<&Violation>> {
        let mut grouped: BTreeMap<Rule, Vec<&Violation>> = BTreeMap::new();
        for v in &self.violations {
            grouped.entry(v.rule).or_default().push(v);
        }
        grouped
    }

    pub fn rules_fired(&self) -> BTreeSet<Rule> {
        self.violations.iter().map(|v| v.rule).collect()
    }
}

/// `[from, to)`, open-ended when `to` is absent.
type Interval = (TimePoint, Option<TimePoint>);

fn finish(mut violations: Vec<Violation>) -> Vec<Violation> {
    violations.sort();
    violations.dedup();
    violations
}

pub struct Validator<'a> {
    kb: &'a Kb,
}

impl<'a> Validator<'a> {
    pub fn new(kb: &'a Kb) -> Self {
        Validator { kb }
    }

    fn object_granules<'q>(&self, q: &'q QuantityInst) -> Vec<&'q ObjectId> {
        q.granules
            .iter()
            .filter(|g| self.kb.objects.contains_key(g.as_str()))
            .collect()
    }

    fn linked(&self, x: &QuantityInst, y: &QuantityInst) -> bool {
        self.kb.subquantities.iter().any(|s| s.links(&x.id, &y.id))
    }

    /// Meta-kind checks on every stored relation, plus the different-kinds
    /// requirement on sub-quantity assertions.
    pub fn check_typing(&self) -> Vec<Violation> {
        let kb = self.kb;
        let mut out = Vec::new();
        let meta_of = |name: &str| kb.kinds.get(name).map(|k| k.meta);

        for k in kb.kinds.values() {
            if k.meta == KindMeta::ObjectKind && !k.required_granule_kinds.is_empty() {
                out.push(Violation::new(
                    Rule::A1Typing,
                    [&k.name],
                    None,
                    format!("object kind {} declares granule requirements", k.name),
                ));
            }
            for req in &k.required_granule_kinds {
                if meta_of(req.as_str()) != Some(KindMeta::ObjectKind) {
                    out.push(Violation::new(
                        Rule::A1Typing,
                        [k.name.as_str(), req.as_str()],
                        None,
                        format!(
                            "required granule kind {req} of {} is not an object kind",
                            k.name
                        ),
                    ));
                }
            }
        }
        for o in kb.objects.values() {
            if meta_of(o.kind.as_str()) != Some(KindMeta::ObjectKind) {
                out.push(Violation::new(
                    Rule::A1Typing,
                    [o.id.as_str(), o.kind.as_str()],
                    None,
                    format!(
                        "object {} has kind {}, which is not an object kind",
                        o.id, o.kind
                    ),
                ));
            }
        }
        for q in kb.quantities.values() {
            if meta_of(q.kind.as_str()) != Some(KindMeta::QuantityKind) {
                out.push(Violation::new(
                    Rule::A1Typing,
                    [q.id.as_str(), q.kind.as_str()],
                    None,
                    format!(
                        "quantity {} has kind {}, which is not a quantity kind",
                        q.id, q.kind
                    ),
                ));
            }
            for g in &q.granules {
                if !kb.objects.contains_key(g) {
                    let what = if kb.quantities.contains_key(g.as_str()) {
                        "a quantity"
                    } else {
                        "not a known object"
                    };
                    out.push(Violation::new(
                        Rule::A1Typing,
                        [q.id.as_str(), g.as_str()],
                        Some(q.created_at),
                        format!("granule {g} of {} is {what}", q.id),
                    ));
                }
            }
        }
        let mut seen: BTreeMap<(&ObjectId, &ObjectId), Vec<Interval>> = BTreeMap::new();
        for e in &kb.adjacency {
            for end in [&e.a, &e.b] {
                if !kb.objects.contains_key(end) {
                    out.push(Violation::new(
                        Rule::A1Typing,
                        [e.a.as_str(), e.b.as_str()],
                        Some(e.from),
                        format!("adjacency endpoint {end} is not a known object"),
                    ));
                }
            }
            if e.a == e.b {
                out.push(Violation::new(
                    Rule::A1Typing,
                    [&e.a],
                    Some(e.from),
                    format!("object {} is adjacent to itself", e.a),
                ));
            }
            if e.to.is_some_and(|to| to <= e.from) {
                out.push(Violation::new(
                    Rule::A1Typing,
                    [e.a.as_str(), e.b.as_str()],
                    Some(e.from),
                    "adjacency interval is empty",
                ));
            }
            let (a, b) = if e.a <= e.b {
                (&e.a, &e.b)
            } else {
                (&e.b, &e.a)
            };
            let intervals = seen.entry((a, b)).or_default();
            let clash = intervals.iter().any(|&(from, to)| {
                let starts_before_other_ends =
                    |f: TimePoint, t: Option<TimePoint>| t.is_none_or(|t| f < t);
                starts_before_other_ends(e.from, to) && starts_before_other_ends(from, e.to)
            });
            if clash {
                out.push(Violation::new(
                    Rule::A1Typing,
                    [a, b],
                    Some(e.from),
                    format!("overlapping adjacency intervals for {a}-{b}"),
                ));
            }
            intervals.push((e.from, e.to));
        }
        for s in &kb.subquantities {
            let part = kb.quantities.get(&s.part);
            let whole = kb.quantities.get(&s.whole);
            let (Some(part), Some(whole)) = (part, whole) else {
                out.push(Violation::new(
                    Rule::A1Typing,
                    [&s.part, &s.whole],
                    None,
                    format!(
                        "subQuantityOf({}, {}) does not relate two quantities",
                        s.part, s.whole
                    ),
                ));
                continue;
            };
            if s.part == s.whole {
                out.push(Violation::new(
                    Rule::A1Typing,
                    [&s.part],
                    None,
                    format!("{} is asserted as a sub-quantity of itself", s.part),
                ));
            } else if part.kind == whole.kind {
                out.push(Violation::new(
                    Rule::SubqKindDistinct,
                    [&s.part, &s.whole],
                    None,
                    format!(
                        "sub-quantity {} and whole {} are both of kind {}",
                        s.part, s.whole, part.kind
                    ),
                ));
            }
            if !part.overlaps(whole) {
                out.push(Violation::new(
                    Rule::A1Typing,
                    [&s.part, &s.whole],
                    None,
                    format!("lifetimes of {} and {} never overlap", s.part, s.whole),
                ));
            }
        }
        finish(out)
    }

    pub fn check_supplementation(&self) -> Vec<Violation> {
        let out = self
            .kb
            .quantities
            .values()
            .filter(|q| q.granules.len() < MIN_GRANULES)
            .map(|q| {
                Violation::new(
                    Rule::SupplementationMin2,
                    [&q.id],
                    Some(q.created_at),
                    format!(
                        "quantity {} has {} distinct granule(s); at least {MIN_GRANULES} required",
                        q.id,
                        q.granules.len()
                    ),
                )
            })
            .collect();
        finish(out)
    }

    /// Granules of a sub-quantity must be granules of its whole, and two
    /// quantities of different kinds may only share granules when a
    /// sub-quantity assertion relates them.
    pub fn check_subquantity_inclusion(&self) -> Vec<Violation> {
        let kb = self.kb;
        let mut out = Vec::new();
        for s in &kb.subquantities {
            let (Some(part), Some(whole)) =
                (kb.quantities.get(&s.part), kb.quantities.get(&s.whole))
            else {
                continue;
            };
            if s.part == s.whole || !part.overlaps(whole) {
                continue;
            }
            let at = part.created_at.max(whole.created_at);
            for g in part.granules.difference(&whole.granules) {
                out.push(Violation::new(
                    Rule::A2SubquantityInclusion,
                    [s.part.as_str(), s.whole.as_str(), g.as_str()],
                    Some(at),
                    format!(
                        "granule {g} of sub-quantity {} is not a granule of {}",
                        s.part, s.whole
                    ),
                ));
            }
        }
        let qs: Vec<&QuantityInst> = kb.quantities.values().collect();
        for (i, x) in qs.iter().enumerate() {
            for y in &qs[i + 1..] {
                if x.kind == y.kind || !x.overlaps(y) || self.linked(x, y) {
                    continue;
                }
                let shared: Vec<&ObjectId> = x.granules.intersection(&y.granules).collect();
                if !shared.is_empty() {
                    let mut subjects = vec![x.id.to_string(), y.id.to_string()];
                    subjects.extend(shared.iter().map(|g| g.to_string()));
                    out.push(Violation::new(
                        Rule::A2SubquantityInclusion,
                        subjects,
                        Some(x.created_at.max(y.created_at)),
                        format!(
                            "{} and {} share granules but neither is a sub-quantity of the other",
                            x.id, y.id
                        ),
                    ));
                }
            }
        }
        finish(out)
    }

    /// Generic granular dependence: an instance of a kind that requires an
    /// object kind has at least one granule of that kind.
    pub fn check_ggd(&self) -> Vec<Violation> {
        let kb = self.kb;
        let mut out = Vec::new();
        for q in kb.quantities.values() {
            let Some(kind) = kb.kinds.get(&q.kind) else {
                continue;
            };
            for req in &kind.required_granule_kinds {
                let satisfied = q
                    .granules
                    .iter()
                    .filter_map(|g| kb.objects.get(g))
                    .any(|o| &o.kind == req);
                if !satisfied {
                    out.push(Violation::new(
                        Rule::Aa1Ggd,
                        [q.id.as_str(), req.as_str()],
                        Some(q.created_at),
                        format!(
                            "quantity {} of kind {} has no granule of kind {req}",
                            q.id, q.kind
                        ),
                    ));
                }
            }
        }
        finish(out)
    }

    /// For each quantity live at `t`: every granule has an adjacent
    /// co-granule (`EXTERNAL_CONNECTION`), and the granules that do are one
    /// connected component (`CONNECTIVITY`). Quantities below the granule
    /// floor are left to the supplementation check.
    pub fn check_connectivity(&self, t: TimePoint) -> Vec<Violation> {
        let kb = self.kb;
        let hosts = self.hosts_at(t);
        let edges = kb.adjacency_at(t);
        let mut internal: BTreeMap<&QuantityId, Vec<(&ObjectId, &ObjectId)>> = BTreeMap::new();
        for (a, b) in &edges {
            for q in hosts.get(a).into_iter().flatten() {
                if q.granules.contains(b) {
                    internal.entry(&q.id).or_default().push((a, b));
                }
            }
        }
        let mut out = Vec::new();
        for q in kb.quantities.values().filter(|q| q.is_live_at(t)) {
            let members = self.object_granules(q);
            if members.len() < MIN_GRANULES {
                continue;
            }
            let internal = internal.remove(&q.id).unwrap_or_default();
            let touched: BTreeSet<&ObjectId> = internal.iter().flat_map(|&(a, b)| [a, b]).collect();
            let isolated: Vec<&ObjectId> = members
                .iter()
                .copied()
                .filter(|g| !touched.contains(g))
                .collect();
            if !isolated.is_empty() {
                let mut subjects = vec![q.id.to_string()];
                subjects.extend(isolated.iter().map(|g| g.to_string()));
                out.push(Violation::new(
                    Rule::ExternalConnection,
                    subjects,
                    Some(t),
                    format!(
                        "{} granule(s) of {} touch no other granule of it",
                        isolated.len(),
                        q.id
                    ),
                ));
            }
            let mut sets = DisjointSets::new(touched.iter().map(|g| g.as_str()));
            for (a, b) in internal {
                sets.union(a.as_str(), b.as_str());
            }
            let components = sets.component_count();
            if components > 1 {
                out.push(Violation::new(
                    Rule::Connectivity,
                    [&q.id],
                    Some(t),
                    format!(
                        "granules of {} form {components} disconnected clusters",
                        q.id
                    ),
                ));
            }
        }
        finish(out)
    }

    /// No two distinct live quantities of the same kind share a granule or
    /// touch across their granule sets.
    pub fn check_maximality(&self, t: TimePoint) -> Vec<Violation> {
        let hosts = self.hosts_at(t);
        // Candidate pairs keyed in id order; the flag records a shared granule.
        let mut pairs: BTreeMap<(&QuantityId, &QuantityId), (&QuantityInst, &QuantityInst, bool)> =
            BTreeMap::new();
        let mut note = |x: &'a QuantityInst, y: &'a QuantityInst, shares: bool| {
            if x.id == y.id || x.kind != y.kind {
                return;
            }
            let (x, y) = if x.id < y.id { (x, y) } else { (y, x) };
            let entry = pairs.entry((&x.id, &y.id)).or_insert((x, y, false));
            entry.2 |= shares;
        };
        for group in hosts.values() {
            for (i, &x) in group.iter().enumerate() {
                for &y in &group[i + 1..] {
                    note(x, y, true);
                }
            }
        }
        let edges = self.kb.adjacency_at(t);
        for (a, b) in &edges {
            for &x in hosts.get(a).into_iter().flatten() {
                for &y in hosts.get(b).into_iter().flatten() {
                    note(x, y, false);
                }
            }
        }
        let mut out = Vec::new();
        for (x, y, shares) in pairs.into_values() {
            if self.linked(x, y) {
                continue;
            }
            let how = if shares {
                "overlap"
            } else {
                "are externally connected"
            };
            out.push(Violation::new(
                Rule::MaximalitySameKind,
                [&x.id, &y.id],
                Some(t),
                format!("{} and {} of kind {} {how}", x.id, y.id, x.kind),
            ));
        }
        finish(out)
    }

    /// Live quantities at `t` holding each granule.
    fn hosts_at(&self, t: TimePoint) -> BTreeMap<&'a ObjectId, Vec<&'a QuantityInst>> {
        let mut hosts: BTreeMap<&ObjectId, Vec<&QuantityInst>> = BTreeMap::new();
        for q in self.kb.quantities.values().filter(|q| q.is_live_at(t)) {
            for g in &q.granules {
                hosts.entry(g).or_default().push(q);
            }
        }
        hosts
    }

    /// Consistency between quantity lifetimes and the event log.
    pub fn check_history(&self) -> Vec<Violation> {
        let kb = self.kb;
        let mut out = Vec::new();
        let h1 = |subjects: Vec<String>, at: Option<TimePoint>, msg: String| {
            Violation::new(Rule::H1History, subjects, at, msg)
        };

        let mut last: Option<TimePoint> = None;
        let mut terminated_by: BTreeMap<&str, Vec<(&str, TimePoint)>> = BTreeMap::new();
        for e in &kb.log {
            let at = Some(e.at);
            if last.is_some_and(|l| e.at <= l) {
                out.push(h1(
                    vec![e.id.to_string()],
                    at,
                    format!("event {} does not follow its predecessor in time", e.id),
                ));
            }
            last = Some(e.at);
            let shape_ok = match e.kind {
                EventKind::Creation => e.donors.is_empty() && e.created.len() == 1,
                EventKind::GranuleTransfer => !e.donors.is_empty() && !e.created.is_empty(),
            };
            if !shape_ok {
                out.push(h1(
                    vec![e.id.to_string()],
                    at,
                    format!(
                        "event {} has the wrong number of donors or created quantities",
                        e.id
                    ),
                ));
            }
            let mut donor_granules = BTreeSet::new();
            for d in &e.donors {
                terminated_by
                    .entry(d.as_str())
                    .or_default()
                    .push((e.id.as_str(), e.at));
                match kb.quantities.get(d) {
                    None => out.push(h1(
                        vec![e.id.to_string(), d.to_string()],
                        at,
                        format!("donor {d} of {} is not a known quantity", e.id),
                    )),
                    Some(q) => {
                        donor_granules.extend(&q.granules);
                        if q.created_at >= e.at {
                            out.push(h1(
                                vec![e.id.to_string(), d.to_string()],
                                at,
                                format!("donor {d} is not live before {}", e.id),
                            ));
                        }
                        if q.terminated_at != Some(e.at) {
                            out.push(h1(
                                vec![e.id.to_string(), d.to_string()],
                                at,
                                format!("donor {d} is not terminated at {}", e.at),
                            ));
                        }
                    }
                }
            }
            for g in &e.discarded {
                if !donor_granules.contains(g) {
                    out.push(h1(
                        vec![e.id.to_string(), g.to_string()],
                        at,
                        format!("discarded {g} was not a donor granule of {}", e.id),
                    ));
                }
            }
            for c in &e.created {
                let Some(q) = kb.quantities.get(&c.id) else {
                    out.push(h1(
                        vec![e.id.to_string(), c.id.to_string()],
                        at,
                        format!("event {} creates unknown quantity {}", e.id, c.id),
                    ));
                    continue;
                };
                let mut problems = Vec::new();
                if q.creation_event != e.id {
                    problems.push(format!("names {} as its creation event", q.creation_event));
                }
                if q.created_at != e.at {
                    problems.push(format!("was created at {}", q.created_at));
                }
                if q.kind != c.kind {
                    problems.push(format!("has kind {} instead of {}", q.kind, c.kind));
                }
                if q.granules != c.granules {
                    let gained: Vec<&str> = q
                        .granules
                        .difference(&c.granules)
                        .map(|g| g.as_str())
                        .collect();
                    let lost: Vec<&str> = c
                        .granules
                        .difference(&q.granules)
                        .map(|g| g.as_str())
                        .collect();
                    problems.push(format!(
                        "has granules differing from its creation (+[{}] -[{}])",
                        gained.join(", "),
                        lost.join(", ")
                    ));
                }
                for p in problems {
                    out.push(h1(
                        vec![q.id.to_string(), e.id.to_string()],
                        at,
                        format!("quantity {} {p}", q.id),
                    ));
                }
            }
        }

        for q in kb.quantities.values() {
            let created_here = kb
                .event(q.creation_event.as_str())
                .is_some_and(|e| e.creates(q.id.as_str()).is_some());
            if !created_here {
                out.push(h1(
                    vec![q.id.to_string()],
                    Some(q.created_at),
                    format!("quantity {} has no creation event recording it", q.id),
                ));
            }
            let ends = terminated_by
                .get(q.id.as_str())
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            if ends.len() > 1 {
                out.push(h1(
                    vec![q.id.to_string()],
                    q.terminated_at,
                    format!("quantity {} is a donor in {} events", q.id, ends.len()),
                ));
            }
            if let Some(end) = q.terminated_at {
                if end <= q.created_at {
                    out.push(h1(
                        vec![q.id.to_string()],
                        Some(end),
                        format!("quantity {} terminates before it is created", q.id),
                    ));
                }
                if !ends.iter().any(|&(_, t)| t == end) {
                    out.push(h1(
                        vec![q.id.to_string()],
                        Some(end),
                        format!(
                            "quantity {} is terminated at {end} without a terminating event",
                            q.id
                        ),
                    ));
                }
            }
        }
        finish(out)
    }

    fn temporal(&self, times: &BTreeSet<TimePoint>) -> Vec<Violation> {
        times
            .iter()
            .flat_map(|&t| {
                let mut v = self.check_connectivity(t);
                v.extend(self.check_maximality(t));
                v
            })
            .collect()
    }

    fn atemporal(&self) -> Vec<Violation> {
        let mut all = self.check_typing();
        all.extend(self.check_supplementation());
        all.extend(self.check_subquantity_inclusion());
        all.extend(self.check_ggd());
        all.extend(self.check_history());
        all
    }

    fn report(&self, mut violations: Vec<Violation>, times: &BTreeSet<TimePoint>) -> Report {
        violations = finish(violations);
        let worlds = times
            .iter()
            .map(|&t| WorldSummary {
                at: t,
                live_quantities: self
                    .kb
                    .quantities
                    .values()
                    .filter(|q| q.is_live_at(t))
                    .count(),
                violations: violations.iter().filter(|v| v.at == Some(t)).count(),
            })
            .collect();
        Report { violations, worlds }
    }

    /// Runs every rule over the whole history.
    pub fn validate_all(&self) -> Report {
        let times = self.kb.change_points();
        let mut all = self.atemporal();
        all.extend(self.temporal(&times));
        self.report(all, &times)
    }

    /// Runs the history-independent rules plus the world-level rules at `t`.
    pub fn validate_world(&self, t: TimePoint) -> Report {
        let times = BTreeSet::from([t]);
        let mut all = self.atemporal();
        all.extend(self.temporal(&times));
        self.report(all, &times)
    }
}

impl Kb {
    pub fn validator(&self) -> Validator<'_> {
        Validator::new(self)
    }

    pub fn validate(&self) -> Report {
        Validator::new(self).validate_all()
    }
}
