//! Scenario files (`.mp`): a line-oriented text format for declaring kinds,
//! objects, adjacency, sub-quantity links and events.
//!
//! ```text
//! # comments run to end of line
//! object-kind SedimentaryGrain
//! quantity-kind PortionOfRock requires SedimentaryGrain
//! object grain1 : SedimentaryGrain at t0
//! object grain2 : SedimentaryGrain
//! connect grain1 grain2 at t0
//! quantity rock1 : PortionOfRock at t0 granules { grain1, grain2 }
//! event split at t1 {
//!   donor rock1
//!   create rock2 : PortionOfRock granules { grain1, grain2 }
//! }
//! ```
//!
//! Names may be used before the statement declaring them. A `quantity`
//! statement is shorthand for a creation event named `create-<name>`.

mod load;
mod parser;

use std::fmt;

use serde::Serialize;

use crate::event::NewQuantity;
use crate::ids::{EventId, KindName, ObjectId, QuantityId, TimePoint};
use crate::model::KindMeta;

pub use load::{load, LoadError};
pub use parser::{parse, parse_bytes};

/// The case study shipped with the crate: a reservoir rock split twice,
/// tracking one sedimentary grain through both splits.
pub const CASE_STUDY: &str = include_str!("../../scenarios/casestudy.mp");

/// 1-based line and column (columns count Unicode scalar values).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize)]
pub struct Pos {
    pub line: u32,
    pub column: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spanned<T> {
    pub pos: Pos,
    pub node: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseDiagnostic {
    pub line: u32,
    pub column: u32,
    pub severity: Severity,
    pub message: String,
    /// The offending source line, without its terminator.
    pub snippet: String,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}:{}: error: {}", self.line, self.column, self.message)?;
        writeln!(f, "  | {}", self.snippet)?;
        let pad: String = self
            .snippet
            .chars()
            .take(self.column.saturating_sub(1) as usize)
            .map(|c| if c == '\t' { '\t' } else { ' ' })
            .collect();
        write!(f, "  | {pad}^")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KindStmt {
    pub name: KindName,
    pub meta: KindMeta,
    pub requires: Vec<KindName>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectStmt {
    pub id: ObjectId,
    pub kind: KindName,
    pub at: Option<TimePoint>,
}

impl ObjectStmt {
    pub fn created_at(&self) -> TimePoint {
        self.at.unwrap_or(TimePoint::ZERO)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AdjacencyOp {
    Disconnect,
    Connect,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyStmt {
    pub op: AdjacencyOp,
    pub a: ObjectId,
    pub b: ObjectId,
    pub at: TimePoint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubQuantityStmt {
    pub part: QuantityId,
    pub whole: QuantityId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferStmt {
    pub id: EventId,
    pub at: TimePoint,
    pub donors: Vec<QuantityId>,
    pub created: Vec<NewQuantity>,
    pub discarded: Vec<ObjectId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventStmt {
    /// `quantity NAME : KIND at tN granules { … }`
    Creation {
        quantity: NewQuantity,
        at: TimePoint,
    },
    Transfer(TransferStmt),
}

impl EventStmt {
    pub fn at(&self) -> TimePoint {
        match self {
            EventStmt::Creation { at, .. } => *at,
            EventStmt::Transfer(t) => t.at,
        }
    }

    pub fn id(&self) -> EventId {
        match self {
            EventStmt::Creation { quantity, .. } => creation_event_id(&quantity.id),
            EventStmt::Transfer(t) => t.id.clone(),
        }
    }

    pub fn created(&self) -> &[NewQuantity] {
        match self {
            EventStmt::Creation { quantity, .. } => std::slice::from_ref(quantity),
            EventStmt::Transfer(t) => &t.created,
        }
    }
}

/// Event id of the creation a `quantity` statement stands for. The hyphen
/// keeps it disjoint from names written in scenario files.
pub fn creation_event_id(q: &QuantityId) -> EventId {
    EventId::new(format!("create-{q}"))
}

/// A parsed scenario with every name reference resolved.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Scenario {
    pub kinds: Vec<Spanned<KindStmt>>,
    pub objects: Vec<Spanned<ObjectStmt>>,
    pub adjacency: Vec<Spanned<AdjacencyStmt>>,
    pub subquantities: Vec<Spanned<SubQuantityStmt>>,
    /// Creations and transfers in source order.
    pub events: Vec<Spanned<EventStmt>>,
}

impl Scenario {
    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
            && self.objects.is_empty()
            && self.adjacency.is_empty()
            && self.subquantities.is_empty()
            && self.events.is_empty()
    }

    /// The `quantity` statements, i.e. creations from free objects.
    pub fn quantity_creations(&self) -> impl Iterator<Item = (&NewQuantity, TimePoint)> {
        self.events.iter().filter_map(|e| match &e.node {
            EventStmt::Creation { quantity, at } => Some((quantity, *at)),
            EventStmt::Transfer(_) => None,
        })
    }

    pub fn quantity_count(&self) -> usize {
        self.events.iter().map(|e| e.node.created().len()).sum()
    }

    /// Renders the scenario in normalized form. Parsing the output yields a
    /// scenario that renders to the same text.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let list = |items: &mut dyn Iterator<Item = &str>| items.collect::<Vec<_>>().join(", ");
        for k in &self.kinds {
            match k.node.meta {
                KindMeta::ObjectKind => out.push_str(&format!("object-kind {}\n", k.node.name)),
                KindMeta::QuantityKind if k.node.requires.is_empty() => {
                    out.push_str(&format!("quantity-kind {}\n", k.node.name))
                }
                KindMeta::QuantityKind => out.push_str(&format!(
                    "quantity-kind {} requires {}\n",
                    k.node.name,
                    list(&mut k.node.requires.iter().map(|r| r.as_str()))
                )),
            }
        }
        for o in &self.objects {
            match o.node.at {
                Some(at) => {
                    out.push_str(&format!("object {} : {} at {at}\n", o.node.id, o.node.kind))
                }
                None => out.push_str(&format!("object {} : {}\n", o.node.id, o.node.kind)),
            }
        }
        for a in &self.adjacency {
            let op = match a.node.op {
                AdjacencyOp::Connect => "connect",
                AdjacencyOp::Disconnect => "disconnect",
            };
            out.push_str(&format!(
                "{op} {} {} at {}\n",
                a.node.a, a.node.b, a.node.at
            ));
        }
        let granules = |q: &NewQuantity| {
            format!(
                "granules {{ {} }}",
                list(&mut q.granules.iter().map(|g| g.as_str()))
            )
        };
        for e in &self.events {
            match &e.node {
                EventStmt::Creation { quantity, at } => out.push_str(&format!(
                    "quantity {} : {} at {at} {}\n",
                    quantity.id,
                    quantity.kind,
                    granules(quantity)
                )),
                EventStmt::Transfer(t) => {
                    out.push_str(&format!("event {} at {} {{\n", t.id, t.at));
                    let donors: Vec<&str> = t.donors.iter().map(|d| d.as_str()).collect();
                    out.push_str(&format!("  donor {}\n", donors.join(" ")));
                    for c in &t.created {
                        out.push_str(&format!("  create {} : {} {}\n", c.id, c.kind, granules(c)));
                    }
                    if !t.discarded.is_empty() {
                        out.push_str(&format!(
                            "  discard {{ {} }}\n",
                            list(&mut t.discarded.iter().map(|d| d.as_str()))
                        ));
                    }
                    out.push_str("}\n");
                }
            }
        }
        for s in &self.subquantities {
            out.push_str(&format!(
                "subquantity {} of {}\n",
                s.node.part, s.node.whole
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagnostic_rendering_points_at_column() {
        let d = ParseDiagnostic {
            line: 3,
            column: 16,
            severity: Severity::Error,
            message: "expected a kind name after `:`".into(),
            snippet: "quantity rock1 :".into(),
        };
        let text = d.to_string();
        assert!(text.starts_with("3:16: error: expected a kind name"));
        assert!(text.ends_with(&format!("  | {}^", " ".repeat(15))));
    }
}
