//! Historical relations derived from the event log.
//!
//! Each granule transfer is the truthmaker for one `inheritedGranulesFrom`
//! edge per (donor, inheritor) pair that share a granule. Sub-portion edges
//! are the ones where the inheritor has the donor's kind and only donor
//! granules. Closures are computed once per [`Provenance`] snapshot; because
//! the snapshot borrows the KB, appending to the log requires a new snapshot.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{KbError, Result};
use crate::event::EventKind;
use crate::graph::DisjointSets;
use crate::ids::{EventId, ObjectId, QuantityId, TimePoint};
use crate::model::Kb;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ProvenanceEdge {
    pub inheritor: QuantityId,
    pub donor: QuantityId,
    pub event: EventId,
    /// Every granule of the inheritor came from this donor.
    pub complete_inheritance: bool,
    /// Every granule of the donor went to this inheritor.
    pub complete_donation: bool,
    pub is_sub_portion: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Origin {
    OriginalPortion,
    SubPortion,
}

impl std::fmt::Display for Origin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Origin::OriginalPortion => "OriginalPortion",
            Origin::SubPortion => "SubPortion",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Episode {
    pub quantity: QuantityId,
    pub from: TimePoint,
    pub to: Option<TimePoint>,
    pub in_event: EventId,
    pub out_event: Option<EventId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GranuleHistory {
    pub object: ObjectId,
    pub episodes: Vec<Episode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Phase {
    Connected,
    Scattered,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConstitutionView {
    pub collection_id: String,
    pub quantity: QuantityId,
    pub at: TimePoint,
    pub members: BTreeSet<ObjectId>,
    pub phase: Phase,
}

type Closure = BTreeMap<QuantityId, BTreeSet<QuantityId>>;

/// A read-only provenance view over one KB snapshot.
pub struct Provenance<'a> {
    kb: &'a Kb,
    edges: Vec<ProvenanceEdge>,
    ancestors: OnceLock<Closure>,
    descendants: OnceLock<Closure>,
    sub_ancestors: OnceLock<Closure>,
    sub_descendants: OnceLock<Closure>,
}

/// One edge per (donor, inheritor) pair sharing a transferred granule.
pub fn derive_edges(kb: &Kb) -> Vec<ProvenanceEdge> {
    let mut edges = Vec::new();
    for e in kb
        .event_log()
        .iter()
        .filter(|e| e.kind == EventKind::GranuleTransfer)
    {
        for d in &e.donors {
            let Some(donor) = kb.quantity(d.as_str()) else {
                continue;
            };
            for c in &e.created {
                if c.id == *d || c.granules.is_disjoint(&donor.granules) {
                    continue;
                }
                let complete_inheritance = c.granules.is_subset(&donor.granules);
                edges.push(ProvenanceEdge {
                    inheritor: c.id.clone(),
                    donor: d.clone(),
                    event: e.id.clone(),
                    complete_inheritance,
                    complete_donation: donor.granules.is_subset(&c.granules),
                    is_sub_portion: complete_inheritance && c.kind == donor.kind,
                });
            }
        }
    }
    edges.sort();
    edges
}

fn closure<'e>(pairs: impl Iterator<Item = (&'e QuantityId, &'e QuantityId)>) -> Closure {
    let mut direct: BTreeMap<&QuantityId, BTreeSet<&QuantityId>> = BTreeMap::new();
    for (from, to) in pairs {
        direct.entry(from).or_default().insert(to);
    }
    let mut out = Closure::new();
    for &start in direct.keys() {
        let mut seen: BTreeSet<QuantityId> = BTreeSet::new();
        let mut queue: VecDeque<&QuantityId> = direct[start].iter().copied().collect();
        while let Some(next) = queue.pop_front() {
            if seen.insert(next.clone()) {
                queue.extend(direct.get(next).into_iter().flatten().copied());
            }
        }
        out.insert(start.clone(), seen);
    }
    out
}

impl<'a> Provenance<'a> {
    pub fn new(kb: &'a Kb) -> Self {
        Provenance {
            kb,
            edges: derive_edges(kb),
            ancestors: OnceLock::new(),
            descendants: OnceLock::new(),
            sub_ancestors: OnceLock::new(),
            sub_descendants: OnceLock::new(),
        }
    }

    pub fn edges(&self) -> &[ProvenanceEdge] {
        &self.edges
    }

    fn require(&self, q: &str) -> Result<()> {
        if self.kb.quantity(q).is_none() {
            return Err(KbError::UnknownQuantity(q.into()));
        }
        Ok(())
    }

    fn lookup(
        &self,
        q: &str,
        transitive: bool,
        memo: &OnceLock<Closure>,
        sub_only: bool,
        upward: bool,
    ) -> Result<BTreeSet<QuantityId>> {
        self.require(q)?;
        let relevant = self.edges.iter().filter(|e| !sub_only || e.is_sub_portion);
        if !transitive {
            return Ok(relevant
                .filter_map(|e| {
                    let (from, to) = if upward {
                        (&e.inheritor, &e.donor)
                    } else {
                        (&e.donor, &e.inheritor)
                    };
                    (from.as_str() == q).then(|| to.clone())
                })
                .collect());
        }
        let table = memo.get_or_init(|| {
            closure(relevant.map(|e| {
                if upward {
                    (&e.inheritor, &e.donor)
                } else {
                    (&e.donor, &e.inheritor)
                }
            }))
        });
        Ok(table.get(q).cloned().unwrap_or_default())
    }

    /// Quantities `q` inherited granules from, directly or through a chain.
    pub fn inherited_from(&self, q: &str, transitive: bool) -> Result<BTreeSet<QuantityId>> {
        self.lookup(q, transitive, &self.ancestors, false, true)
    }

    /// Inverse of [`Provenance::inherited_from`].
    pub fn donated_to(&self, q: &str, transitive: bool) -> Result<BTreeSet<QuantityId>> {
        self.lookup(q, transitive, &self.descendants, false, false)
    }

    /// Quantities that are sub-portions of `q`.
    pub fn sub_portions_of(&self, q: &str, transitive: bool) -> Result<BTreeSet<QuantityId>> {
        self.lookup(q, transitive, &self.sub_descendants, true, false)
    }

    /// Quantities `q` is a sub-portion of.
    pub fn sub_portion_of(&self, q: &str, transitive: bool) -> Result<BTreeSet<QuantityId>> {
        self.lookup(q, transitive, &self.sub_ancestors, true, true)
    }

    pub fn classify_origin(&self, q: &str) -> Result<Origin> {
        self.require(q)?;
        let sub = self
            .edges
            .iter()
            .any(|e| e.is_sub_portion && e.inheritor.as_str() == q);
        Ok(if sub {
            Origin::SubPortion
        } else {
            Origin::OriginalPortion
        })
    }

    pub fn classify_all(&self) -> BTreeMap<QuantityId, Origin> {
        self.kb
            .quantities()
            .map(|q| {
                let origin = self.classify_origin(q.id.as_str()).expect("known quantity");
                (q.id.clone(), origin)
            })
            .collect()
    }

    /// Every quantity `o` has been a granule of, in chronological order.
    pub fn granule_history(&self, o: &str) -> Result<GranuleHistory> {
        if self.kb.object(o).is_none() {
            return Err(KbError::UnknownObject(o.into()));
        }
        let mut episodes: Vec<Episode> = self
            .kb
            .quantities()
            .filter(|q| q.granules.contains(o))
            .map(|q| Episode {
                quantity: q.id.clone(),
                from: q.created_at,
                to: q.terminated_at,
                in_event: q.creation_event.clone(),
                out_event: q.terminated_at.and_then(|end| {
                    self.kb
                        .event_log()
                        .iter()
                        .find(|e| e.at == end && e.donors.contains(&q.id))
                        .map(|e| e.id.clone())
                }),
            })
            .collect();
        episodes.sort_by(|x, y| (x.from, &x.quantity).cmp(&(y.from, &y.quantity)));
        Ok(GranuleHistory {
            object: o.into(),
            episodes,
        })
    }

    /// All granules of the quantities hosting `o` at `t`, `o` included.
    pub fn cohort_at(&self, o: &str, t: TimePoint) -> Result<BTreeSet<ObjectId>> {
        if self.kb.object(o).is_none() {
            return Err(KbError::UnknownObject(o.into()));
        }
        let hosts = self.kb.hosts_at(o, t);
        if hosts.is_empty() {
            return Err(KbError::NotAGranuleAt(o.into(), t));
        }
        Ok(hosts
            .iter()
            .filter_map(|h| self.kb.quantity(h.as_str()))
            .flat_map(|q| q.granules.iter().cloned())
            .collect())
    }

    /// Shared provenance of two quantities; each counts as its own ancestor.
    pub fn common_ancestors(&self, q1: &str, q2: &str) -> Result<BTreeSet<QuantityId>> {
        let mut a = self.inherited_from(q1, true)?;
        a.insert(q1.into());
        let mut b = self.inherited_from(q2, true)?;
        b.insert(q2.into());
        Ok(a.intersection(&b).cloned().collect())
    }

    /// The collection constituting `q`, with its phase computed from the
    /// adjacency active at `t`.
    pub fn constitution_view(&self, q: &str, t: TimePoint) -> Result<ConstitutionView> {
        let quantity = self
            .kb
            .quantity(q)
            .ok_or_else(|| KbError::UnknownQuantity(q.into()))?;
        if t < quantity.created_at {
            return Err(KbError::NotLiveAt(q.into(), t));
        }
        let members = quantity.granules.clone();
        let mut sets = DisjointSets::new(members.iter().map(|m| m.as_str()));
        for (a, b) in self.kb.adjacency_at(t) {
            sets.union(a.as_str(), b.as_str());
        }
        let phase = if sets.component_count() <= 1 {
            Phase::Connected
        } else {
            Phase::Scattered
        };
        Ok(ConstitutionView {
            collection_id: format!("granules({q})"),
            quantity: q.into(),
            at: t,
            members,
            phase,
        })
    }
}

impl Kb {
    pub fn provenance(&self) -> Provenance<'_> {
        Provenance::new(self)
    }
}
