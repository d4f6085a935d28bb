//! Append-only event log and the transitions that create and terminate
//! quantities.
//!
//! Events are the only way quantities come into being or end. A creation
//! event builds one quantity from free objects; a granule transfer terminates
//! its donors and creates inheritors from their granules. Donor granules that
//! end up in no inheritor are freed.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{KbError, Result};
use crate::ids::{EventId, KindName, ObjectId, QuantityId, TimePoint};
use crate::model::{Kb, KindMeta, Mode, QuantityInst, SubQuantityAssertion, MIN_GRANULES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EventKind {
    Creation,
    GranuleTransfer,
}

/// A quantity as described by the event that creates it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewQuantity {
    pub id: QuantityId,
    pub kind: KindName,
    pub granules: BTreeSet<ObjectId>,
}

impl NewQuantity {
    pub fn new<I, S>(id: impl Into<QuantityId>, kind: impl Into<KindName>, granules: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<ObjectId>,
    {
        NewQuantity {
            id: id.into(),
            kind: kind.into(),
            granules: granules.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRec {
    pub id: EventId,
    pub at: TimePoint,
    pub kind: EventKind,
    pub donors: BTreeSet<QuantityId>,
    /// Sorted by quantity id.
    pub created: Vec<NewQuantity>,
    pub discarded: BTreeSet<ObjectId>,
}

impl EventRec {
    pub fn creates(&self, q: &str) -> Option<&NewQuantity> {
        self.created.iter().find(|c| c.id.as_str() == q)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferSpec {
    pub id: EventId,
    pub donors: BTreeSet<QuantityId>,
    pub created: Vec<NewQuantity>,
    pub discarded: BTreeSet<ObjectId>,
}

impl TransferSpec {
    pub fn new<I, S>(id: impl Into<EventId>, donors: I, created: Vec<NewQuantity>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<QuantityId>,
    {
        TransferSpec {
            id: id.into(),
            donors: donors.into_iter().map(Into::into).collect(),
            created,
            discarded: BTreeSet::new(),
        }
    }

    pub fn discarding<I, S>(mut self, discarded: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<ObjectId>,
    {
        self.discarded = discarded.into_iter().map(Into::into).collect();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventInput {
    Creation { id: EventId, quantity: NewQuantity },
    Transfer(TransferSpec),
}

impl EventInput {
    pub fn id(&self) -> &EventId {
        match self {
            EventInput::Creation { id, .. } => id,
            EventInput::Transfer(spec) => &spec.id,
        }
    }

    pub fn created_ids(&self) -> Vec<&QuantityId> {
        match self {
            EventInput::Creation { quantity, .. } => vec![&quantity.id],
            EventInput::Transfer(spec) => spec.created.iter().map(|c| &c.id).collect(),
        }
    }
}

/// Historical roles played in one transfer event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RoleBinding {
    pub event: EventId,
    pub donor_roles: BTreeSet<QuantityId>,
    pub inheritor_roles: BTreeSet<QuantityId>,
    pub donated_granules: BTreeSet<ObjectId>,
}

impl Kb {
    pub fn event_log(&self) -> &[EventRec] {
        &self.log
    }

    pub fn last_event_time(&self) -> Option<TimePoint> {
        self.log.last().map(|e| e.at)
    }

    pub fn apply_creation(
        &mut self,
        id: impl Into<EventId>,
        quantity: NewQuantity,
        at: TimePoint,
    ) -> Result<&EventRec> {
        let input = EventInput::Creation {
            id: id.into(),
            quantity,
        };
        self.apply_linked(input, at, &[])
    }

    pub fn apply_transfer(&mut self, spec: TransferSpec, at: TimePoint) -> Result<&EventRec> {
        self.apply_linked(EventInput::Transfer(spec), at, &[])
    }

    /// Applies an event together with sub-quantity links that involve the
    /// quantities it creates. A created quantity may take a granule that is
    /// held by a live non-donor quantity only if one of `links` relates the two.
    /// Every link is recorded as a sub-quantity assertion.
    pub fn apply_linked(
        &mut self,
        input: EventInput,
        at: TimePoint,
        links: &[SubQuantityAssertion],
    ) -> Result<&EventRec> {
        let (id, kind, donors, mut created, discarded) = match input {
            EventInput::Creation { id, quantity } => (
                id,
                EventKind::Creation,
                BTreeSet::new(),
                vec![quantity],
                BTreeSet::new(),
            ),
            EventInput::Transfer(spec) => (
                spec.id,
                EventKind::GranuleTransfer,
                spec.donors,
                spec.created,
                spec.discarded,
            ),
        };
        created.sort();

        if let Some(last) = self.last_event_time() {
            if at <= last {
                return Err(KbError::NonMonotonicTime { at, last });
            }
        }
        if self.id_in_use(id.as_str()) {
            return Err(KbError::DuplicateId(id.to_string()));
        }
        if kind == EventKind::GranuleTransfer {
            if donors.is_empty() {
                return Err(KbError::NoDonors);
            }
            if created.is_empty() {
                return Err(KbError::NothingCreated);
            }
        }

        let mut donated: BTreeMap<&ObjectId, &QuantityId> = BTreeMap::new();
        for d in &donors {
            let donor = self
                .quantities
                .get(d)
                .ok_or_else(|| KbError::UnknownQuantity(d.clone()))?;
            if !donor.is_live() || donor.created_at >= at {
                return Err(KbError::DonorNotLive(d.clone()));
            }
            for g in &donor.granules {
                donated.insert(g, d);
            }
        }

        let mut fresh: BTreeSet<&str> = BTreeSet::new();
        fresh.insert(id.as_str());
        for c in &created {
            if self.id_in_use(c.id.as_str()) || !fresh.insert(c.id.as_str()) {
                return Err(KbError::DuplicateId(c.id.to_string()));
            }
            self.expect_kind(&c.kind, KindMeta::QuantityKind)?;
            if self.mode == Mode::Strict && c.granules.len() < MIN_GRANULES {
                return Err(KbError::TooFewGranules {
                    quantity: c.id.clone(),
                    count: c.granules.len(),
                });
            }
            for g in &c.granules {
                let obj = self
                    .objects
                    .get(g)
                    .ok_or_else(|| KbError::UnknownObject(g.clone()))?;
                if obj.created_at > at {
                    return Err(KbError::NotLiveAt(g.to_string(), at));
                }
            }
        }

        let mut assigned: BTreeSet<&ObjectId> = BTreeSet::new();
        for g in created.iter().flat_map(|c| &c.granules).chain(&discarded) {
            if !assigned.insert(g) {
                return Err(KbError::DuplicateGranuleAssignment(g.clone()));
            }
        }
        for g in &discarded {
            if !donated.contains_key(g) {
                return Err(KbError::DiscardNotDonated(g.clone()));
            }
        }

        for c in &created {
            for g in &c.granules {
                if donated.contains_key(g) {
                    continue;
                }
                let blocking = self
                    .live_holders
                    .get(g)
                    .into_iter()
                    .flatten()
                    .find(|h| !links.iter().any(|l| l.links(&c.id, h)));
                if let Some(holder) = blocking {
                    return Err(match kind {
                        EventKind::Creation => KbError::GranuleNotFree {
                            granule: g.clone(),
                            holder: holder.clone(),
                        },
                        EventKind::GranuleTransfer => KbError::GranuleProvenanceViolation {
                            granule: g.clone(),
                            quantity: c.id.clone(),
                        },
                    });
                }
            }
            if kind == EventKind::GranuleTransfer
                && !c.granules.iter().any(|g| donated.contains_key(g))
            {
                return Err(KbError::NoInheritedGranules(c.id.clone()));
            }
        }

        let new_quantities: BTreeMap<QuantityId, QuantityInst> = created
            .iter()
            .map(|c| {
                let q = QuantityInst {
                    id: c.id.clone(),
                    kind: c.kind.clone(),
                    created_at: at,
                    terminated_at: None,
                    granules: c.granules.clone(),
                    creation_event: id.clone(),
                };
                (c.id.clone(), q)
            })
            .collect();
        for link in links {
            if !new_quantities.contains_key(&link.part) && !new_quantities.contains_key(&link.whole)
            {
                return Err(KbError::UnknownQuantity(link.part.clone()));
            }
            // Existing quantities must survive the event to overlap a new one.
            self.check_subquantity(link, |kb, q| {
                new_quantities.get(q).or_else(|| {
                    kb.quantities
                        .get(q)
                        .filter(|existing| existing.is_live() && !donors.contains(q))
                })
            })?;
        }

        // Commit.
        for d in &donors {
            let donor = self.quantities.get_mut(d).expect("checked above");
            donor.terminated_at = Some(at);
            for g in &donor.granules {
                if let Some(holders) = self.live_holders.get_mut(g) {
                    holders.remove(d);
                    if holders.is_empty() {
                        self.live_holders.remove(g);
                    }
                }
            }
        }
        for (qid, q) in new_quantities {
            for g in &q.granules {
                self.live_holders
                    .entry(g.clone())
                    .or_default()
                    .insert(qid.clone());
            }
            self.quantities.insert(qid, q);
        }
        self.subquantities.extend(links.iter().cloned());
        self.event_index.insert(id.clone(), self.log.len());
        self.log.push(EventRec {
            id,
            at,
            kind,
            donors,
            created,
            discarded,
        });
        Ok(self.log.last().expect("just pushed"))
    }

    /// Donor granules of a transfer that went to no inheritor, including the
    /// explicitly discarded ones.
    pub fn released_granules(&self, event: &EventRec) -> BTreeSet<ObjectId> {
        let assigned: BTreeSet<&ObjectId> =
            event.created.iter().flat_map(|c| &c.granules).collect();
        event
            .donors
            .iter()
            .filter_map(|d| self.quantities.get(d))
            .flat_map(|d| &d.granules)
            .filter(|g| !assigned.contains(g))
            .cloned()
            .collect()
    }

    pub fn role_binding(&self, event_id: &str) -> Option<RoleBinding> {
        let event = self.event(event_id)?;
        if event.kind != EventKind::GranuleTransfer {
            return None;
        }
        let donor_granules: BTreeSet<&ObjectId> = event
            .donors
            .iter()
            .filter_map(|d| self.quantities.get(d))
            .flat_map(|d| &d.granules)
            .collect();
        let donated_granules = event
            .created
            .iter()
            .flat_map(|c| &c.granules)
            .filter(|g| donor_granules.contains(g))
            .cloned()
            .collect();
        Some(RoleBinding {
            event: event.id.clone(),
            donor_roles: event.donors.clone(),
            inheritor_roles: event.created.iter().map(|c| c.id.clone()).collect(),
            donated_granules,
        })
    }
}

/// Sub-quantity assertions waiting for the event that creates the later of
/// their two quantities. `T` carries caller context such as a source position.
pub(crate) struct LinkPool<T> {
    pending: Vec<(SubQuantityAssertion, T)>,
}

impl<T> LinkPool<T> {
    pub(crate) fn new(links: impl IntoIterator<Item = (SubQuantityAssertion, T)>) -> Self {
        LinkPool {
            pending: links.into_iter().collect(),
        }
    }

    /// Removes and returns the links that become resolvable once `input` has
    /// created its quantities.
    pub(crate) fn take_for(
        &mut self,
        kb: &Kb,
        input: &EventInput,
    ) -> Vec<(SubQuantityAssertion, T)> {
        let created = input.created_ids();
        let known = |q: &QuantityId| created.contains(&q) || kb.quantity(q.as_str()).is_some();
        let (ready, waiting) = std::mem::take(&mut self.pending)
            .into_iter()
            .partition(|(l, _)| {
                (created.contains(&&l.part) || created.contains(&&l.whole))
                    && known(&l.part)
                    && known(&l.whole)
            });
        self.pending = waiting;
        ready
    }

    pub(crate) fn into_remaining(self) -> Vec<(SubQuantityAssertion, T)> {
        self.pending
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::KindDecl;

    fn t(n: u64) -> TimePoint {
        TimePoint(n)
    }

    fn kb_with_grains(n: usize) -> Kb {
        let mut kb = Kb::new();
        kb.declare_kind(KindDecl::object_kind("SedimentaryGrain"))
            .unwrap();
        kb.declare_kind(KindDecl::quantity_kind(
            "PortionOfRock",
            ["SedimentaryGrain"],
        ))
        .unwrap();
        for i in 1..=n {
            kb.create_object(format!("grain{i}"), "SedimentaryGrain", t(0))
                .unwrap();
        }
        kb
    }

    fn rock(id: &str, granules: &[&str]) -> NewQuantity {
        NewQuantity::new(id, "PortionOfRock", granules.iter().copied())
    }

    #[test]
    fn creation_and_split() {
        let mut kb = kb_with_grains(4);
        kb.apply_creation(
            "c1",
            rock("rock1", &["grain1", "grain2", "grain3", "grain4"]),
            t(0),
        )
        .unwrap();
        let spec = TransferSpec::new(
            "transfer1",
            ["rock1"],
            vec![
                rock("rock3", &["grain1", "grain2"]),
                rock("rock2", &["grain3", "grain4"]),
            ],
        );
        let ev = kb.apply_transfer(spec, t(1)).unwrap();
        assert_eq!(ev.created[0].id.as_str(), "rock2");
        assert_eq!(kb.quantity("rock1").unwrap().terminated_at, Some(t(1)));
        assert!(kb.quantity("rock2").unwrap().is_live_at(t(1)));
        assert_eq!(kb.event_log().len(), 2);
        let roles = kb.role_binding("transfer1").unwrap();
        assert_eq!(roles.donated_granules.len(), 4);
        assert!(kb.role_binding("c1").is_none());
        assert!(matches!(
            kb.granules_of("rock1", t(1)),
            Err(KbError::NotLiveAt(..))
        ));
    }

    #[test]
    fn creation_errors() {
        let mut kb = kb_with_grains(4);
        assert_eq!(
            kb.apply_creation("c1", rock("r", &["grain1"]), t(0))
                .unwrap_err(),
            KbError::TooFewGranules {
                quantity: "r".into(),
                count: 1
            }
        );
        assert!(matches!(
            kb.apply_creation("c1", rock("r", &["grain1", "ghost"]), t(0)),
            Err(KbError::UnknownObject(_))
        ));
        kb.apply_creation("c1", rock("r", &["grain1", "grain2"]), t(5))
            .unwrap();
        assert_eq!(
            kb.apply_creation("c2", rock("s", &["grain3", "grain4"]), t(0))
                .unwrap_err(),
            KbError::NonMonotonicTime {
                at: t(0),
                last: t(5)
            }
        );
        assert!(matches!(
            kb.apply_creation("c2", rock("s", &["grain2", "grain3"]), t(6)),
            Err(KbError::GranuleNotFree { .. })
        ));
        assert!(matches!(
            kb.apply_creation("c1", rock("s", &["grain3", "grain4"]), t(6)),
            Err(KbError::DuplicateId(_))
        ));
        assert_eq!(kb.event_log().len(), 1, "failed applies leave no trace");
    }

    #[test]
    fn permissive_mode_admits_single_granule() {
        let mut kb = kb_with_grains(2);
        kb.set_mode(Mode::Permissive);
        kb.apply_creation("c1", rock("r", &["grain1"]), t(0))
            .unwrap();
    }

    #[test]
    fn transfer_errors() {
        let mut kb = kb_with_grains(6);
        kb.apply_creation("c1", rock("rock1", &["grain1", "grain2", "grain3"]), t(0))
            .unwrap();
        kb.apply_transfer(
            TransferSpec::new("x1", ["rock1"], vec![rock("rock2", &["grain1", "grain2"])]),
            t(1),
        )
        .unwrap();
        // donor already terminated
        let err = kb
            .apply_transfer(
                TransferSpec::new("x2", ["rock1"], vec![rock("rock3", &["grain1", "grain2"])]),
                t(2),
            )
            .unwrap_err();
        assert_eq!(err, KbError::DonorNotLive("rock1".into()));

        let dup = TransferSpec::new(
            "x2",
            ["rock2"],
            vec![
                rock("a", &["grain1", "grain5"]),
                rock("b", &["grain1", "grain2"]),
            ],
        );
        assert_eq!(
            kb.apply_transfer(dup, t(2)).unwrap_err(),
            KbError::DuplicateGranuleAssignment("grain1".into())
        );

        kb.apply_creation("c2", rock("other", &["grain5", "grain6"]), t(2))
            .unwrap();
        let stolen = TransferSpec::new("x3", ["rock2"], vec![rock("a", &["grain1", "grain5"])]);
        assert_eq!(
            kb.apply_transfer(stolen, t(3)).unwrap_err(),
            KbError::GranuleProvenanceViolation {
                granule: "grain5".into(),
                quantity: "a".into()
            }
        );
        let unrelated = TransferSpec::new(
            "x3",
            ["rock2"],
            vec![
                rock("a", &["grain1", "grain2"]),
                rock("b", &["grain3", "grain4"]),
            ],
        );
        assert_eq!(
            kb.apply_transfer(unrelated, t(3)).unwrap_err(),
            KbError::NoInheritedGranules("b".into())
        );
        let bad_discard =
            TransferSpec::new("x3", ["rock2"], vec![rock("a", &["grain1", "grain2"])])
                .discarding(["grain3"]);
        assert_eq!(
            kb.apply_transfer(bad_discard, t(3)).unwrap_err(),
            KbError::DiscardNotDonated("grain3".into())
        );
        assert_eq!(
            kb.apply_transfer(TransferSpec::new("x3", Vec::<&str>::new(), vec![]), t(3))
                .unwrap_err(),
            KbError::NoDonors
        );
    }

    #[test]
    fn freed_granules_become_available() {
        let mut kb = kb_with_grains(4);
        kb.apply_creation("c1", rock("rock1", &["grain1", "grain2", "grain3"]), t(0))
            .unwrap();
        kb.apply_transfer(
            TransferSpec::new("x1", ["rock1"], vec![rock("rock2", &["grain1", "grain2"])]),
            t(1),
        )
        .unwrap();
        let ev = kb.event("x1").unwrap().clone();
        assert_eq!(kb.released_granules(&ev), BTreeSet::from(["grain3".into()]));
        kb.apply_creation("c2", rock("rock3", &["grain3", "grain4"]), t(2))
            .unwrap();
    }

    #[test]
    fn linked_creation_may_share_granules() {
        let mut kb = Kb::new();
        kb.declare_kind(KindDecl::object_kind("Molecule")).unwrap();
        kb.declare_kind(KindDecl::quantity_kind("Wine", Vec::<&str>::new()))
            .unwrap();
        kb.declare_kind(KindDecl::quantity_kind("Alcohol", Vec::<&str>::new()))
            .unwrap();
        for m in ["e1", "e2", "w1", "w2"] {
            kb.create_object(m, "Molecule", t(0)).unwrap();
        }
        kb.apply_creation(
            "c1",
            NewQuantity::new("wine", "Wine", ["e1", "e2", "w1", "w2"]),
            t(0),
        )
        .unwrap();
        let alcohol = EventInput::Creation {
            id: "c2".into(),
            quantity: NewQuantity::new("alcohol", "Alcohol", ["e1", "e2"]),
        };
        assert!(matches!(
            kb.apply_linked(alcohol.clone(), t(1), &[]),
            Err(KbError::GranuleNotFree { .. })
        ));
        kb.apply_linked(
            alcohol,
            t(1),
            &[SubQuantityAssertion::new("alcohol", "wine")],
        )
        .unwrap();
        assert_eq!(kb.subquantities().count(), 1);
        assert_eq!(kb.hosts_at("e1", t(1)).len(), 2);
    }
}
