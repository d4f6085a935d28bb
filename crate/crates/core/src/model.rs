//! The typed entity store: kinds, objects, quantities, adjacency and
//! sub-quantity assertions, plus the world view at a time point.
//!
//! Every mutation goes through `&mut Kb`, so there is exactly one writer.
//! Quantities are only ever created by events (see [`crate::event`]); this
//! module owns everything else.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{KbError, Result};
use crate::event::EventRec;
use crate::ids::{EventId, KindName, ObjectId, QuantityId, TimePoint};

/// Minimum number of distinct granules a quantity must have.
pub const MIN_GRANULES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum KindMeta {
    QuantityKind,
    ObjectKind,
}

impl KindMeta {
    pub fn describe(self) -> &'static str {
        match self {
            KindMeta::QuantityKind => "a quantity kind",
            KindMeta::ObjectKind => "an object kind",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KindDecl {
    pub name: KindName,
    pub meta: KindMeta,
    /// Object kinds every instance must have at least one granule of.
    /// Always empty for object kinds.
    pub required_granule_kinds: BTreeSet<KindName>,
}

impl KindDecl {
    pub fn object_kind(name: impl Into<KindName>) -> Self {
        KindDecl {
            name: name.into(),
            meta: KindMeta::ObjectKind,
            required_granule_kinds: BTreeSet::new(),
        }
    }

    pub fn quantity_kind<I, S>(name: impl Into<KindName>, requires: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<KindName>,
    {
        KindDecl {
            name: name.into(),
            meta: KindMeta::QuantityKind,
            required_granule_kinds: requires.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ObjectInst {
    pub id: ObjectId,
    pub kind: KindName,
    pub created_at: TimePoint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantityInst {
    pub id: QuantityId,
    pub kind: KindName,
    pub created_at: TimePoint,
    pub terminated_at: Option<TimePoint>,
    /// Fixed at creation; never mutated.
    pub granules: BTreeSet<ObjectId>,
    pub creation_event: EventId,
}

impl QuantityInst {
    /// `created_at <= t < terminated_at` (open-ended when not terminated).
    pub fn is_live_at(&self, t: TimePoint) -> bool {
        self.created_at <= t && self.terminated_at.is_none_or(|end| t < end)
    }

    pub fn is_live(&self) -> bool {
        self.terminated_at.is_none()
    }

    pub fn status_at(&self, t: TimePoint) -> Status {
        if t < self.created_at {
            Status::NotYetCreated
        } else if self.is_live_at(t) {
            Status::Live
        } else {
            Status::Historical
        }
    }

    /// Whether the lifetimes `[created, terminated)` of two quantities share a tick.
    pub fn overlaps(&self, other: &QuantityInst) -> bool {
        let start = self.created_at.max(other.created_at);
        let ends_after = |q: &QuantityInst| q.terminated_at.is_none_or(|end| start < end);
        ends_after(self) && ends_after(other)
    }
}

/// Symmetric external connection between two objects over `[from, to)`.
/// Stored with `a < b`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AdjacencyAssertion {
    pub a: ObjectId,
    pub b: ObjectId,
    pub from: TimePoint,
    pub to: Option<TimePoint>,
}

impl AdjacencyAssertion {
    pub fn is_active_at(&self, t: TimePoint) -> bool {
        self.from <= t && self.to.is_none_or(|end| t < end)
    }
}

pub(crate) fn ordered_pair(a: ObjectId, b: ObjectId) -> (ObjectId, ObjectId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SubQuantityAssertion {
    pub part: QuantityId,
    pub whole: QuantityId,
}

impl SubQuantityAssertion {
    pub fn new(part: impl Into<QuantityId>, whole: impl Into<QuantityId>) -> Self {
        SubQuantityAssertion {
            part: part.into(),
            whole: whole.into(),
        }
    }

    pub fn links(&self, x: &QuantityId, y: &QuantityId) -> bool {
        (&self.part == x && &self.whole == y) || (&self.part == y && &self.whole == x)
    }
}

/// How strictly the event engine enforces the granule floor.
///
/// `Permissive` admits quantities with fewer than [`MIN_GRANULES`] granules so
/// that the validator can report them; everything else is enforced the same.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Strict,
    Permissive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Status {
    Live,
    Historical,
    NotYetCreated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct QuantityState {
    pub id: QuantityId,
    pub kind: KindName,
    pub status: Status,
    pub created_at: TimePoint,
    pub terminated_at: Option<TimePoint>,
    pub granules: BTreeSet<ObjectId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GranuleOf {
    pub granule: ObjectId,
    pub quantity: QuantityId,
}

/// Snapshot of the knowledge base at one time point.
///
/// Past and present entities are included (terminated quantities with
/// historical status); entities created after `at` are not, and terminations
/// after `at` are not shown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WorldView {
    pub at: TimePoint,
    pub objects: Vec<ObjectInst>,
    pub quantities: Vec<QuantityState>,
    pub granule_of: Vec<GranuleOf>,
    pub adjacency: Vec<(ObjectId, ObjectId)>,
    pub subquantities: Vec<SubQuantityAssertion>,
}

impl WorldView {
    pub fn is_empty(&self) -> bool {
        self.objects.is_empty() && self.quantities.is_empty()
    }

    pub fn quantity(&self, id: &str) -> Option<&QuantityState> {
        self.quantities.iter().find(|q| q.id.as_str() == id)
    }
}

/// The knowledge base.
#[derive(Debug, Clone, Default)]
pub struct Kb {
    pub(crate) mode: Mode,
    pub(crate) kinds: BTreeMap<KindName, KindDecl>,
    pub(crate) objects: BTreeMap<ObjectId, ObjectInst>,
    pub(crate) quantities: BTreeMap<QuantityId, QuantityInst>,
    pub(crate) adjacency: Vec<AdjacencyAssertion>,
    pub(crate) subquantities: BTreeSet<SubQuantityAssertion>,
    pub(crate) log: Vec<EventRec>,
    pub(crate) event_index: BTreeMap<EventId, usize>,
    /// Live (non-terminated) quantities holding each object.
    pub(crate) live_holders: BTreeMap<ObjectId, BTreeSet<QuantityId>>,
}

impl Kb {
    pub fn new() -> Self {
        Kb::default()
    }

    pub fn with_mode(mode: Mode) -> Self {
        Kb {
            mode,
            ..Kb::default()
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
            && self.objects.is_empty()
            && self.quantities.is_empty()
            && self.log.is_empty()
    }

    pub fn kinds(&self) -> impl Iterator<Item = &KindDecl> {
        self.kinds.values()
    }

    pub fn kind(&self, name: &str) -> Option<&KindDecl> {
        self.kinds.get(name)
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectInst> {
        self.objects.values()
    }

    pub fn object(&self, id: &str) -> Option<&ObjectInst> {
        self.objects.get(id)
    }

    pub fn quantities(&self) -> impl Iterator<Item = &QuantityInst> {
        self.quantities.values()
    }

    pub fn quantity(&self, id: &str) -> Option<&QuantityInst> {
        self.quantities.get(id)
    }

    pub fn adjacency(&self) -> &[AdjacencyAssertion] {
        &self.adjacency
    }

    pub fn subquantities(&self) -> impl Iterator<Item = &SubQuantityAssertion> {
        self.subquantities.iter()
    }

    pub fn event(&self, id: &str) -> Option<&EventRec> {
        self.event_index.get(id).map(|&i| &self.log[i])
    }

    pub(crate) fn id_in_use(&self, id: &str) -> bool {
        self.objects.contains_key(id)
            || self.quantities.contains_key(id)
            || self.event_index.contains_key(id)
    }

    pub fn declare_kind(&mut self, decl: KindDecl) -> Result<()> {
        if self.kinds.contains_key(&decl.name) {
            return Err(KbError::DuplicateKind(decl.name));
        }
        if decl.meta == KindMeta::ObjectKind && !decl.required_granule_kinds.is_empty() {
            return Err(KbError::KindMismatch {
                kind: decl.name,
                expected: KindMeta::QuantityKind.describe(),
            });
        }
        for required in &decl.required_granule_kinds {
            let ok = self
                .kinds
                .get(required)
                .is_some_and(|k| k.meta == KindMeta::ObjectKind);
            if !ok {
                return Err(KbError::UnknownGranuleKind {
                    kind: decl.name.clone(),
                    required: required.clone(),
                });
            }
        }
        self.kinds.insert(decl.name.clone(), decl);
        Ok(())
    }

    pub(crate) fn expect_kind(&self, name: &KindName, meta: KindMeta) -> Result<()> {
        match self.kinds.get(name) {
            None => Err(KbError::UnknownKind(name.clone())),
            Some(k) if k.meta != meta => Err(KbError::KindMismatch {
                kind: name.clone(),
                expected: meta.describe(),
            }),
            Some(_) => Ok(()),
        }
    }

    pub fn create_object(
        &mut self,
        id: impl Into<ObjectId>,
        kind: impl Into<KindName>,
        at: TimePoint,
    ) -> Result<&ObjectInst> {
        let id = id.into();
        let kind = kind.into();
        if self.id_in_use(id.as_str()) {
            return Err(KbError::DuplicateId(id.to_string()));
        }
        self.expect_kind(&kind, KindMeta::ObjectKind)?;
        let inst = ObjectInst {
            id: id.clone(),
            kind,
            created_at: at,
        };
        Ok(self.objects.entry(id).or_insert(inst))
    }

    fn existing_object_at(&self, id: &ObjectId, t: TimePoint) -> Result<()> {
        let obj = self
            .objects
            .get(id)
            .ok_or_else(|| KbError::UnknownObject(id.clone()))?;
        if obj.created_at > t {
            return Err(KbError::NotLiveAt(id.to_string(), t));
        }
        Ok(())
    }

    pub fn assert_adjacency(
        &mut self,
        a: impl Into<ObjectId>,
        b: impl Into<ObjectId>,
        from: TimePoint,
    ) -> Result<()> {
        let (a, b) = (a.into(), b.into());
        if a == b {
            return Err(KbError::SelfAdjacency(a));
        }
        self.existing_object_at(&a, from)?;
        self.existing_object_at(&b, from)?;
        let (a, b) = ordered_pair(a, b);
        let overlaps = self
            .adjacency
            .iter()
            .any(|e| e.a == a && e.b == b && e.to.is_none_or(|end| end > from));
        if overlaps {
            return Err(KbError::OverlappingInterval { a, b, from });
        }
        self.adjacency.push(AdjacencyAssertion {
            a,
            b,
            from,
            to: None,
        });
        Ok(())
    }

    pub fn retract_adjacency(
        &mut self,
        a: impl Into<ObjectId>,
        b: impl Into<ObjectId>,
        at: TimePoint,
    ) -> Result<()> {
        let (a, b) = (a.into(), b.into());
        if a == b {
            return Err(KbError::SelfAdjacency(a));
        }
        for id in [&a, &b] {
            if !self.objects.contains_key(id) {
                return Err(KbError::UnknownObject(id.clone()));
            }
        }
        let (a, b) = ordered_pair(a, b);
        let open = self
            .adjacency
            .iter_mut()
            .find(|e| e.a == a && e.b == b && e.to.is_none() && e.from < at);
        match open {
            Some(edge) => {
                edge.to = Some(at);
                Ok(())
            }
            None => Err(KbError::NoOpenInterval { a, b, at }),
        }
    }

    /// Undirected edges active at `t`, each pair once with `a < b`.
    pub fn adjacency_at(&self, t: TimePoint) -> BTreeSet<(ObjectId, ObjectId)> {
        self.adjacency
            .iter()
            .filter(|e| e.is_active_at(t))
            .map(|e| (e.a.clone(), e.b.clone()))
            .collect()
    }

    pub fn assert_subquantity(
        &mut self,
        part: impl Into<QuantityId>,
        whole: impl Into<QuantityId>,
    ) -> Result<()> {
        let link = SubQuantityAssertion::new(part, whole);
        self.check_subquantity(&link, |kb, id| kb.quantities.get(id))?;
        self.subquantities.insert(link);
        Ok(())
    }

    /// Structural checks for a sub-quantity link. `lookup` resolves ids so the
    /// event engine can include quantities it is about to create.
    pub(crate) fn check_subquantity<'a>(
        &'a self,
        link: &SubQuantityAssertion,
        lookup: impl Fn(&'a Kb, &QuantityId) -> Option<&'a QuantityInst>,
    ) -> Result<()> {
        if link.part == link.whole {
            return Err(KbError::SelfSubQuantity(link.part.clone()));
        }
        if self.subquantities.contains(link) {
            return Err(KbError::DuplicateSubQuantity {
                part: link.part.clone(),
                whole: link.whole.clone(),
            });
        }
        let part =
            lookup(self, &link.part).ok_or_else(|| KbError::UnknownQuantity(link.part.clone()))?;
        let whole = lookup(self, &link.whole)
            .ok_or_else(|| KbError::UnknownQuantity(link.whole.clone()))?;
        if !part.overlaps(whole) {
            return Err(KbError::DisjointLifetimes {
                part: link.part.clone(),
                whole: link.whole.clone(),
            });
        }
        Ok(())
    }

    fn quantity_or_err(&self, q: &str) -> Result<&QuantityInst> {
        self.quantities
            .get(q)
            .ok_or_else(|| KbError::UnknownQuantity(QuantityId::from(q)))
    }

    /// The granule set of `q`, provided `q` is live at `t`.
    pub fn granules_of(&self, q: &str, t: TimePoint) -> Result<&BTreeSet<ObjectId>> {
        let quantity = self.quantity_or_err(q)?;
        if !quantity.is_live_at(t) {
            return Err(KbError::NotLiveAt(q.to_owned(), t));
        }
        Ok(&quantity.granules)
    }

    /// `granuleOf(o, q, t)`.
    pub fn is_granule_of(&self, o: &str, q: &str, t: TimePoint) -> bool {
        self.quantities
            .get(q)
            .is_some_and(|quantity| quantity.is_live_at(t) && quantity.granules.contains(o))
    }

    /// Object kinds instantiated by at least one granule of `q`.
    pub fn granule_types(&self, q: &str) -> Result<BTreeSet<KindName>> {
        let quantity = self.quantity_or_err(q)?;
        Ok(quantity
            .granules
            .iter()
            .filter_map(|g| self.objects.get(g))
            .map(|o| o.kind.clone())
            .collect())
    }

    /// Quantities live at `t` that have `o` as a granule.
    pub fn hosts_at(&self, o: &str, t: TimePoint) -> BTreeSet<QuantityId> {
        self.quantities
            .values()
            .filter(|q| q.is_live_at(t) && q.granules.contains(o))
            .map(|q| q.id.clone())
            .collect()
    }

    pub fn world_at(&self, t: TimePoint) -> WorldView {
        let objects = self
            .objects
            .values()
            .filter(|o| o.created_at <= t)
            .cloned()
            .collect();
        let quantities: Vec<QuantityState> = self
            .quantities
            .values()
            .filter(|q| q.created_at <= t)
            .map(|q| QuantityState {
                id: q.id.clone(),
                kind: q.kind.clone(),
                status: q.status_at(t),
                created_at: q.created_at,
                terminated_at: q.terminated_at.filter(|end| *end <= t),
                granules: q.granules.clone(),
            })
            .collect();
        let mut granule_of: Vec<GranuleOf> = quantities
            .iter()
            .filter(|q| q.status == Status::Live)
            .flat_map(|q| {
                q.granules.iter().map(|g| GranuleOf {
                    granule: g.clone(),
                    quantity: q.id.clone(),
                })
            })
            .collect();
        granule_of.sort_by(|x, y| (&x.granule, &x.quantity).cmp(&(&y.granule, &y.quantity)));
        let live = |id: &QuantityId| self.quantities.get(id).is_some_and(|q| q.is_live_at(t));
        let subquantities = self
            .subquantities
            .iter()
            .filter(|s| live(&s.part) && live(&s.whole))
            .cloned()
            .collect();
        WorldView {
            at: t,
            objects,
            quantities,
            granule_of,
            adjacency: self.adjacency_at(t).into_iter().collect(),
            subquantities,
        }
    }

    /// Every tick at which the world may differ from the tick before, plus
    /// the tick after each event. Worlds only change at these points.
    pub fn change_points(&self) -> BTreeSet<TimePoint> {
        let mut points = BTreeSet::new();
        for e in &self.log {
            points.insert(e.at);
            points.insert(e.at.next());
        }
        for o in self.objects.values() {
            points.insert(o.created_at);
        }
        for q in self.quantities.values() {
            points.insert(q.created_at);
            points.extend(q.terminated_at);
        }
        for e in &self.adjacency {
            points.insert(e.from);
            points.extend(e.to);
        }
        points
    }

    pub(crate) fn rebuild_indexes(&mut self) {
        self.event_index = self
            .log
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.clone(), i))
            .collect();
        self.live_holders.clear();
        for q in self.quantities.values().filter(|q| q.is_live()) {
            for g in &q.granules {
                self.live_holders
                    .entry(g.clone())
                    .or_default()
                    .insert(q.id.clone());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rock_kb() -> Kb {
        let mut kb = Kb::new();
        kb.declare_kind(KindDecl::object_kind("SedimentaryGrain"))
            .unwrap();
        kb.declare_kind(KindDecl::quantity_kind(
            "PortionOfRock",
            ["SedimentaryGrain"],
        ))
        .unwrap();
        for g in ["grain1", "grain2", "grain3"] {
            kb.create_object(g, "SedimentaryGrain", TimePoint(0))
                .unwrap();
        }
        kb
    }

    #[test]
    fn declare_kind_checks() {
        let mut kb = Kb::new();
        kb.declare_kind(KindDecl::object_kind("H2OMolecule"))
            .unwrap();
        kb.declare_kind(KindDecl::quantity_kind("PortionOfWater", ["H2OMolecule"]))
            .unwrap();
        kb.declare_kind(KindDecl::quantity_kind("X", Vec::<&str>::new()))
            .unwrap();
        assert_eq!(
            kb.declare_kind(KindDecl::quantity_kind("X", Vec::<&str>::new())),
            Err(KbError::DuplicateKind("X".into()))
        );
        assert!(matches!(
            kb.declare_kind(KindDecl::quantity_kind("Y", ["Nope"])),
            Err(KbError::UnknownGranuleKind { .. })
        ));
        // a quantity kind is not a valid granule requirement
        assert!(matches!(
            kb.declare_kind(KindDecl::quantity_kind("Z", ["X"])),
            Err(KbError::UnknownGranuleKind { .. })
        ));
    }

    #[test]
    fn create_object_checks() {
        let mut kb = rock_kb();
        assert_eq!(
            kb.create_object("grain1", "SedimentaryGrain", TimePoint(0)),
            Err(KbError::DuplicateId("grain1".into()))
        );
        assert_eq!(
            kb.create_object("g9", "Basalt", TimePoint(0)),
            Err(KbError::UnknownKind("Basalt".into()))
        );
        assert!(matches!(
            kb.create_object("g9", "PortionOfRock", TimePoint(0)),
            Err(KbError::KindMismatch { .. })
        ));
    }

    #[test]
    fn adjacency_intervals() {
        let mut kb = rock_kb();
        kb.assert_adjacency("grain2", "grain1", TimePoint(0))
            .unwrap();
        assert!(kb
            .adjacency_at(TimePoint(0))
            .contains(&("grain1".into(), "grain2".into())));
        assert_eq!(
            kb.assert_adjacency("grain1", "grain1", TimePoint(0)),
            Err(KbError::SelfAdjacency("grain1".into()))
        );
        assert!(matches!(
            kb.assert_adjacency("grain1", "grain2", TimePoint(4)),
            Err(KbError::OverlappingInterval { .. })
        ));
        kb.retract_adjacency("grain1", "grain2", TimePoint(3))
            .unwrap();
        assert!(kb.adjacency_at(TimePoint(3)).is_empty());
        assert_eq!(kb.adjacency_at(TimePoint(2)).len(), 1);
        // reopening after the closed interval is fine, overlapping it is not
        assert!(kb
            .assert_adjacency("grain1", "grain2", TimePoint(2))
            .is_err());
        kb.assert_adjacency("grain1", "grain2", TimePoint(3))
            .unwrap();
        assert!(matches!(
            kb.retract_adjacency("grain1", "grain3", TimePoint(5)),
            Err(KbError::NoOpenInterval { .. })
        ));
        assert!(matches!(
            kb.assert_adjacency("grain1", "ghost", TimePoint(0)),
            Err(KbError::UnknownObject(_))
        ));
    }

    #[test]
    fn adjacency_requires_objects_to_exist_at_start() {
        let mut kb = rock_kb();
        kb.create_object("late", "SedimentaryGrain", TimePoint(5))
            .unwrap();
        assert!(matches!(
            kb.assert_adjacency("grain1", "late", TimePoint(4)),
            Err(KbError::NotLiveAt(..))
        ));
        kb.assert_adjacency("grain1", "late", TimePoint(5)).unwrap();
    }

    #[test]
    fn lifetime_overlap() {
        let q = |from: u64, to: Option<u64>| QuantityInst {
            id: "q".into(),
            kind: "K".into(),
            created_at: TimePoint(from),
            terminated_at: to.map(TimePoint),
            granules: BTreeSet::new(),
            creation_event: "e".into(),
        };
        assert!(q(0, Some(3)).overlaps(&q(2, None)));
        assert!(!q(0, Some(3)).overlaps(&q(3, None)));
        assert!(q(5, None).overlaps(&q(0, None)));
        assert!(!q(5, Some(6)).overlaps(&q(0, Some(5))));
    }

    #[test]
    fn empty_world() {
        let kb = Kb::new();
        assert!(kb.world_at(TimePoint(0)).is_empty());
        assert!(kb.change_points().is_empty());
    }
}
