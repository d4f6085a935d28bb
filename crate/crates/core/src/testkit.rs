//! Seeded generators for knowledge bases, used by the property and
//! acceptance suites and by the benchmarks. The same seed always yields the
//! same KB.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::event::{EventInput, NewQuantity, TransferSpec};
use crate::ids::{EventId, ObjectId, QuantityId, TimePoint};
use crate::model::{Kb, KindDecl, SubQuantityAssertion};

pub const GRAIN: &str = "Grain";
pub const CRYSTAL: &str = "Crystal";
/// Requires at least one [`GRAIN`] granule.
pub const ROCK: &str = "Rock";
pub const SAND: &str = "Sand";

/// Size limits for [`random_valid_kb`].
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_events: usize,
    pub max_objects: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_events: 8,
            max_objects: 20,
        }
    }
}

fn declare_vocabulary(kb: &mut Kb) {
    kb.declare_kind(KindDecl::object_kind(GRAIN))
        .expect("fresh kb");
    kb.declare_kind(KindDecl::object_kind(CRYSTAL))
        .expect("fresh kb");
    kb.declare_kind(KindDecl::quantity_kind(ROCK, [GRAIN]))
        .expect("fresh kb");
    kb.declare_kind(KindDecl::quantity_kind(SAND, Vec::<&str>::new()))
        .expect("fresh kb");
}

type Edge = (ObjectId, ObjectId);

fn edge(a: &ObjectId, b: &ObjectId) -> Edge {
    if a < b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

/// A random spanning tree over `nodes`.
fn spanning_tree(rng: &mut ChaCha8Rng, nodes: &BTreeSet<ObjectId>) -> BTreeSet<Edge> {
    let mut order: Vec<&ObjectId> = nodes.iter().collect();
    order.shuffle(rng);
    (1..order.len())
        .map(|i| {
            let parent = order[rng.random_range(0..i)];
            edge(parent, order[i])
        })
        .collect()
}

struct Builder {
    rng: ChaCha8Rng,
    kb: Kb,
    trees: BTreeMap<QuantityId, BTreeSet<Edge>>,
    current: BTreeSet<Edge>,
    next_q: usize,
}

impl Builder {
    fn pick_kind(&mut self, granules: &BTreeSet<ObjectId>) -> &'static str {
        let has_grain = granules.iter().any(|g| {
            self.kb
                .object(g.as_str())
                .is_some_and(|o| o.kind.as_str() == GRAIN)
        });
        if has_grain && self.rng.random_bool(0.6) {
            ROCK
        } else {
            SAND
        }
    }

    fn new_quantity(&mut self, granules: BTreeSet<ObjectId>) -> NewQuantity {
        self.next_q += 1;
        let kind = self.pick_kind(&granules);
        let id = QuantityId::new(format!("q{}", self.next_q));
        let tree = spanning_tree(&mut self.rng, &granules);
        self.trees.insert(id.clone(), tree);
        NewQuantity {
            id,
            kind: kind.into(),
            granules,
        }
    }

    /// Brings the asserted adjacency in line with the trees of the
    /// quantities live at `t`.
    fn sync_adjacency(&mut self, t: TimePoint) {
        let desired: BTreeSet<Edge> = self
            .kb
            .quantities()
            .filter(|q| q.is_live_at(t))
            .flat_map(|q| self.trees[&q.id].iter().cloned())
            .collect();
        for (a, b) in self.current.difference(&desired) {
            self.kb
                .retract_adjacency(a.clone(), b.clone(), t)
                .expect("edge is open");
        }
        for (a, b) in desired.difference(&self.current) {
            self.kb
                .assert_adjacency(a.clone(), b.clone(), t)
                .expect("edge is closed");
        }
        self.current = desired;
    }

    fn free_objects(&self, t: TimePoint) -> Vec<ObjectId> {
        self.kb
            .objects()
            .filter(|o| o.created_at <= t && self.kb.hosts_at(o.id.as_str(), t).is_empty())
            .map(|o| o.id.clone())
            .collect()
    }

    fn creation(&mut self, index: usize, free: &[ObjectId]) -> EventInput {
        let size = self.rng.random_range(2..=free.len().min(5));
        let granules: BTreeSet<ObjectId> =
            free.choose_multiple(&mut self.rng, size).cloned().collect();
        EventInput::Creation {
            id: EventId::new(format!("e{index}")),
            quantity: self.new_quantity(granules),
        }
    }

    fn transfer(&mut self, index: usize, t: TimePoint, free: &[ObjectId]) -> EventInput {
        let live: Vec<QuantityId> = self
            .kb
            .quantities()
            .filter(|q| q.is_live_at(t))
            .map(|q| q.id.clone())
            .collect();
        let n_donors = self.rng.random_range(1..=live.len().min(2));
        let donors: Vec<QuantityId> = live
            .choose_multiple(&mut self.rng, n_donors)
            .cloned()
            .collect();
        let mut donated: Vec<ObjectId> = donors
            .iter()
            .flat_map(|d| {
                self.kb
                    .quantity(d.as_str())
                    .expect("live")
                    .granules
                    .iter()
                    .cloned()
            })
            .collect();
        donated.shuffle(&mut self.rng);
        let n_extra = self.rng.random_range(0..=free.len().min(2));
        let extras: Vec<ObjectId> = free
            .choose_multiple(&mut self.rng, n_extra)
            .cloned()
            .collect();

        let max_created = donated.len().min((donated.len() + extras.len()) / 2);
        let m = self.rng.random_range(1..=max_created.clamp(1, 3));
        let mut sets: Vec<BTreeSet<ObjectId>> = donated[..m]
            .iter()
            .map(|g| BTreeSet::from([g.clone()]))
            .collect();
        let mut discarded = Vec::new();
        let mut rest: Vec<ObjectId> = Vec::new();
        let mut spare = donated.len() + extras.len() - 2 * m;
        for g in &donated[m..] {
            if spare > 0 && self.rng.random_bool(0.15) {
                discarded.push(g.clone());
                spare -= 1;
            } else {
                rest.push(g.clone());
            }
        }
        rest.extend(extras);
        rest.shuffle(&mut self.rng);
        for set in sets.iter_mut() {
            set.insert(rest.pop().expect("two granules per created quantity"));
        }
        for g in rest {
            let i = self.rng.random_range(0..m);
            sets[i].insert(g);
        }
        let created = sets.into_iter().map(|s| self.new_quantity(s)).collect();
        EventInput::Transfer(TransferSpec {
            id: EventId::new(format!("e{index}")),
            donors: donors.into_iter().collect(),
            created,
            discarded: discarded.into_iter().collect(),
        })
    }
}

/// A KB that satisfies every axiom: quantities are created from free objects
/// or by transfers, each live quantity's granules are connected by a spanning
/// tree, and different quantities never touch.
pub fn random_valid_kb(seed: u64, limits: Limits) -> Kb {
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(seed),
        kb: Kb::new(),
        trees: BTreeMap::new(),
        current: BTreeSet::new(),
        next_q: 0,
    };
    declare_vocabulary(&mut b.kb);
    let n_objects = b.rng.random_range(4..=limits.max_objects.max(4));
    for i in 1..=n_objects {
        let kind = if b.rng.random_bool(0.7) {
            GRAIN
        } else {
            CRYSTAL
        };
        let at = TimePoint(b.rng.random_range(0..=2));
        b.kb.create_object(format!("o{i}"), kind, at)
            .expect("fresh id");
    }
    let n_events = b.rng.random_range(1..=limits.max_events.max(1));
    let mut t = TimePoint(b.rng.random_range(0..=2));
    for index in 1..=n_events {
        let free = b.free_objects(t);
        let any_live = b.kb.quantities().any(|q| q.is_live_at(t));
        let input = match (free.len() >= 2, any_live) {
            (false, false) => break,
            (true, false) => b.creation(index, &free),
            (false, true) => b.transfer(index, t, &free),
            (true, true) if b.rng.random_bool(0.35) => b.creation(index, &free),
            (true, true) => b.transfer(index, t, &free),
        };
        b.kb.apply_linked(input, t, &[])
            .expect("generated event is valid");
        b.sync_adjacency(t);
        t = TimePoint(t.0 + b.rng.random_range(1..=3));
    }
    b.kb
}

/// A KB whose adjacency is an arbitrary random graph, so connectivity and
/// maximality may or may not hold. Every quantity is live at `at`.
pub struct GraphCase {
    pub kb: Kb,
    pub at: TimePoint,
}

/// Up to `max_nodes` Grain objects, partitioned into at most three
/// quantities (some objects may stay free), with each pair of objects
/// adjacent at t0 with a random density.
pub fn random_graph_kb(seed: u64, max_nodes: usize) -> GraphCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kb = Kb::new();
    declare_vocabulary(&mut kb);
    let n = rng.random_range(2..=max_nodes.max(2));
    let nodes: Vec<ObjectId> = (1..=n).map(|i| ObjectId::new(format!("n{i}"))).collect();
    for id in &nodes {
        kb.create_object(id.clone(), GRAIN, TimePoint::ZERO)
            .expect("fresh id");
    }
    let density = rng.random_range(0.02..0.5);
    for (i, a) in nodes.iter().enumerate() {
        for b in &nodes[i + 1..] {
            if rng.random_bool(density) {
                kb.assert_adjacency(a.clone(), b.clone(), TimePoint::ZERO)
                    .expect("fresh edge");
            }
        }
    }
    let mut pool = nodes;
    pool.shuffle(&mut rng);
    let mut t = TimePoint::ZERO;
    for i in 1..=rng.random_range(1..=3) {
        if pool.len() < 2 {
            break;
        }
        let size = rng.random_range(2..=pool.len());
        let granules: Vec<ObjectId> = pool.drain(..size).collect();
        let kind = if rng.random_bool(0.5) { ROCK } else { SAND };
        let q = NewQuantity::new(format!("q{i}"), kind, granules);
        kb.apply_creation(format!("c{i}"), q, t)
            .expect("free granules");
        t = t.next();
    }
    let at = kb.last_event_time().expect("at least one creation");
    GraphCase { kb, at }
}

/// A KB of sub-quantity pairs where each part's granules are a subset of its
/// whole's. When `removed` is set, that granule was left out of the whole of
/// the named link before anything was created.
pub struct SubQuantityCase {
    pub kb: Kb,
    pub links: Vec<SubQuantityAssertion>,
    pub removed: Option<(SubQuantityAssertion, ObjectId)>,
}

pub fn random_subquantity_kb(seed: u64, drop_one: bool) -> SubQuantityCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kb = Kb::new();
    declare_vocabulary(&mut kb);
    let pairs = rng.random_range(1..=3);
    let drop_pair = rng.random_range(0..pairs);
    let mut t = TimePoint::ZERO;
    let mut links = Vec::new();
    let mut removed = None;
    let mut next_object = 0;
    for p in 0..pairs {
        let whole_size = rng.random_range(3..=8);
        let objects: Vec<ObjectId> = (0..whole_size)
            .map(|_| {
                next_object += 1;
                ObjectId::new(format!("g{next_object}"))
            })
            .collect();
        for o in &objects {
            kb.create_object(o.clone(), GRAIN, TimePoint::ZERO)
                .expect("fresh id");
        }
        for (i, a) in objects.iter().enumerate() {
            for b in &objects[i + 1..] {
                kb.assert_adjacency(a.clone(), b.clone(), TimePoint::ZERO)
                    .expect("fresh edge");
            }
        }
        let part_size = rng.random_range(2..whole_size);
        let part: Vec<ObjectId> = objects
            .choose_multiple(&mut rng, part_size)
            .cloned()
            .collect();
        let link = SubQuantityAssertion::new(format!("part{p}"), format!("whole{p}"));
        let mut whole: BTreeSet<ObjectId> = objects.iter().cloned().collect();
        if drop_one && p == drop_pair {
            let g = part.choose(&mut rng).expect("non-empty part").clone();
            whole.remove(&g);
            removed = Some((link.clone(), g));
        }
        kb.apply_creation(
            format!("cw{p}"),
            NewQuantity::new(link.whole.clone(), ROCK, whole),
            t,
        )
        .expect("free granules");
        t = t.next();
        let input = EventInput::Creation {
            id: EventId::new(format!("cp{p}")),
            quantity: NewQuantity::new(link.part.clone(), SAND, part),
        };
        kb.apply_linked(input, t, std::slice::from_ref(&link))
            .expect("linked part");
        t = t.next();
        links.push(link);
    }
    SubQuantityCase { kb, links, removed }
}
