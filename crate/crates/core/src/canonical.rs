//! Canonical `.mpkb` documents: export, import and replay.
//!
//! A document is a JSON object with the sections `kinds`, `objects`,
//! `quantities`, `adjacency`, `subquantities` and `events`, in that order.
//! Every list except `events` is sorted by id; events keep log order, and
//! every id list inside a record is sorted. Equal KBs export to identical
//! bytes.
//!
//! Import is deliberately raw: it only enforces the schema (field types,
//! unknown fields, duplicate ids) and stores everything else as written, so
//! hand-made documents can carry faults for the validator to report.
//! [`replay`] instead rebuilds a KB through the engine.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::KbError;
use crate::event::{EventInput, EventKind, EventRec, LinkPool, NewQuantity, TransferSpec};
use crate::ids::{EventId, KindName, ObjectId, QuantityId, TimePoint};
use crate::model::{
    AdjacencyAssertion, Kb, KindDecl, KindMeta, Mode, ObjectInst, QuantityInst,
    SubQuantityAssertion,
};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub kinds: Vec<KindDoc>,
    pub objects: Vec<ObjectDoc>,
    pub quantities: Vec<QuantityDoc>,
    pub adjacency: Vec<AdjacencyDoc>,
    pub subquantities: Vec<SubQuantityDoc>,
    pub events: Vec<EventDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KindDoc {
    pub name: KindName,
    pub meta: KindMeta,
    pub requires: Vec<KindName>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ObjectDoc {
    pub id: ObjectId,
    pub kind: KindName,
    pub created_at: TimePoint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct QuantityDoc {
    pub id: QuantityId,
    pub kind: KindName,
    pub created_at: TimePoint,
    pub terminated_at: Option<TimePoint>,
    pub granules: Vec<ObjectId>,
    pub creation_event: EventId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjacencyDoc {
    pub a: ObjectId,
    pub b: ObjectId,
    pub from: TimePoint,
    pub to: Option<TimePoint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubQuantityDoc {
    pub part: QuantityId,
    pub whole: QuantityId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreatedDoc {
    pub id: QuantityId,
    pub kind: KindName,
    pub granules: Vec<ObjectId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventDoc {
    pub id: EventId,
    pub at: TimePoint,
    pub kind: EventKind,
    pub donors: Vec<QuantityId>,
    pub created: Vec<CreatedDoc>,
    pub discarded: Vec<ObjectId>,
}

#[derive(Debug, thiserror::Error)]
pub enum ImportError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
}

fn schema_err(path: impl Into<String>, message: impl Into<String>) -> ImportError {
    ImportError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("declaration {what}: {source}")]
    Declaration { what: String, source: KbError },
    #[error("event #{index} ({id}): {source}")]
    Event {
        index: usize,
        id: EventId,
        source: KbError,
    },
}

impl ReplayError {
    pub fn kb_error(&self) -> &KbError {
        match self {
            ReplayError::Declaration { source, .. } | ReplayError::Event { source, .. } => source,
        }
    }
}

fn sorted<T: Ord + Clone>(items: impl IntoIterator<Item = T>) -> Vec<T> {
    let mut v: Vec<T> = items.into_iter().collect();
    v.sort();
    v
}

impl Document {
    pub fn from_kb(kb: &Kb) -> Document {
        let kinds = kb
            .kinds()
            .map(|k| KindDoc {
                name: k.name.clone(),
                meta: k.meta,
                requires: sorted(k.required_granule_kinds.iter().cloned()),
            })
            .collect();
        let objects = kb
            .objects()
            .map(|o| ObjectDoc {
                id: o.id.clone(),
                kind: o.kind.clone(),
                created_at: o.created_at,
            })
            .collect();
        let quantities = kb
            .quantities()
            .map(|q| QuantityDoc {
                id: q.id.clone(),
                kind: q.kind.clone(),
                created_at: q.created_at,
                terminated_at: q.terminated_at,
                granules: sorted(q.granules.iter().cloned()),
                creation_event: q.creation_event.clone(),
            })
            .collect();
        let mut adjacency: Vec<AdjacencyDoc> = kb
            .adjacency()
            .iter()
            .map(|e| AdjacencyDoc {
                a: e.a.clone(),
                b: e.b.clone(),
                from: e.from,
                to: e.to,
            })
            .collect();
        adjacency.sort_by(|x, y| (&x.a, &x.b, x.from, x.to).cmp(&(&y.a, &y.b, y.from, y.to)));
        let subquantities = kb
            .subquantities()
            .map(|s| SubQuantityDoc {
                part: s.part.clone(),
                whole: s.whole.clone(),
            })
            .collect();
        let events = kb
            .event_log()
            .iter()
            .map(|e| {
                let mut created: Vec<CreatedDoc> = e
                    .created
                    .iter()
                    .map(|c| CreatedDoc {
                        id: c.id.clone(),
                        kind: c.kind.clone(),
                        granules: sorted(c.granules.iter().cloned()),
                    })
                    .collect();
                created.sort_by(|x, y| x.id.cmp(&y.id));
                EventDoc {
                    id: e.id.clone(),
                    at: e.at,
                    kind: e.kind,
                    donors: sorted(e.donors.iter().cloned()),
                    created,
                    discarded: sorted(e.discarded.iter().cloned()),
                }
            })
            .collect();
        Document {
            kinds,
            objects,
            quantities,
            adjacency,
            subquantities,
            events,
        }
    }

    /// Canonical text: two-space indented JSON with a trailing newline.
    pub fn to_canonical_string(&self) -> String {
        let mut s =
            serde_json::to_string_pretty(self).expect("document serialization is infallible");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Document, ImportError> {
        let mut de = serde_json::Deserializer::from_str(text);
        let doc = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let path = match path.as_str() {
                "." | "?" => "$".to_owned(),
                _ => format!("$.{path}"),
            };
            schema_err(path, inner.to_string())
        })?;
        de.end().map_err(|e| schema_err("$", e.to_string()))?;
        Ok(doc)
    }
}

/// Serializes `kb` in canonical form.
pub fn export(kb: &Kb) -> String {
    Document::from_kb(kb).to_canonical_string()
}

fn non_empty(id: &str, path: String) -> Result<(), ImportError> {
    if id.is_empty() {
        return Err(schema_err(path, "identifier must not be empty"));
    }
    Ok(())
}

fn unique_set<T: Ord + Clone + std::fmt::Display>(
    items: &[T],
    path: &str,
) -> Result<BTreeSet<T>, ImportError> {
    let mut set = BTreeSet::new();
    for (i, item) in items.iter().enumerate() {
        if !set.insert(item.clone()) {
            return Err(schema_err(
                format!("{path}[{i}]"),
                format!("duplicate entry `{item}`"),
            ));
        }
    }
    Ok(set)
}

/// Builds a KB from a document without running engine checks.
pub fn import_document(doc: &Document) -> Result<Kb, ImportError> {
    let mut kb = Kb::new();
    let mut individuals: BTreeSet<&str> = BTreeSet::new();
    for (i, k) in doc.kinds.iter().enumerate() {
        let path = format!("$.kinds[{i}]");
        let requires = unique_set(&k.requires, &format!("{path}.requires"))?;
        if kb.kinds.contains_key(&k.name) {
            return Err(schema_err(
                format!("{path}.name"),
                format!("duplicate kind `{}`", k.name),
            ));
        }
        kb.kinds.insert(
            k.name.clone(),
            KindDecl {
                name: k.name.clone(),
                meta: k.meta,
                required_granule_kinds: requires,
            },
        );
    }
    for (i, o) in doc.objects.iter().enumerate() {
        non_empty(o.id.as_str(), format!("$.objects[{i}].id"))?;
        if !individuals.insert(o.id.as_str()) {
            return Err(schema_err(
                format!("$.objects[{i}].id"),
                format!("duplicate id `{}`", o.id),
            ));
        }
        kb.objects.insert(
            o.id.clone(),
            ObjectInst {
                id: o.id.clone(),
                kind: o.kind.clone(),
                created_at: o.created_at,
            },
        );
    }
    for (i, q) in doc.quantities.iter().enumerate() {
        let path = format!("$.quantities[{i}]");
        non_empty(q.id.as_str(), format!("{path}.id"))?;
        if !individuals.insert(q.id.as_str()) {
            return Err(schema_err(
                format!("{path}.id"),
                format!("duplicate id `{}`", q.id),
            ));
        }
        let granules = unique_set(&q.granules, &format!("{path}.granules"))?;
        kb.quantities.insert(
            q.id.clone(),
            QuantityInst {
                id: q.id.clone(),
                kind: q.kind.clone(),
                created_at: q.created_at,
                terminated_at: q.terminated_at,
                granules,
                creation_event: q.creation_event.clone(),
            },
        );
    }
    for e in &doc.adjacency {
        let (a, b) = crate::model::ordered_pair(e.a.clone(), e.b.clone());
        kb.adjacency.push(AdjacencyAssertion {
            a,
            b,
            from: e.from,
            to: e.to,
        });
    }
    for (i, s) in doc.subquantities.iter().enumerate() {
        let link = SubQuantityAssertion::new(s.part.clone(), s.whole.clone());
        if !kb.subquantities.insert(link) {
            return Err(schema_err(
                format!("$.subquantities[{i}]"),
                format!("duplicate sub-quantity entry {} of {}", s.part, s.whole),
            ));
        }
    }
    for (i, e) in doc.events.iter().enumerate() {
        let path = format!("$.events[{i}]");
        non_empty(e.id.as_str(), format!("{path}.id"))?;
        if !individuals.insert(e.id.as_str()) {
            return Err(schema_err(
                format!("{path}.id"),
                format!("duplicate id `{}`", e.id),
            ));
        }
        let donors = unique_set(&e.donors, &format!("{path}.donors"))?;
        let discarded = unique_set(&e.discarded, &format!("{path}.discarded"))?;
        let mut created = Vec::with_capacity(e.created.len());
        let mut created_ids = BTreeSet::new();
        for (j, c) in e.created.iter().enumerate() {
            let cpath = format!("{path}.created[{j}]");
            if !created_ids.insert(&c.id) {
                return Err(schema_err(
                    format!("{cpath}.id"),
                    format!("duplicate id `{}`", c.id),
                ));
            }
            created.push(NewQuantity {
                id: c.id.clone(),
                kind: c.kind.clone(),
                granules: unique_set(&c.granules, &format!("{cpath}.granules"))?,
            });
        }
        created.sort();
        kb.log.push(EventRec {
            id: e.id.clone(),
            at: e.at,
            kind: e.kind,
            donors,
            created,
            discarded,
        });
    }
    kb.rebuild_indexes();
    Ok(kb)
}

/// Parses and imports a canonical document.
pub fn import(text: &str) -> Result<Kb, ImportError> {
    import_document(&Document::parse(text)?)
}

fn event_input(e: &EventDoc) -> EventInput {
    let created: Vec<NewQuantity> = e
        .created
        .iter()
        .map(|c| NewQuantity::new(c.id.clone(), c.kind.clone(), c.granules.iter().cloned()))
        .collect();
    match e.kind {
        EventKind::Creation if e.donors.is_empty() && created.len() == 1 => EventInput::Creation {
            id: e.id.clone(),
            quantity: created.into_iter().next().expect("one created quantity"),
        },
        _ => EventInput::Transfer(TransferSpec {
            id: e.id.clone(),
            donors: e.donors.iter().cloned().collect(),
            created,
            discarded: e.discarded.iter().cloned().collect(),
        }),
    }
}

/// Rebuilds a KB by routing the document's declarations and events through
/// the engine. Quantity records are not read: they are re-derived from the
/// log, so `export(replay(d)) == export(import(d))` holds exactly when the
/// document's quantities agree with its log.
pub fn replay(doc: &Document, mode: Mode) -> Result<Kb, ReplayError> {
    let mut kb = Kb::with_mode(mode);
    let decl_err = |what: String| move |source| ReplayError::Declaration { what, source };

    let mut kinds: Vec<&KindDoc> = doc.kinds.iter().collect();
    kinds.sort_by_key(|k| (k.meta != KindMeta::ObjectKind, &k.name));
    for k in kinds {
        let decl = KindDecl {
            name: k.name.clone(),
            meta: k.meta,
            required_granule_kinds: k.requires.iter().cloned().collect(),
        };
        kb.declare_kind(decl)
            .map_err(decl_err(format!("kind {}", k.name)))?;
    }
    for o in &doc.objects {
        kb.create_object(o.id.clone(), o.kind.clone(), o.created_at)
            .map_err(decl_err(format!("object {}", o.id)))?;
    }
    let mut adjacency: Vec<&AdjacencyDoc> = doc.adjacency.iter().collect();
    adjacency.sort_by_key(|e| (e.from, &e.a, &e.b));
    for e in adjacency {
        let what = format!("adjacency {}-{} from {}", e.a, e.b, e.from);
        kb.assert_adjacency(e.a.clone(), e.b.clone(), e.from)
            .map_err(decl_err(what.clone()))?;
        if let Some(to) = e.to {
            kb.retract_adjacency(e.a.clone(), e.b.clone(), to)
                .map_err(decl_err(what))?;
        }
    }

    let mut links = LinkPool::new(doc.subquantities.iter().map(|s| {
        (
            SubQuantityAssertion::new(s.part.clone(), s.whole.clone()),
            (),
        )
    }));
    for (index, e) in doc.events.iter().enumerate() {
        let input = event_input(e);
        let ready: Vec<SubQuantityAssertion> = links
            .take_for(&kb, &input)
            .into_iter()
            .map(|(l, _)| l)
            .collect();
        kb.apply_linked(input, e.at, &ready)
            .map_err(|source| ReplayError::Event {
                index,
                id: e.id.clone(),
                source,
            })?;
    }
    for (link, ()) in links.into_remaining() {
        let what = format!("subquantity {} of {}", link.part, link.whole);
        kb.assert_subquantity(link.part, link.whole)
            .map_err(decl_err(what))?;
    }
    Ok(kb)
}

/// Exports `kb`, replays its log and reports whether the re-export matches.
pub fn replay_matches(kb: &Kb) -> Result<bool, ReplayError> {
    let doc = Document::from_kb(kb);
    let rebuilt = replay(&doc, kb.mode())?;
    Ok(export(&rebuilt) == doc.to_canonical_string())
}

/// Per-section record counts, used by the CLI summary.
pub fn section_counts(doc: &Document) -> BTreeMap<&'static str, usize> {
    BTreeMap::from([
        ("kinds", doc.kinds.len()),
        ("objects", doc.objects.len()),
        ("quantities", doc.quantities.len()),
        ("adjacency", doc.adjacency.len()),
        ("subquantities", doc.subquantities.len()),
        ("events", doc.events.len()),
    ])
}
