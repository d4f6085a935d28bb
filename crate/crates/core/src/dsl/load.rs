use super::{creation_event_id, AdjacencyOp, EventStmt, Pos, Scenario};
use crate::error::KbError;
use crate::event::{EventInput, LinkPool, TransferSpec};
use crate::model::{Kb, KindDecl, KindMeta, Mode, SubQuantityAssertion};

/// A statement the engine rejected while loading a scenario.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{pos}: {source}")]
pub struct LoadError {
    pub pos: Pos,
    pub source: KbError,
}

fn at(pos: Pos) -> impl FnOnce(KbError) -> LoadError {
    move |source| LoadError { pos, source }
}

/// Builds a KB from a parsed scenario. Declarations go in first (object kinds
/// before quantity kinds), then adjacency in time order, then events in
/// source order. Sub-quantity links are attached to the event creating the
/// later of their two quantities.
pub fn load(scenario: &Scenario, mode: Mode) -> Result<Kb, LoadError> {
    let mut kb = Kb::with_mode(mode);

    let mut kinds: Vec<_> = scenario.kinds.iter().collect();
    kinds.sort_by_key(|k| k.node.meta != KindMeta::ObjectKind);
    for k in kinds {
        let decl = KindDecl {
            name: k.node.name.clone(),
            meta: k.node.meta,
            required_granule_kinds: k.node.requires.iter().cloned().collect(),
        };
        kb.declare_kind(decl).map_err(at(k.pos))?;
    }
    for o in &scenario.objects {
        kb.create_object(o.node.id.clone(), o.node.kind.clone(), o.node.created_at())
            .map_err(at(o.pos))?;
    }

    let mut adjacency: Vec<_> = scenario.adjacency.iter().enumerate().collect();
    adjacency.sort_by_key(|(i, s)| (s.node.at, s.node.op, *i));
    for (_, s) in adjacency {
        let (a, b) = (s.node.a.clone(), s.node.b.clone());
        match s.node.op {
            AdjacencyOp::Connect => kb.assert_adjacency(a, b, s.node.at),
            AdjacencyOp::Disconnect => kb.retract_adjacency(a, b, s.node.at),
        }
        .map_err(at(s.pos))?;
    }

    let mut links = LinkPool::new(scenario.subquantities.iter().map(|s| {
        (
            SubQuantityAssertion::new(s.node.part.clone(), s.node.whole.clone()),
            s.pos,
        )
    }));
    for e in &scenario.events {
        let input = match &e.node {
            EventStmt::Creation { quantity, .. } => EventInput::Creation {
                id: creation_event_id(&quantity.id),
                quantity: quantity.clone(),
            },
            EventStmt::Transfer(t) => EventInput::Transfer(TransferSpec {
                id: t.id.clone(),
                donors: t.donors.iter().cloned().collect(),
                created: t.created.clone(),
                discarded: t.discarded.iter().cloned().collect(),
            }),
        };
        let ready = links.take_for(&kb, &input);
        let link_pos = ready.first().map(|(_, p)| *p);
        let ready: Vec<SubQuantityAssertion> = ready.into_iter().map(|(l, _)| l).collect();
        if let Err(source) = kb.apply_linked(input, e.node.at(), &ready) {
            let pos = match source {
                KbError::SelfSubQuantity(_)
                | KbError::DuplicateSubQuantity { .. }
                | KbError::DisjointLifetimes { .. } => link_pos.unwrap_or(e.pos),
                _ => e.pos,
            };
            return Err(LoadError { pos, source });
        }
    }
    for (link, pos) in links.into_remaining() {
        kb.assert_subquantity(link.part, link.whole)
            .map_err(at(pos))?;
    }
    Ok(kb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use crate::ids::TimePoint;

    fn load_src(src: &str) -> Result<Kb, LoadError> {
        load(&parse(src).expect("parses"), Mode::Strict)
    }

    #[test]
    fn case_study_loads() {
        let kb = load_src(crate::dsl::CASE_STUDY).unwrap();
        assert_eq!(kb.event_log().len(), 3);
        assert_eq!(kb.quantities().count(), 5);
        assert!(kb.validate().is_clean());
    }

    #[test]
    fn engine_errors_carry_statement_position() {
        let err = load_src(
            "object-kind G\nquantity-kind Q\nobject a : G\nobject b : G\n\
             quantity q : Q at t2 granules { a, b }\nquantity r : Q at t1 granules { a, b }\n",
        )
        .unwrap_err();
        assert_eq!(err.pos, Pos { line: 6, column: 1 });
        assert!(matches!(err.source, KbError::NonMonotonicTime { .. }));

        let err = load_src("object-kind G\nobject a : G\nobject b : G\ndisconnect a b at t1\n")
            .unwrap_err();
        assert_eq!(err.pos.line, 4);
    }

    #[test]
    fn reconnect_at_same_time_closes_first() {
        let kb = load_src(
            "object-kind G\nobject a : G\nobject b : G\n\
             connect a b at t2\nconnect a b at t0\ndisconnect a b at t2\n",
        )
        .unwrap();
        assert_eq!(kb.adjacency().len(), 2);
        assert!(
            kb.adjacency_at(TimePoint(1)).len() == 1 && kb.adjacency_at(TimePoint(2)).len() == 1
        );
    }

    #[test]
    fn linked_sub_quantity_may_share_granules() {
        let src = "object-kind M\nquantity-kind Wine\nquantity-kind Alcohol\n\
                   object m1 : M\nobject m2 : M\nobject m3 : M\n\
                   connect m1 m2 at t0\nconnect m2 m3 at t0\n\
                   quantity wine : Wine at t0 granules { m1, m2, m3 }\n\
                   quantity alcohol : Alcohol at t1 granules { m1, m2 }\n\
                   subquantity alcohol of wine\n";
        let kb = load_src(src).unwrap();
        assert_eq!(kb.subquantities().count(), 1);
        assert!(kb.validate().is_clean(), "{:?}", kb.validate());

        let unlinked = src.replace("subquantity alcohol of wine\n", "");
        let err = load_src(&unlinked).unwrap_err();
        assert_eq!(err.pos.line, 10);
        assert!(matches!(err.source, KbError::GranuleNotFree { .. }));
    }
}
