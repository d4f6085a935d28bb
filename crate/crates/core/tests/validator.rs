use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::PathBuf;

use matterprov::canonical::import;
use matterprov::testkit::{random_graph_kb, random_subquantity_kb, GraphCase};
use matterprov::{Kb, Rule, TimePoint};
use proptest::prelude::*;

#[test]
fn each_fault_fixture_fires_only_its_rule() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/faults");
    for rule in Rule::ALL {
        let path = dir.join(format!("{rule}.mpkb"));
        let kb = import(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let fired = kb.validate().rules_fired();
        assert_eq!(fired, BTreeSet::from([rule]), "{}", path.display());
    }
}

type Adj = BTreeMap<String, BTreeSet<String>>;

fn adjacency(kb: &Kb, t: TimePoint) -> Adj {
    let mut adj = Adj::new();
    for e in kb
        .adjacency()
        .iter()
        .filter(|e| e.from <= t && e.to.is_none_or(|to| t < to))
    {
        adj.entry(e.a.to_string())
            .or_default()
            .insert(e.b.to_string());
        adj.entry(e.b.to_string())
            .or_default()
            .insert(e.a.to_string());
    }
    adj
}

/// Breadth-first components of the subgraph induced by `nodes`.
fn components(adj: &Adj, nodes: &BTreeSet<String>) -> Vec<BTreeSet<String>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for start in nodes {
        if !seen.insert(start.clone()) {
            continue;
        }
        let mut comp = BTreeSet::from([start.clone()]);
        let mut queue = VecDeque::from([start.clone()]);
        while let Some(n) = queue.pop_front() {
            for m in adj.get(&n).into_iter().flatten() {
                if nodes.contains(m) && seen.insert(m.clone()) {
                    comp.insert(m.clone());
                    queue.push_back(m.clone());
                }
            }
        }
        out.push(comp);
    }
    out
}

/// (rule, subjects) pairs the connectivity and maximality checks should emit.
fn oracle(case: &GraphCase) -> BTreeSet<(Rule, Vec<String>)> {
    let adj = adjacency(&case.kb, case.at);
    let live: Vec<_> = case
        .kb
        .quantities()
        .filter(|q| q.is_live_at(case.at))
        .collect();
    let mut expected = BTreeSet::new();
    for q in &live {
        let members: BTreeSet<String> = q.granules.iter().map(|g| g.to_string()).collect();
        let comps = components(&adj, &members);
        let isolated: Vec<String> = comps
            .iter()
            .filter(|c| c.len() == 1)
            .flatten()
            .cloned()
            .collect();
        if !isolated.is_empty() {
            let mut subjects = vec![q.id.to_string()];
            subjects.extend(isolated);
            expected.insert((Rule::ExternalConnection, subjects));
        }
        if comps.iter().filter(|c| c.len() > 1).count() > 1 {
            expected.insert((Rule::Connectivity, vec![q.id.to_string()]));
        }
    }
    for (i, x) in live.iter().enumerate() {
        for y in &live[i + 1..] {
            if x.kind != y.kind {
                continue;
            }
            let touching = x.granules.iter().any(|g| {
                adj.get(g.as_str())
                    .is_some_and(|ns| ns.iter().any(|n| y.granules.contains(n.as_str())))
            });
            if touching || !x.granules.is_disjoint(&y.granules) {
                expected.insert((
                    Rule::MaximalitySameKind,
                    vec![x.id.to_string(), y.id.to_string()],
                ));
            }
        }
    }
    expected
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn topology_checks_agree_with_graph_search(seed in any::<u64>()) {
        let case = random_graph_kb(seed, 30);
        let v = case.kb.validator();
        let got: BTreeSet<(Rule, Vec<String>)> = v
            .check_connectivity(case.at)
            .into_iter()
            .chain(v.check_maximality(case.at))
            .map(|x| (x.rule, x.subjects))
            .collect();
        prop_assert_eq!(got, oracle(&case));
    }

    #[test]
    fn inclusion_check_names_exactly_the_missing_granule(seed in any::<u64>()) {
        let clean = random_subquantity_kb(seed, false);
        prop_assert!(clean.kb.validator().check_subquantity_inclusion().is_empty());
        prop_assert!(clean.kb.validate().is_clean(), "{:?}", clean.kb.validate());

        let broken = random_subquantity_kb(seed, true);
        let (link, granule) = broken.removed.clone().unwrap();
        let found = broken.kb.validator().check_subquantity_inclusion();
        prop_assert_eq!(found.len(), 1);
        prop_assert_eq!(
            &found[0].subjects,
            &vec![link.part.to_string(), link.whole.to_string(), granule.to_string()]
        );
    }
}

#[test]
fn validate_world_only_looks_at_one_time() {
    let kb = import(
        &std::fs::read_to_string(
            PathBuf::from(env!("CARGO_MANIFEST_DIR"))
                .join("fixtures/faults/MAXIMALITY_SAME_KIND.mpkb"),
        )
        .unwrap(),
    )
    .unwrap();
    // q2 only exists from t1.
    assert!(kb.validator().validate_world(TimePoint(0)).is_clean());
    let at1 = kb.validator().validate_world(TimePoint(1));
    assert_eq!(at1.violations.len(), 1);
    assert_eq!(at1.worlds.len(), 1);
}
