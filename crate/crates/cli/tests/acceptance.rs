//! Acceptance suite: one PASS/FAIL line per criterion. Run with
//! `cargo test -p matterprov-cli --test acceptance`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use matterprov::canonical::{export, import, replay, Document};
use matterprov::testkit::{random_graph_kb, random_subquantity_kb, random_valid_kb, Limits};
use matterprov::{dsl, Kb, Mode, Rule, TimePoint};

const FUZZED_LOGS: u64 = 1000;
const ROUND_TRIPS: u64 = 100;
const GRAPHS: u64 = 500;
const SUBQUANTITY_KBS: u64 = 200;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fuzzed(seed: u64) -> Kb {
    random_valid_kb(seed, Limits::default())
}

fn cli(args: &[&str]) -> (i32, String) {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios");
    let out = Command::new(env!("CARGO_BIN_EXE_matterprov"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).expect("utf-8"),
    )
}

fn lines(s: &str) -> Vec<&str> {
    s.lines().collect()
}

fn case_study() -> Outcome {
    let started = Instant::now();
    let (code, history) = cli(&["query", "casestudy.mp", "history", "grain1"]);
    let episodes: Vec<String> = history
        .lines()
        .map(|l| l.split_whitespace().take(3).collect::<Vec<_>>().join(" "))
        .collect();
    ensure(
        code == 0 && episodes == ["rock1 [t0, t1)", "rock3 [t1, t2)", "rock5 [t2, ∞)"],
        || format!("history grain1 gave {history:?}"),
    )?;

    let (code, prov) = cli(&[
        "query",
        "casestudy.mp",
        "provenance",
        "rock5",
        "--transitive",
    ]);
    ensure(code == 0 && lines(&prov) == ["rock1", "rock3"], || {
        format!("provenance rock5 gave {prov:?}")
    })?;

    let (code, classes) = cli(&["query", "casestudy.mp", "classify"]);
    let expected = [
        "rock1 OriginalPortion",
        "rock2 SubPortion",
        "rock3 SubPortion",
        "rock4 SubPortion",
        "rock5 SubPortion",
    ];
    ensure(code == 0 && lines(&classes) == expected, || {
        format!("classify gave {classes:?}")
    })?;

    let (code, common) = cli(&["query", "casestudy.mp", "ancestors", "rock2", "rock5"]);
    ensure(code == 0 && lines(&common).contains(&"rock1"), || {
        format!("ancestors gave {common:?}")
    })?;

    let (code, report) = cli(&["validate", "casestudy.mp"]);
    ensure(code == 0 && report == "0 violations\n", || {
        format!("validate gave {report:?} ({code})")
    })?;

    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!("5 commands in {} ms", elapsed.as_millis()))
}

fn axiom_suite() -> Outcome {
    for seed in 0..FUZZED_LOGS {
        let kb = fuzzed(seed);
        ensure(
            kb.event_log().len() <= 8 && kb.objects().count() <= 20,
            || format!("seed {seed} too large"),
        )?;
        let report = kb.validate();
        ensure(report.is_clean(), || {
            format!("seed {seed}: {:?}", report.violations)
        })?;
    }
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/faults");
    for rule in Rule::ALL {
        let text = std::fs::read_to_string(dir.join(format!("{rule}.mpkb")))
            .map_err(|e| format!("{rule}: {e}"))?;
        let kb = import(&text).map_err(|e| format!("{rule}: {e}"))?;
        let fired = kb.validate().rules_fired();
        ensure(fired == BTreeSet::from([rule]), || {
            format!("{rule} fixture fired {fired:?}")
        })?;
    }
    Ok(format!(
        "{FUZZED_LOGS} clean logs, {} fixtures each firing only their rule",
        Rule::ALL.len()
    ))
}

type Graph = BTreeMap<String, BTreeSet<String>>;

/// Direct inheritor -> donor links taken from the raw log.
fn log_links(kb: &Kb, sub_only: bool) -> Graph {
    let mut g = Graph::new();
    for e in kb.event_log() {
        for c in &e.created {
            for d in &e.donors {
                let donor = kb.quantity(d.as_str()).expect("donor exists");
                let shares = !c.granules.is_disjoint(&donor.granules);
                let sub = c.kind == donor.kind && c.granules.is_subset(&donor.granules);
                if shares && (!sub_only || sub) {
                    g.entry(c.id.to_string()).or_default().insert(d.to_string());
                }
            }
        }
    }
    g
}

fn invert(g: &Graph) -> Graph {
    let mut r = Graph::new();
    for (a, bs) in g {
        for b in bs {
            r.entry(b.clone()).or_default().insert(a.clone());
        }
    }
    r
}

/// Endpoints of every simple path leaving `start`, by explicit enumeration.
fn path_ends(g: &Graph, start: &str) -> BTreeSet<String> {
    let mut ends = BTreeSet::new();
    let mut stack: Vec<Vec<String>> = vec![vec![start.to_owned()]];
    while let Some(path) = stack.pop() {
        let last = path.last().expect("non-empty path");
        for next in g.get(last).into_iter().flatten() {
            if path.contains(next) {
                continue;
            }
            ends.insert(next.clone());
            let mut longer = path.clone();
            longer.push(next.clone());
            stack.push(longer);
        }
    }
    ends
}

fn strict_partial_order(rel: &BTreeMap<String, BTreeSet<String>>) -> Result<(), String> {
    for (a, above) in rel {
        ensure(!above.contains(a), || format!("{a} relates to itself"))?;
        for b in above {
            ensure(!rel[b].contains(a), || {
                format!("{a} and {b} relate both ways")
            })?;
            ensure(rel[b].is_subset(above), || {
                format!("not transitive through {a} -> {b}")
            })?;
        }
    }
    Ok(())
}

fn names(set: BTreeSet<matterprov::QuantityId>) -> BTreeSet<String> {
    set.into_iter().map(|q| q.to_string()).collect()
}

fn closure_oracle() -> Outcome {
    let mut checked = 0usize;
    for seed in 0..FUZZED_LOGS {
        let kb = fuzzed(seed);
        let p = kb.provenance();
        let up = log_links(&kb, false);
        let sub_down = invert(&log_links(&kb, true));
        let mut inherited = BTreeMap::new();
        let mut sub = BTreeMap::new();
        for q in kb.quantities() {
            let id = q.id.to_string();
            let got = names(p.inherited_from(&id, true).map_err(|e| e.to_string())?);
            ensure(got == path_ends(&up, &id), || {
                format!("seed {seed}: inherited_from({id})")
            })?;
            let got_sub = names(p.sub_portions_of(&id, true).map_err(|e| e.to_string())?);
            ensure(got_sub == path_ends(&sub_down, &id), || {
                format!("seed {seed}: sub_portions_of({id})")
            })?;
            inherited.insert(id.clone(), got);
            sub.insert(id, got_sub);
            checked += 1;
        }
        strict_partial_order(&inherited).map_err(|e| format!("seed {seed}: {e}"))?;
        strict_partial_order(&sub).map_err(|e| format!("seed {seed}: {e}"))?;
    }
    Ok(format!("{checked} quantities across {FUZZED_LOGS} logs"))
}

fn inverse_property() -> Outcome {
    let mut pairs = 0usize;
    for seed in 0..FUZZED_LOGS {
        let kb = fuzzed(seed);
        let p = kb.provenance();
        for transitive in [false, true] {
            let mut forward = BTreeSet::new();
            let mut backward = BTreeSet::new();
            for q in kb.quantities() {
                let id = q.id.to_string();
                for d in p
                    .inherited_from(&id, transitive)
                    .map_err(|e| e.to_string())?
                {
                    forward.insert((id.clone(), d.to_string()));
                }
                for i in p.donated_to(&id, transitive).map_err(|e| e.to_string())? {
                    backward.insert((i.to_string(), id.clone()));
                }
            }
            ensure(forward == backward, || {
                format!("seed {seed} (transitive: {transitive})")
            })?;
            pairs += forward.len();
        }
    }
    Ok(format!("{pairs} related pairs over {FUZZED_LOGS} logs"))
}

fn inclusion_check() -> Outcome {
    let mut links = 0usize;
    for seed in 0..SUBQUANTITY_KBS {
        let clean = random_subquantity_kb(seed, false);
        for link in &clean.links {
            let part = &clean
                .kb
                .quantity(link.part.as_str())
                .expect("part")
                .granules;
            let whole = &clean
                .kb
                .quantity(link.whole.as_str())
                .expect("whole")
                .granules;
            ensure(part.is_subset(whole), || {
                format!("seed {seed}: generator broke subset")
            })?;
        }
        let found = clean.kb.validator().check_subquantity_inclusion();
        ensure(found.is_empty(), || format!("seed {seed}: {found:?}"))?;
        links += clean.links.len();

        let broken = random_subquantity_kb(seed, true);
        let (link, granule) = broken.removed.clone().ok_or("no granule removed")?;
        let found = broken.kb.validator().check_subquantity_inclusion();
        let expected = [
            link.part.to_string(),
            link.whole.to_string(),
            granule.to_string(),
        ];
        ensure(found.len() == 1 && found[0].subjects == expected, || {
            format!("seed {seed}: expected one violation for {granule}, got {found:?}")
        })?;
    }
    Ok(format!(
        "{links} links clean, {SUBQUANTITY_KBS} single-granule removals each caught"
    ))
}

fn round_trip_one(kb: &Kb, label: &str) -> Result<(), String> {
    let once = export(kb);
    let imported = import(&once).map_err(|e| format!("{label}: {e}"))?;
    ensure(export(&imported) == once, || {
        format!("{label}: export/import/export differs")
    })?;
    let doc = Document::parse(&once).map_err(|e| format!("{label}: {e}"))?;
    let replayed = replay(&doc, Mode::Strict).map_err(|e| format!("{label}: {e}"))?;
    ensure(export(&replayed) == once, || {
        format!("{label}: replay differs")
    })
}

fn determinism() -> Outcome {
    let scenario = dsl::parse(dsl::CASE_STUDY).map_err(|d| format!("{d:?}"))?;
    let case = dsl::load(&scenario, Mode::Strict).map_err(|e| e.to_string())?;
    round_trip_one(&case, "case study")?;
    for seed in 0..ROUND_TRIPS {
        round_trip_one(&fuzzed(seed), &format!("seed {seed}"))?;
    }
    Ok(format!(
        "case study and {ROUND_TRIPS} fuzzed KBs byte-identical"
    ))
}

fn bfs_components(adj: &Graph, nodes: &BTreeSet<String>) -> Vec<BTreeSet<String>> {
    let mut seen = BTreeSet::new();
    let mut comps = Vec::new();
    for start in nodes {
        if seen.contains(start) {
            continue;
        }
        seen.insert(start.clone());
        let mut comp = BTreeSet::new();
        let mut queue = VecDeque::from([start.clone()]);
        while let Some(n) = queue.pop_front() {
            comp.insert(n.clone());
            for m in adj.get(&n).into_iter().flatten() {
                if nodes.contains(m) && seen.insert(m.clone()) {
                    queue.push_back(m.clone());
                }
            }
        }
        comps.push(comp);
    }
    comps
}

/// Component count by union-find, as a second opinion on the BFS.
fn union_find_count(adj: &Graph, nodes: &BTreeSet<String>) -> usize {
    let index: BTreeMap<&String, usize> = nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    for (a, bs) in adj {
        for b in bs {
            if let (Some(&x), Some(&y)) = (index.get(a), index.get(b)) {
                let (rx, ry) = (find(&mut parent, x), find(&mut parent, y));
                parent[rx] = ry;
            }
        }
    }
    (0..nodes.len())
        .filter(|&i| find(&mut parent, i) == i)
        .count()
}

fn active_adjacency(kb: &Kb, t: TimePoint) -> Graph {
    let mut adj = Graph::new();
    for e in kb.adjacency() {
        if e.from <= t && e.to.is_none_or(|to| t < to) {
            adj.entry(e.a.to_string())
                .or_default()
                .insert(e.b.to_string());
            adj.entry(e.b.to_string())
                .or_default()
                .insert(e.a.to_string());
        }
    }
    adj
}

fn mereotopology() -> Outcome {
    let mut fired = 0usize;
    for seed in 0..GRAPHS {
        let case = random_graph_kb(seed, 30);
        ensure(case.kb.objects().count() <= 30, || {
            format!("seed {seed}: too many nodes")
        })?;
        let adj = active_adjacency(&case.kb, case.at);
        let live: Vec<_> = case
            .kb
            .quantities()
            .filter(|q| q.is_live_at(case.at))
            .collect();
        let mut expected = BTreeSet::new();
        for q in &live {
            let members: BTreeSet<String> = q.granules.iter().map(|g| g.to_string()).collect();
            let comps = bfs_components(&adj, &members);
            ensure(comps.len() == union_find_count(&adj, &members), || {
                format!("seed {seed}: oracles disagree")
            })?;
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
                let touch = x.granules.iter().any(|g| {
                    adj.get(g.as_str())
                        .is_some_and(|ns| ns.iter().any(|n| y.granules.contains(n.as_str())))
                });
                if x.kind == y.kind && (touch || !x.granules.is_disjoint(&y.granules)) {
                    expected.insert((
                        Rule::MaximalitySameKind,
                        vec![x.id.to_string(), y.id.to_string()],
                    ));
                }
            }
        }
        let v = case.kb.validator();
        let got: BTreeSet<(Rule, Vec<String>)> = v
            .check_connectivity(case.at)
            .into_iter()
            .chain(v.check_maximality(case.at))
            .map(|x| (x.rule, x.subjects))
            .collect();
        ensure(got == expected, || {
            format!("seed {seed}: got {got:?}, oracle {expected:?}")
        })?;
        fired += got.len();
    }
    Ok(format!("{GRAPHS} graphs, {fired} violations matched"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("case-study reproduction", case_study),
        ("axiom suite", axiom_suite),
        ("closure oracle", closure_oracle),
        ("inverse property", inverse_property),
        ("sub-quantity inclusion", inclusion_check),
        ("determinism and round trip", determinism),
        ("mereotopology oracle", mereotopology),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".to_owned()));
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
