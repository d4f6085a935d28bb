//! Workloads shared by the benchmarks.

use matterprov::canonical::export;
use matterprov::{Kb, KindDecl, NewQuantity, TimePoint, TransferSpec};

/// One rock of `2^depth * 2` grains in a row, split in half at every level
/// until each piece holds two grains. Grains touch their neighbours in the
/// row and the edge across each cut is dropped when the cut happens. Each
/// split is its own event, one tick after the previous one.
pub fn split_kb(depth: u32) -> Kb {
    let n = 2usize << depth;
    let mut kb = Kb::new();
    kb.declare_kind(KindDecl::object_kind("Grain")).unwrap();
    kb.declare_kind(KindDecl::quantity_kind("Rock", ["Grain"]))
        .unwrap();
    let grain = |i: usize| format!("g{i}");
    for i in 0..n {
        kb.create_object(grain(i), "Grain", TimePoint(0)).unwrap();
    }
    for i in 1..n {
        kb.assert_adjacency(grain(i - 1), grain(i), TimePoint(0))
            .unwrap();
    }
    kb.apply_creation(
        "create-r0",
        NewQuantity::new("r0", "Rock", (0..n).map(grain)),
        TimePoint(0),
    )
    .unwrap();

    // Pieces are named by their start index and length.
    let mut pieces = vec![("r0".to_owned(), 0, n)];
    let mut clock = 0;
    for level in 1..=depth {
        let mut next = Vec::new();
        for (id, start, len) in pieces {
            clock += 1;
            let t = TimePoint(clock);
            let half = len / 2;
            let left = format!("r{level}_{start}");
            let right = format!("r{level}_{}", start + half);
            kb.retract_adjacency(grain(start + half - 1), grain(start + half), t)
                .unwrap();
            let spec = TransferSpec::new(
                format!("split-{id}"),
                [id.as_str()],
                vec![
                    NewQuantity::new(left.clone(), "Rock", (start..start + half).map(grain)),
                    NewQuantity::new(
                        right.clone(),
                        "Rock",
                        (start + half..start + len).map(grain),
                    ),
                ],
            );
            kb.apply_transfer(spec, t).unwrap();
            next.push((left, start, half));
            next.push((right, start + half, half));
        }
        pieces = next;
    }
    kb
}

/// The id of some quantity at the bottom of `split_kb(depth)`.
pub fn leaf_of(depth: u32) -> String {
    if depth == 0 {
        "r0".to_owned()
    } else {
        format!("r{depth}_0")
    }
}

pub fn exported(depth: u32) -> String {
    export(&split_kb(depth))
}
