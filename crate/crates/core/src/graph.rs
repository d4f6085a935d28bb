//! Small union-find used for connectivity over adjacency edges.

use std::collections::BTreeMap;

pub(crate) struct DisjointSets<'a> {
    index: BTreeMap<&'a str, usize>,
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl<'a> DisjointSets<'a> {
    pub(crate) fn new(nodes: impl IntoIterator<Item = &'a str>) -> Self {
        let mut index = BTreeMap::new();
        for n in nodes {
            let next = index.len();
            index.entry(n).or_insert(next);
        }
        let len = index.len();
        DisjointSets {
            index,
            parent: (0..len).collect(),
            rank: vec![0; len],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Joins the sets of `a` and `b`; edges touching unknown nodes are ignored.
    pub(crate) fn union(&mut self, a: &str, b: &str) {
        let (Some(&x), Some(&y)) = (self.index.get(a), self.index.get(b)) else {
            return;
        };
        let (rx, ry) = (self.find(x), self.find(y));
        if rx == ry {
            return;
        }
        match self.rank[rx].cmp(&self.rank[ry]) {
            std::cmp::Ordering::Less => self.parent[rx] = ry,
            std::cmp::Ordering::Greater => self.parent[ry] = rx,
            std::cmp::Ordering::Equal => {
                self.parent[ry] = rx;
                self.rank[rx] += 1;
            }
        }
    }

    pub(crate) fn component_count(&mut self) -> usize {
        (0..self.parent.len())
            .filter(|&i| self.find(i) == i)
            .count()
    }
}
