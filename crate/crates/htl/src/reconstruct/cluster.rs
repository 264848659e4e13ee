//! Local structure: group the current working nodes into rooted subtrees
//! of the next window using estimated pairwise distances.

use thiserror::Error;

use super::Shape;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StructureError {
    #[error("units {a} and {b} have inconsistent member distances at round {round}")]
    InconsistentPair { a: usize, b: usize, round: u32 },
    #[error("round {round} produced a group of {size} units, expected {expected}")]
    BadGroupSize { round: u32, size: usize, expected: usize },
    #[error("round {round}: group starting at unit {unit} is not fully mutually adjacent")]
    NotAClique { round: u32, unit: usize },
}

/// Upper-triangular pair store over `n` items; `None` encodes "far".
pub struct PairDistances {
    n: usize,
    entries: Vec<Option<u32>>,
}

impl PairDistances {
    pub fn new(n: usize) -> Self {
        PairDistances { n, entries: vec![None; n * (n - 1) / 2] }
    }

    /// Build from an order-preserving flat pair list (the output of a
    /// parallel map over [`pair_indices`]).
    pub fn from_flat(n: usize, entries: Vec<Option<u32>>) -> Self {
        debug_assert_eq!(entries.len(), n * (n - 1) / 2);
        PairDistances { n, entries }
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        j * (j - 1) / 2 + i
    }

    pub fn set(&mut self, i: usize, j: usize, v: Option<u32>) {
        let s = self.slot(i.min(j), i.max(j));
        self.entries[s] = v;
    }

    pub fn get(&self, i: usize, j: usize) -> Option<u32> {
        if i == j {
            return Some(0);
        }
        self.entries[self.slot(i.min(j), i.max(j))]
    }
}

/// Enumerate `(i, j)` with `i < j < n` in the storage order of
/// [`PairDistances::from_flat`].
pub fn pair_indices(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for j in 1..n {
        for i in 0..j {
            out.push((i, j));
        }
    }
    out
}

/// One recovered subtree of the window: its member working-node indices
/// (sorted) and the internal topology whose leaf slots index into
/// `members`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub members: Vec<usize>,
    pub shape: Shape,
}

struct Unit {
    members: Vec<usize>,
    shape: Shape,
}

fn consensus(dists: &PairDistances, a: &Unit, b: &Unit, round: u32, ua: usize, ub: usize) -> Result<Option<u32>, StructureError> {
    let mut value: Option<Option<u32>> = None;
    for &x in &a.members {
        for &y in &b.members {
            let d = dists.get(x, y);
            match value {
                None => value = Some(d),
                Some(prev) if prev == d => {}
                Some(_) => return Err(StructureError::InconsistentPair { a: ua, b: ub, round }),
            }
        }
    }
    Ok(value.expect("units are non-empty"))
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet((0..n).collect())
    }
    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let root = self.find(self.0[x]);
            self.0[x] = root;
        }
        self.0[x]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Merge `n` working nodes into `n / d^rounds` clusters: at round `j`,
/// units whose members sit at mutual estimated distance `2j` become the
/// `d` children of one new unit. Any deviation from an exact d-ary
/// grouping is a reconstruction failure for the caller to surface.
pub fn local_structure(
    dists: &PairDistances,
    n: usize,
    d: usize,
    rounds: u32,
) -> Result<Vec<Cluster>, StructureError> {
    let mut units: Vec<Unit> =
        (0..n).map(|i| Unit { members: vec![i], shape: Shape::Leaf(i) }).collect();
    for round in 1..=rounds {
        let target = 2 * round;
        let m = units.len();
        let mut edges: Vec<(usize, usize)> = Vec::new();
        let mut dsu = DisjointSet::new(m);
        for a in 0..m {
            for b in (a + 1)..m {
                let c = consensus(dists, &units[a], &units[b], round, a, b)?;
                if c == Some(target) {
                    edges.push((a, b));
                    dsu.union(a, b);
                }
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for u in 0..m {
            groups.entry(dsu.find(u)).or_default().push(u);
        }
        let mut edge_count = vec![0usize; m];
        for &(a, b) in &edges {
            let root = dsu.find(a);
            debug_assert_eq!(root, dsu.find(b));
            edge_count[root] += 1;
        }
        let mut next: Vec<Unit> = Vec::with_capacity(m / d);
        for (root, group) in groups {
            if group.len() != d {
                return Err(StructureError::BadGroupSize { round, size: group.len(), expected: d });
            }
            if edge_count[root] != d * (d - 1) / 2 {
                return Err(StructureError::NotAClique { round, unit: group[0] });
            }
            let mut members = Vec::new();
            let mut children = Vec::new();
            for u in group {
                let unit = std::mem::replace(
                    &mut units[u],
                    Unit { members: vec![], shape: Shape::Leaf(usize::MAX) },
                );
                members.extend(unit.members);
                children.push(unit.shape);
            }
            members.sort_unstable();
            next.push(Unit { members, shape: Shape::Internal(children) });
        }
        next.sort_by_key(|u| u.members[0]);
        units = next;
    }
    Ok(units
        .into_iter()
        .map(|u| {
            let shape = remap_leaves(u.shape, &u.members);
            Cluster { members: u.members, shape }
        })
        .collect())
}

/// Rewrite absolute working-node indices into member-slot positions.
fn remap_leaves(shape: Shape, members: &[usize]) -> Shape {
    match shape {
        Shape::Leaf(abs) => {
            let slot = members.binary_search(&abs).expect("leaf is a member");
            Shape::Leaf(slot)
        }
        Shape::Internal(children) => {
            Shape::Internal(children.into_iter().map(|c| remap_leaves(c, members)).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{build_tree, NodeRef};

    /// Distances filled from a true tree: the noiseless case must recover
    /// the exact grouping.
    fn true_distances(d: u64, h: u32) -> (PairDistances, usize) {
        let tree = build_tree(d, h).unwrap();
        let n = tree.leaf_count() as usize;
        let mut dists = PairDistances::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let dist = tree
                    .graph_distance(NodeRef::new(h, i as u64), NodeRef::new(h, j as u64))
                    .unwrap() as u32;
                dists.set(i, j, Some(dist));
            }
        }
        (dists, n)
    }

    #[test]
    fn recovers_exact_grouping_from_true_distances() {
        let (dists, n) = true_distances(2, 3);
        let clusters = local_structure(&dists, n, 2, 2).unwrap();
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].members, vec![0, 1, 2, 3]);
        assert_eq!(clusters[1].members, vec![4, 5, 6, 7]);
        match &clusters[0].shape {
            Shape::Internal(children) => {
                assert_eq!(children.len(), 2);
                assert_eq!(children[0], Shape::Internal(vec![Shape::Leaf(0), Shape::Leaf(1)]));
            }
            _ => panic!("expected internal shape"),
        }
    }

    #[test]
    fn pairs_at_distance_two_become_siblings() {
        let (dists, n) = true_distances(2, 1);
        let clusters = local_structure(&dists, n, 2, 1).unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].members, vec![0, 1]);
    }

    #[test]
    fn inconsistent_distances_fail() {
        let (mut dists, n) = true_distances(2, 2);
        // Claim leaf 0 is adjacent to everything: no 2-ary clique survives.
        dists.set(0, 2, Some(2));
        let err = local_structure(&dists, n, 2, 2).unwrap_err();
        assert!(matches!(err, StructureError::BadGroupSize { .. } | StructureError::NotAClique { .. }));
    }

    #[test]
    fn far_entries_fail_grouping() {
        let (mut dists, n) = true_distances(2, 2);
        dists.set(0, 1, None);
        let err = local_structure(&dists, n, 2, 2).unwrap_err();
        assert!(matches!(err, StructureError::BadGroupSize { .. }));
    }
}
