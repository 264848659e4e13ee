//! Complete d-ary tree topology with implicit level-order addressing.
//!
//! No adjacency is stored: a node is identified by `(level, index)` and
//! parent/child navigation is arithmetic. This keeps trees with millions of
//! leaves free, which the trial farms rely on.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Address of a node: `level` 0 is the root, `index` runs over `d^level`
/// nodes left to right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeRef {
    pub level: u32,
    pub index: u64,
}

impl NodeRef {
    pub fn new(level: u32, index: u64) -> Self {
        NodeRef { level, index }
    }

    pub const ROOT: NodeRef = NodeRef { level: 0, index: 0 };
}

impl std::fmt::Display for NodeRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.level, self.index)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("arity must be at least 2, got {0}")]
    ArityTooSmall(u64),
    #[error("height must be at least 1, got {0}")]
    HeightTooSmall(u32),
    #[error("tree with d={d}, h={h} exceeds the node cap of {cap}")]
    TooManyNodes { d: u64, h: u32, cap: u64 },
    #[error("node {0} is not part of this tree")]
    InvalidNode(NodeRef),
}

/// Rooted complete d-ary tree of `height` levels below the root.
///
/// Level `height` is the leaf level; every internal node has exactly
/// `arity` children. Children of `(l, i)` are `(l+1, arity*i .. arity*i+arity-1)`,
/// the parent of `(l, i)` is `(l-1, i / arity)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeTopology {
    arity: u64,
    height: u32,
}

/// Default ceiling on total node count; guards accidental `d^h` blowups
/// before any per-node allocation happens downstream.
pub const DEFAULT_NODE_CAP: u64 = 1 << 40;

impl TreeTopology {
    pub fn new(arity: u64, height: u32) -> Result<Self, TreeError> {
        Self::with_node_cap(arity, height, DEFAULT_NODE_CAP)
    }

    pub fn with_node_cap(arity: u64, height: u32, cap: u64) -> Result<Self, TreeError> {
        if arity < 2 {
            return Err(TreeError::ArityTooSmall(arity));
        }
        if height < 1 {
            return Err(TreeError::HeightTooSmall(height));
        }
        let mut total: u128 = 0;
        let mut level_count: u128 = 1;
        for _ in 0..=height {
            total += level_count;
            level_count *= arity as u128;
            if total > cap as u128 {
                return Err(TreeError::TooManyNodes { d: arity, h: height, cap });
            }
        }
        Ok(TreeTopology { arity, height })
    }

    pub fn arity(&self) -> u64 {
        self.arity
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Number of nodes at `level`, i.e. `d^level`.
    pub fn level_size(&self, level: u32) -> u64 {
        self.arity.pow(level)
    }

    pub fn leaf_count(&self) -> u64 {
        self.level_size(self.height)
    }

    pub fn total_nodes(&self) -> u64 {
        (0..=self.height).map(|l| self.level_size(l)).sum()
    }

    pub fn contains(&self, node: NodeRef) -> bool {
        node.level <= self.height && node.index < self.level_size(node.level)
    }

    fn check(&self, node: NodeRef) -> Result<(), TreeError> {
        if self.contains(node) {
            Ok(())
        } else {
            Err(TreeError::InvalidNode(node))
        }
    }

    pub fn is_leaf(&self, node: NodeRef) -> bool {
        node.level == self.height
    }

    pub fn parent(&self, node: NodeRef) -> Option<NodeRef> {
        if node.level == 0 {
            None
        } else {
            Some(NodeRef::new(node.level - 1, node.index / self.arity))
        }
    }

    pub fn children(&self, node: NodeRef) -> impl Iterator<Item = NodeRef> + '_ {
        let level = node.level + 1;
        let base = node.index * self.arity;
        let take = if node.level < self.height { self.arity } else { 0 };
        (0..take).map(move |c| NodeRef::new(level, base + c))
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeRef> + '_ {
        let level = self.height;
        (0..self.leaf_count()).map(move |i| NodeRef::new(level, i))
    }

    /// Ancestor of `node` at `level` (requires `level <= node.level`).
    pub fn ancestor_at(&self, node: NodeRef, level: u32) -> NodeRef {
        debug_assert!(level <= node.level);
        let mut idx = node.index;
        for _ in level..node.level {
            idx /= self.arity;
        }
        NodeRef::new(level, idx)
    }

    /// True if `anc` lies on the root path of `node` (inclusive).
    pub fn is_ancestor_or_self(&self, anc: NodeRef, node: NodeRef) -> bool {
        anc.level <= node.level && self.ancestor_at(node, anc.level) == anc
    }

    /// Leaves of the subtree rooted at `node`.
    pub fn subtree_leaves(&self, node: NodeRef) -> impl Iterator<Item = NodeRef> + '_ {
        let span = self.level_size(self.height - node.level);
        let base = node.index * span;
        let level = self.height;
        (0..span).map(move |i| NodeRef::new(level, base + i))
    }

    pub fn subtree_size(&self, node: NodeRef) -> u64 {
        (0..=(self.height - node.level)).map(|l| self.level_size(l)).sum()
    }

    /// Number of edges on the unique path between `u` and `v`.
    pub fn graph_distance(&self, u: NodeRef, v: NodeRef) -> Result<u64, TreeError> {
        self.check(u)?;
        self.check(v)?;
        let (mut a, mut b) = (u, v);
        let mut dist = 0u64;
        while a.level > b.level {
            a = self.parent(a).expect("non-root has a parent");
            dist += 1;
        }
        while b.level > a.level {
            b = self.parent(b).expect("non-root has a parent");
            dist += 1;
        }
        while a != b {
            a = self.parent(a).expect("mismatched nodes reach the root");
            b = self.parent(b).expect("mismatched nodes reach the root");
            dist += 2;
        }
        Ok(dist)
    }

    /// Lowest common ancestor of two nodes.
    pub fn common_ancestor(&self, u: NodeRef, v: NodeRef) -> NodeRef {
        let (mut a, mut b) = (u, v);
        while a.level > b.level {
            a = self.parent(a).unwrap();
        }
        while b.level > a.level {
            b = self.parent(b).unwrap();
        }
        while a != b {
            a = self.parent(a).unwrap();
            b = self.parent(b).unwrap();
        }
        a
    }
}

/// Convenience wrapper matching the builder naming used by the CLI.
pub fn build_tree(arity: u64, height: u32) -> Result<TreeTopology, TreeError> {
    TreeTopology::new(arity, height)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_binary_three_levels() {
        let t = build_tree(2, 3).unwrap();
        assert_eq!(t.leaf_count(), 8);
        assert_eq!(t.total_nodes(), 15);
    }

    #[test]
    fn ternary_single_level() {
        let t = build_tree(3, 1).unwrap();
        assert_eq!(t.leaf_count(), 3);
        let kids: Vec<_> = t.children(NodeRef::ROOT).collect();
        assert_eq!(kids.len(), 3);
        assert!(kids.iter().all(|c| t.is_leaf(*c)));
    }

    #[test]
    fn rejects_unary() {
        assert_eq!(build_tree(1, 5).unwrap_err(), TreeError::ArityTooSmall(1));
        assert_eq!(build_tree(2, 0).unwrap_err(), TreeError::HeightTooSmall(0));
    }

    #[test]
    fn rejects_over_cap() {
        let err = TreeTopology::with_node_cap(2, 10, 100).unwrap_err();
        assert!(matches!(err, TreeError::TooManyNodes { .. }));
    }

    #[test]
    fn sibling_distance_is_two() {
        let t = build_tree(2, 3).unwrap();
        let a = NodeRef::new(3, 4);
        let b = NodeRef::new(3, 5);
        assert_eq!(t.graph_distance(a, b).unwrap(), 2);
    }

    #[test]
    fn root_to_leaf_distance_is_height() {
        let t = build_tree(3, 4).unwrap();
        assert_eq!(t.graph_distance(NodeRef::ROOT, NodeRef::new(4, 17)).unwrap(), 4);
    }

    #[test]
    fn opposite_leaves_go_through_root() {
        let t = build_tree(2, 3).unwrap();
        assert_eq!(t.graph_distance(NodeRef::new(3, 0), NodeRef::new(3, 7)).unwrap(), 6);
    }

    #[test]
    fn invalid_node_rejected() {
        let t = build_tree(2, 3).unwrap();
        assert!(t.graph_distance(NodeRef::new(3, 8), NodeRef::ROOT).is_err());
        assert!(t.graph_distance(NodeRef::new(4, 0), NodeRef::ROOT).is_err());
    }

    #[test]
    fn parent_child_round_trip() {
        let t = build_tree(3, 3).unwrap();
        for level in 1..=3 {
            for index in 0..t.level_size(level) {
                let n = NodeRef::new(level, index);
                let p = t.parent(n).unwrap();
                assert!(t.children(p).any(|c| c == n));
            }
        }
    }

    #[test]
    fn ancestor_navigation() {
        let t = build_tree(2, 4).unwrap();
        let leaf = NodeRef::new(4, 13);
        assert_eq!(t.ancestor_at(leaf, 0), NodeRef::ROOT);
        assert_eq!(t.ancestor_at(leaf, 2), NodeRef::new(2, 3));
        assert!(t.is_ancestor_or_self(NodeRef::new(2, 3), leaf));
        assert!(!t.is_ancestor_or_self(NodeRef::new(2, 2), leaf));
        let sub: Vec<_> = t.subtree_leaves(NodeRef::new(2, 3)).collect();
        assert_eq!(sub, vec![NodeRef::new(4, 12), NodeRef::new(4, 13), NodeRef::new(4, 14), NodeRef::new(4, 15)]);
    }
}
