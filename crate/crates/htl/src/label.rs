//! Nested label assignments: each label occupies one node and everything
//! below it, and label sets grow monotonically along root-to-leaf paths.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::tree::{NodeRef, TreeTopology};

/// Labels are opaque small integers; human-readable names are a
/// presentation concern outside the library.
pub type LabelId = u32;

/// Sparse map from nodes to their label sets. Nodes absent from the map
/// carry the empty set. The structure can represent invalid states so that
/// [`validate_labeling`] has something to report on.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAssignment {
    node_labels: BTreeMap<NodeRef, BTreeSet<LabelId>>,
}

/// First violation found, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelingCheck {
    Ok,
    /// `label` is present on `node` but missing on `ancestor` below which
    /// `node` sits, or the carrier set of `label` is not a full subtree;
    /// `(node, witness)` are the offending pair.
    Violation {
        label: LabelId,
        node: NodeRef,
        witness: NodeRef,
    },
}

impl LabelAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build the downward closure from `label -> anchor node`.
    pub fn from_anchors(tree: &TreeTopology, anchors: &BTreeMap<LabelId, NodeRef>) -> Self {
        let mut out = Self::new();
        for (&label, &anchor) in anchors {
            out.add_subtree(tree, label, anchor);
        }
        out
    }

    /// Attach `label` to `anchor` and all of its descendants.
    pub fn add_subtree(&mut self, tree: &TreeTopology, label: LabelId, anchor: NodeRef) {
        let mut frontier = vec![anchor];
        while let Some(node) = frontier.pop() {
            self.insert(node, label);
            frontier.extend(tree.children(node));
        }
    }

    /// Attach `label` to a single node without closure (used to build
    /// deliberately broken assignments in tests and validators).
    pub fn insert(&mut self, node: NodeRef, label: LabelId) {
        self.node_labels.entry(node).or_default().insert(label);
    }

    pub fn labels_of(&self, node: NodeRef) -> Option<&BTreeSet<LabelId>> {
        self.node_labels.get(&node)
    }

    pub fn is_empty(&self) -> bool {
        self.node_labels.values().all(|s| s.is_empty())
    }

    /// All distinct labels present anywhere.
    pub fn labels(&self) -> BTreeSet<LabelId> {
        self.node_labels.values().flatten().copied().collect()
    }

    /// Nodes carrying `label`.
    pub fn carriers(&self, label: LabelId) -> Vec<NodeRef> {
        self.node_labels
            .iter()
            .filter(|(_, set)| set.contains(&label))
            .map(|(node, _)| *node)
            .collect()
    }

    /// Highest (closest-to-root) node carrying `label`; for a valid
    /// assignment this is the label's anchor.
    pub fn anchor(&self, label: LabelId) -> Option<NodeRef> {
        self.carriers(label).into_iter().min_by_key(|n| (n.level, n.index))
    }

    /// The most specific label on a node: deepest anchor among the labels it
    /// carries, smallest id on a tie. This is the single label a dataset row
    /// records for a labeled leaf.
    pub fn most_specific(&self, node: NodeRef) -> Option<LabelId> {
        let set = self.node_labels.get(&node)?;
        set.iter()
            .map(|&l| {
                let a = self.anchor(l).expect("carried label has an anchor");
                (a.level, std::cmp::Reverse(l))
            })
            .max()
            .map(|(_, rev)| rev.0)
    }
}

/// Check both structural invariants; report the first violating
/// `(label, node pair)` in deterministic order.
pub fn validate_labeling(tree: &TreeTopology, labels: &LabelAssignment) -> LabelingCheck {
    for label in labels.labels() {
        let carriers = labels.carriers(label);
        let anchor = carriers
            .iter()
            .min_by_key(|n| (n.level, n.index))
            .copied()
            .expect("label has at least one carrier");
        let carrier_set: BTreeSet<NodeRef> = carriers.iter().copied().collect();
        // Every carrier must sit under the anchor.
        for &node in &carriers {
            if !tree.is_ancestor_or_self(anchor, node) {
                return LabelingCheck::Violation { label, node, witness: anchor };
            }
        }
        // The anchor's subtree must be fully carried.
        let mut frontier = vec![anchor];
        while let Some(node) = frontier.pop() {
            if !carrier_set.contains(&node) {
                return LabelingCheck::Violation { label, node, witness: anchor };
            }
            frontier.extend(tree.children(node));
        }
    }
    LabelingCheck::Ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::build_tree;

    #[test]
    fn root_only_label_is_ok() {
        let tree = build_tree(2, 2).unwrap();
        let mut anchors = BTreeMap::new();
        anchors.insert(0, NodeRef::ROOT);
        let labels = LabelAssignment::from_anchors(&tree, &anchors);
        assert_eq!(validate_labeling(&tree, &labels), LabelingCheck::Ok);
    }

    #[test]
    fn empty_assignment_is_ok() {
        let tree = build_tree(2, 2).unwrap();
        assert_eq!(validate_labeling(&tree, &LabelAssignment::new()), LabelingCheck::Ok);
    }

    #[test]
    fn siblings_without_parent_violate() {
        let tree = build_tree(2, 2).unwrap();
        let mut labels = LabelAssignment::new();
        labels.insert(NodeRef::new(2, 0), 5);
        labels.insert(NodeRef::new(2, 1), 5);
        match validate_labeling(&tree, &labels) {
            LabelingCheck::Violation { label, .. } => assert_eq!(label, 5),
            LabelingCheck::Ok => panic!("expected a violation"),
        }
    }

    #[test]
    fn carrier_outside_anchor_subtree_violates() {
        let tree = build_tree(2, 2).unwrap();
        let mut labels = LabelAssignment::new();
        labels.add_subtree(&tree, 1, NodeRef::new(1, 0));
        labels.insert(NodeRef::new(2, 3), 1);
        assert!(matches!(validate_labeling(&tree, &labels), LabelingCheck::Violation { label: 1, .. }));
    }

    #[test]
    fn most_specific_prefers_deeper_anchor() {
        let tree = build_tree(2, 2).unwrap();
        let mut labels = LabelAssignment::new();
        labels.add_subtree(&tree, 0, NodeRef::ROOT);
        labels.add_subtree(&tree, 7, NodeRef::new(1, 1));
        assert_eq!(labels.most_specific(NodeRef::new(2, 3)), Some(7));
        assert_eq!(labels.most_specific(NodeRef::new(2, 0)), Some(0));
    }
}
