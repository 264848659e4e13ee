//! The semi-supervised inference input: labeled and unlabeled leaf rows.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::LabelId;
use crate::model::{ModelVariant, Representation};
use crate::tree::{NodeRef, TreeTopology};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DataError {
    #[error("leaf {0} appears more than once")]
    DuplicateLeaf(NodeRef),
    #[error("node {0} is not a leaf of the declared tree")]
    NotALeaf(NodeRef),
    #[error("dataset covers {got} leaves but the tree has {want}")]
    IncompleteLeafCover { got: u64, want: u64 },
    #[error("representation for {node}: {source}")]
    BadRepresentation {
        node: NodeRef,
        source: crate::model::ModelError,
    },
}

/// Echoed generation parameters used to validate rows and to tell readers
/// which model produced the file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataHeader {
    pub d: u64,
    pub h: u32,
    pub q: u16,
    pub k: usize,
    pub model: ModelVariant,
}

/// Labeled and unlabeled leaf rows.
///
/// The `NodeRef` on unlabeled rows is retained so ground-truth scoring can
/// match rows back to the generating tree; inference code must treat the
/// row order as the only identity and never consult these references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub header: DataHeader,
    pub labeled: Vec<(NodeRef, Representation, LabelId)>,
    pub unlabeled: Vec<(NodeRef, Representation)>,
}

impl Dataset {
    /// Check the partition invariant: the two row sets together cover the
    /// leaf level exactly once, and all representations fit the header.
    pub fn validate(&self) -> Result<(), DataError> {
        let tree = TreeTopology::new(self.header.d, self.header.h)
            .expect("header parameters describe a valid tree");
        let mut seen: BTreeSet<NodeRef> = BTreeSet::new();
        let nodes = self
            .labeled
            .iter()
            .map(|(n, r, _)| (*n, r))
            .chain(self.unlabeled.iter().map(|(n, r)| (*n, r)));
        for (node, rep) in nodes {
            if !tree.is_leaf(node) || !tree.contains(node) {
                return Err(DataError::NotALeaf(node));
            }
            if !seen.insert(node) {
                return Err(DataError::DuplicateLeaf(node));
            }
            Representation::checked(rep.letters().to_vec(), self.header.q, self.header.k)
                .map_err(|source| DataError::BadRepresentation { node, source })?;
        }
        let want = tree.leaf_count();
        if seen.len() as u64 != want {
            return Err(DataError::IncompleteLeafCover { got: seen.len() as u64, want });
        }
        Ok(())
    }

    pub fn leaf_count(&self) -> usize {
        self.labeled.len() + self.unlabeled.len()
    }

    /// All leaf rows in `(level, index)` order as (node, rep, label).
    pub fn rows_in_order(&self) -> Vec<(NodeRef, &Representation, Option<LabelId>)> {
        let mut rows: Vec<(NodeRef, &Representation, Option<LabelId>)> = self
            .labeled
            .iter()
            .map(|(n, r, l)| (*n, r, Some(*l)))
            .chain(self.unlabeled.iter().map(|(n, r)| (*n, r, None)))
            .collect();
        rows.sort_by_key(|(n, _, _)| (n.level, n.index));
        rows
    }
}
