//! Histogram compression of the labeled data.
//!
//! A scheme is a list of position subsets; compressing a dataset replaces
//! its labeled rows by per-subset, per-tuple, per-label counts while the
//! unlabeled rows pass through untouched. Shallow classifiers consume only
//! this view.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::label::LabelId;
use crate::model::{Letter, Representation};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompressError {
    #[error("subset {subset} references position {position}, but k = {k}")]
    PositionOutOfRange { subset: usize, position: usize, k: usize },
    #[error("subset {0} is empty")]
    EmptySubset(usize),
}

/// Position subsets, each stored in ascending order; tuples are serialized
/// in that order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressionScheme {
    subsets: Vec<Vec<usize>>,
}

impl CompressionScheme {
    pub fn new(mut subsets: Vec<Vec<usize>>) -> Self {
        for s in &mut subsets {
            s.sort_unstable();
            s.dedup();
        }
        CompressionScheme { subsets }
    }

    /// One singleton subset per position: the per-column histograms.
    pub fn canonical(k: usize) -> Self {
        CompressionScheme { subsets: (0..k).map(|i| vec![i]) .collect() }
    }

    /// Consecutive disjoint windows of width `s` (final window may be
    /// shorter).
    pub fn windows(k: usize, s: usize) -> Self {
        assert!(s >= 1);
        let mut subsets = Vec::new();
        let mut start = 0;
        while start < k {
            subsets.push((start..(start + s).min(k)).collect());
            start += s;
        }
        CompressionScheme { subsets }
    }

    /// The whole position range as a single subset: lossless on labeled data.
    pub fn full(k: usize) -> Self {
        CompressionScheme { subsets: vec![(0..k).collect()] }
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    /// Largest subset size (the `s` in an s-shallow algorithm).
    pub fn max_subset_size(&self) -> usize {
        self.subsets.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn validate(&self, k: usize) -> Result<(), CompressError> {
        for (i, s) in self.subsets.iter().enumerate() {
            if s.is_empty() {
                return Err(CompressError::EmptySubset(i));
            }
            if let Some(&p) = s.iter().find(|&&p| p >= k) {
                return Err(CompressError::PositionOutOfRange { subset: i, position: p, k });
            }
        }
        Ok(())
    }

    fn extract(&self, subset: usize, rep: &Representation) -> Vec<Letter> {
        self.subsets[subset].iter().map(|&p| rep[p]).collect()
    }
}

/// Sparse histogram table plus the untouched unlabeled representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressedData {
    pub scheme: CompressionScheme,
    pub q: u16,
    /// `(subset index, tuple, label) -> count`, absent means zero.
    pub counts: BTreeMap<(usize, Vec<Letter>, LabelId), u64>,
    /// Total labeled rows per label.
    pub label_totals: BTreeMap<LabelId, u64>,
    pub unlabeled: Vec<Representation>,
}

impl CompressedData {
    pub fn count(&self, subset: usize, tuple: &[Letter], label: LabelId) -> u64 {
        self.counts.get(&(subset, tuple.to_vec(), label)).copied().unwrap_or(0)
    }

    /// Expand the histogram of a full-range subset back into the labeled
    /// multiset. Only meaningful for [`CompressionScheme::full`].
    pub fn expand_full(&self) -> Vec<(Representation, LabelId)> {
        let mut out = Vec::new();
        for (&(subset, ref tuple, label), &n) in &self.counts {
            if subset == 0 {
                for _ in 0..n {
                    out.push((Representation::new(tuple.clone()), label));
                }
            }
        }
        out
    }
}

/// Count labeled tuples per subset and pass unlabeled rows through.
pub fn compress(data: &Dataset, scheme: &CompressionScheme) -> Result<CompressedData, CompressError> {
    scheme.validate(data.header.k)?;
    let mut counts: BTreeMap<(usize, Vec<Letter>, LabelId), u64> = BTreeMap::new();
    let mut label_totals: BTreeMap<LabelId, u64> = BTreeMap::new();
    for (_, rep, label) in &data.labeled {
        *label_totals.entry(*label).or_insert(0) += 1;
        for subset in 0..scheme.subsets.len() {
            let tuple = scheme.extract(subset, rep);
            *counts.entry((subset, tuple, *label)).or_insert(0) += 1;
        }
    }
    Ok(CompressedData {
        scheme: scheme.clone(),
        q: data.header.q,
        counts,
        label_totals,
        unlabeled: data.unlabeled.iter().map(|(_, r)| r.clone()).collect(),
    })
}

/// Dump the histogram table: `subset_index,tuple,label,count` with the
/// tuple written as its base-q digits.
pub fn write_histogram_csv(path: &Path, compressed: &CompressedData) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["subset_index", "tuple", "label", "count"])?;
    for (&(subset, ref tuple, label), &count) in &compressed.counts {
        let digits: Vec<String> = tuple.iter().map(|l| l.to_string()).collect();
        w.write_record([
            subset.to_string(),
            digits.join("-"),
            label.to_string(),
            count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
