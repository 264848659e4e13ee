//! Local and shallow reference classifiers.
//!
//! These are deliberately simple: the point of the harness is to measure
//! them against the deep pipeline, not to make them clever. Local
//! classifiers see one unlabeled representation plus the labeled rows;
//! shallow classifiers see only compressed histograms plus the raw
//! unlabeled rows.

use serde::{Deserialize, Serialize};

use crate::compress::CompressedData;
use crate::label::LabelId;
use crate::model::Representation;
use crate::reconstruct::distance::hamming;

/// Which baseline the harness runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Label of the Hamming-nearest labeled representation.
    LocalNn,
    /// Per-leaf likelihood under an independent-letter channel of a
    /// configured path depth.
    LocalMl,
    /// Naive Bayes over the per-column histograms.
    ShallowNb,
    /// Naive Bayes over disjoint position windows of the given width.
    ShallowS(usize),
    /// Constant most-frequent label.
    Trivial,
}

impl BaselineKind {
    pub fn as_str(&self) -> String {
        match self {
            BaselineKind::LocalNn => "local_nn".into(),
            BaselineKind::LocalMl => "local_ml".into(),
            BaselineKind::ShallowNb => "shallow_nb".into(),
            BaselineKind::ShallowS(s) => format!("shallow_s{s}"),
            BaselineKind::Trivial => "trivial".into(),
        }
    }
}

/// Local classifier flavor. The likelihood variant scores each label by the
/// summed log-likelihood of the unlabeled representation having evolved
/// from each labeled row through a symmetric channel of `depth` edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalKind {
    NearestNeighbor,
    MaxLikelihood { lambda: f64, depth: u32 },
}

/// Classify one representation from the labeled rows alone.
/// Ties break to the smallest label; an empty labeled set yields `None`.
pub fn local_classify(
    rep: &Representation,
    labeled: &[(Representation, LabelId)],
    kind: LocalKind,
    q: u16,
) -> Option<LabelId> {
    if labeled.is_empty() {
        return None;
    }
    match kind {
        LocalKind::NearestNeighbor => {
            let mut best: Option<(usize, LabelId)> = None;
            for (cand, label) in labeled {
                let d = hamming(rep.letters(), cand.letters());
                let key = (d, *label);
                if best.map_or(true, |b| key < b) {
                    best = Some(key);
                }
            }
            best.map(|(_, l)| l)
        }
        LocalKind::MaxLikelihood { lambda, depth } => {
            let k = rep.len() as f64;
            let path = lambda.powi(depth as i32);
            let p_same = path + (1.0 - path) / q as f64;
            let p_diff = (1.0 - path) / q as f64;
            let (ln_same, ln_diff) = (p_same.ln(), p_diff.ln());
            let mut scores: std::collections::BTreeMap<LabelId, f64> = std::collections::BTreeMap::new();
            for (cand, label) in labeled {
                let d = hamming(rep.letters(), cand.letters()) as f64;
                let ll = (k - d) * ln_same + d * ln_diff;
                *scores.entry(*label).or_insert(0.0) += ll;
            }
            // BTreeMap order makes the smallest label win exact ties.
            let mut best: Option<(LabelId, f64)> = None;
            for (&label, &s) in &scores {
                if best.map_or(true, |(_, bs)| s > bs) {
                    best = Some((label, s));
                }
            }
            best.map(|(l, _)| l)
        }
    }
}

/// Add-one-smoothed naive Bayes over the compressed histograms; one label
/// per unlabeled representation, in input order.
pub fn shallow_classify(compressed: &CompressedData, alpha: f64) -> Vec<Option<LabelId>> {
    let labels: Vec<LabelId> = compressed.label_totals.keys().copied().collect();
    compressed
        .unlabeled
        .iter()
        .map(|rep| {
            if labels.is_empty() {
                return None;
            }
            let mut best: Option<(LabelId, f64)> = None;
            for &label in &labels {
                let total = compressed.label_totals[&label] as f64;
                let mut score = 0.0;
                for (i, subset) in compressed.scheme.subsets().iter().enumerate() {
                    let tuple: Vec<u8> = subset.iter().map(|&p| rep[p]).collect();
                    let n = compressed.count(i, &tuple, label) as f64;
                    let cells = (compressed.q as f64).powi(subset.len() as i32);
                    score += ((n + alpha) / (total + alpha * cells)).ln();
                }
                if best.map_or(true, |(_, bs)| score > bs) {
                    best = Some((label, score));
                }
            }
            best.map(|(l, _)| l)
        })
        .collect()
}

/// The most frequent label among the labeled rows; ties break to the
/// smallest id, an empty labeled set yields `None`.
pub fn trivial_classify(compressed: &CompressedData) -> Option<LabelId> {
    compressed
        .label_totals
        .iter()
        .max_by_key(|(label, count)| (**count, std::cmp::Reverse(**label)))
        .map(|(l, _)| *l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compress::{compress, CompressionScheme};
    use crate::data::{DataHeader, Dataset};
    use crate::model::ModelVariant;
    use crate::tree::NodeRef;

    fn rep(letters: &[u8]) -> Representation {
        Representation::new(letters.to_vec())
    }

    fn dataset(labeled: Vec<(Representation, LabelId)>, unlabeled: Vec<Representation>) -> Dataset {
        let header = DataHeader { d: 2, h: 2, q: 4, k: labeled[0].0.len(), model: ModelVariant::Iidm };
        let n = labeled.len() + unlabeled.len();
        assert!(n <= 4, "test helper uses the d=2, h=2 leaf level");
        Dataset {
            header,
            labeled: labeled
                .into_iter()
                .enumerate()
                .map(|(i, (r, l))| (NodeRef::new(2, i as u64), r, l))
                .collect(),
            unlabeled: unlabeled
                .into_iter()
                .enumerate()
                .map(|(i, r)| (NodeRef::new(2, 3 - i as u64), r))
                .collect(),
        }
    }

    #[test]
    fn nn_exact_match_wins() {
        let labeled = vec![(rep(&[0, 1, 2]), 4), (rep(&[3, 3, 3]), 2)];
        assert_eq!(local_classify(&rep(&[0, 1, 2]), &labeled, LocalKind::NearestNeighbor, 4), Some(4));
        let ml = LocalKind::MaxLikelihood { lambda: 0.95, depth: 2 };
        assert_eq!(local_classify(&rep(&[0, 1, 2]), &labeled, ml, 4), Some(4));
    }

    #[test]
    fn equidistant_ties_take_smallest_label() {
        let labeled = vec![(rep(&[0, 0]), 9), (rep(&[1, 1]), 3)];
        assert_eq!(local_classify(&rep(&[0, 1]), &labeled, LocalKind::NearestNeighbor, 4), Some(3));
    }

    #[test]
    fn locality_ignores_other_unlabeled_rows() {
        let labeled = vec![(rep(&[0, 0]), 1), (rep(&[3, 3]), 2)];
        let a = local_classify(&rep(&[0, 1]), &labeled, LocalKind::NearestNeighbor, 4);
        // Nothing else enters the signature; the contract is structural.
        let b = local_classify(&rep(&[0, 1]), &labeled, LocalKind::NearestNeighbor, 4);
        assert_eq!(a, b);
    }

    #[test]
    fn shallow_prefers_matching_histogram() {
        let labeled = vec![
            (rep(&[1, 2]), 0),
            (rep(&[1, 2]), 0),
            (rep(&[0, 0]), 1),
            (rep(&[0, 0]), 1),
        ];
        let data = dataset(labeled, vec![]);
        let mut c = compress(&data, &CompressionScheme::canonical(2)).unwrap();
        c.unlabeled = vec![rep(&[1, 2])];
        assert_eq!(shallow_classify(&c, 1.0), vec![Some(0)]);
        c.unlabeled = vec![rep(&[0, 0])];
        assert_eq!(shallow_classify(&c, 1.0), vec![Some(1)]);
    }

    #[test]
    fn shallow_identical_histograms_degenerate_to_smallest() {
        let labeled = vec![(rep(&[1, 2]), 5), (rep(&[1, 2]), 2)];
        let data = dataset(labeled, vec![rep(&[3, 3]), rep(&[1, 2])]);
        let c = compress(&data, &CompressionScheme::canonical(2)).unwrap();
        assert_eq!(shallow_classify(&c, 1.0), vec![Some(2), Some(2)]);
    }

    #[test]
    fn shallow_is_invariant_under_labeled_row_order() {
        let labeled = vec![(rep(&[1, 2]), 1), (rep(&[2, 0]), 0), (rep(&[1, 0]), 0)];
        let mut data = dataset(labeled, vec![rep(&[1, 1])]);
        let a = shallow_classify(&compress(&data, &CompressionScheme::canonical(2)).unwrap(), 1.0);
        data.labeled.reverse();
        let b = shallow_classify(&compress(&data, &CompressionScheme::canonical(2)).unwrap(), 1.0);
        assert_eq!(a, b);
    }

    #[test]
    fn trivial_counts() {
        let labeled = vec![(rep(&[0, 0]), 7), (rep(&[0, 1]), 7), (rep(&[1, 1]), 3)];
        let data = dataset(labeled, vec![rep(&[2, 2])]);
        let c = compress(&data, &CompressionScheme::canonical(2)).unwrap();
        assert_eq!(trivial_classify(&c), Some(7));
        // Tie: smallest label.
        let labeled = vec![(rep(&[0, 0]), 7), (rep(&[1, 1]), 3)];
        let data = dataset(labeled, vec![rep(&[2, 2]), rep(&[2, 0])]);
        let c = compress(&data, &CompressionScheme::canonical(2)).unwrap();
        assert_eq!(trivial_classify(&c), Some(3));
        // Empty labeled set: sentinel.
        let header = DataHeader { d: 2, h: 1, q: 4, k: 2, model: ModelVariant::Iidm };
        let data = Dataset {
            header,
            labeled: vec![],
            unlabeled: vec![(NodeRef::new(1, 0), rep(&[0, 0])), (NodeRef::new(1, 1), rep(&[1, 1]))],
        };
        let c = compress(&data, &CompressionScheme::canonical(2)).unwrap();
        assert_eq!(trivial_classify(&c), None);
    }
}
