//! Generation: broadcast a root representation down the tree under the
//! three models, draw the semi-supervised instance, and package datasets.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataHeader, Dataset};
use crate::label::{LabelAssignment, LabelId};
use crate::model::{Letter, ModelError, ModelParams, ModelVariant, PairPerm, Perm, Regime, Representation};
use crate::par::{map_indexed, Parallelism};
use crate::rng::{stream, StreamTag};
use crate::tree::{NodeRef, TreeTopology};

#[derive(Debug, Error)]
pub enum SampleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("operation requires the {want:?} variant, got {got:?}")]
    WrongVariant { got: ModelVariant, want: ModelVariant },
    #[error("instance levels must satisfy 0 < h0 < h1 < h, got h0={h0}, h1={h1}, h={h}")]
    BadInstanceLevels { h0: u32, h1: u32, h: u32 },
    #[error("leaf {0} is in the labeled sample set but carries no label")]
    UnlabeledSampleLeaf(NodeRef),
}

/// One symmetric-channel step driven by a single unit-interval draw:
/// copy the parent letter with probability `lambda`, otherwise emit a
/// uniform letter (which may coincide with the parent).
pub fn channel_step(parent: Letter, lambda: f64, q: u16, u: f64) -> Letter {
    if u < lambda {
        parent
    } else {
        let t = (u - lambda) / (1.0 - lambda);
        ((t * q as f64) as u16).min(q - 1) as Letter
    }
}

fn noisy_copy<R: Rng>(parent: &Representation, lambda: f64, q: u16, rng: &mut R) -> Representation {
    Representation::new(
        parent
            .letters()
            .iter()
            .map(|&p| channel_step(p, lambda, q, rng.gen::<f64>()))
            .collect(),
    )
}

/// Mix a noisy intermediate into the child representation: pair `i` of the
/// output reads the intermediate at the rewired positions and pushes the
/// pair value through the edge bijection.
pub fn fim_mix(rtilde: &Representation, tau: &PairPerm, sigma: &Perm) -> Representation {
    let q = tau.q;
    let k = rtilde.len();
    let mut out = vec![0 as Letter; k];
    for i in 0..k / 2 {
        let a = rtilde[sigma.apply(2 * i as u32) as usize];
        let b = rtilde[sigma.apply(2 * i as u32 + 1) as usize];
        let y = tau.apply(PairPerm::encode(q, a, b));
        let (f, g) = PairPerm::decode(q, y);
        out[2 * i] = f;
        out[2 * i + 1] = g;
    }
    Representation::new(out)
}

/// Invert [`fim_mix`]: recover the noisy intermediate from a child
/// representation. Exact because the pair map is a bijection and the
/// rewiring tiles all positions.
pub fn fim_unmix(child: &Representation, tau: &PairPerm, sigma: &Perm) -> Representation {
    let q = tau.q;
    let k = child.len();
    let inv = tau.inverse();
    let mut out = vec![0 as Letter; k];
    for i in 0..k / 2 {
        let y = PairPerm::encode(q, child[2 * i], child[2 * i + 1]);
        let (a, b) = PairPerm::decode(q, inv.apply(y));
        out[sigma.apply(2 * i as u32) as usize] = a;
        out[sigma.apply(2 * i as u32 + 1) as usize] = b;
    }
    Representation::new(out)
}

/// Edge parameters actually drawn for one generative run, indexed
/// `[level - 1][node index]` by the child node of each edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RealizedEdges {
    Iidm,
    Vrm(Vec<Vec<Perm>>),
    Fim(Vec<Vec<PairPerm>>),
}

/// Everything the generator knew: the full representation map, the realized
/// edge parameters, and (once an instance is drawn) labels and the labeled
/// sample set. Retained for scoring and oracle tests only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub tree: TreeTopology,
    pub params: ModelParams,
    /// `reps[level][index]`.
    pub reps: Vec<Vec<Representation>>,
    pub edges: RealizedEdges,
    pub labels: LabelAssignment,
    pub sample_set: BTreeSet<NodeRef>,
}

impl GroundTruth {
    pub fn rep(&self, node: NodeRef) -> &Representation {
        &self.reps[node.level as usize][node.index as usize]
    }

    /// The realized alphabet permutation on the edge into `child` (VRM).
    pub fn edge_perm(&self, child: NodeRef) -> Option<&Perm> {
        match &self.edges {
            RealizedEdges::Vrm(levels) => {
                Some(&levels[child.level as usize - 1][child.index as usize])
            }
            _ => None,
        }
    }

    /// The realized pair bijection on the edge into `child` (FIM).
    pub fn edge_pair_perm(&self, child: NodeRef) -> Option<&PairPerm> {
        match &self.edges {
            RealizedEdges::Fim(levels) => {
                Some(&levels[child.level as usize - 1][child.index as usize])
            }
            _ => None,
        }
    }
}

/// Root representation choice.
#[derive(Debug, Clone)]
pub enum RootSpec {
    Uniform,
    Fixed(Representation),
}

fn draw_root(params: &ModelParams, spec: &RootSpec) -> Result<Representation, SampleError> {
    match spec {
        RootSpec::Uniform => {
            let mut rng = stream(params.seed, StreamTag::RootRep, 0, 0);
            Ok(Representation::new(
                (0..params.k).map(|_| rng.gen_range(0..params.q) as Letter).collect(),
            ))
        }
        RootSpec::Fixed(rep) => {
            Ok(Representation::checked(rep.letters().to_vec(), params.q, params.k)?)
        }
    }
}

fn edge_ordinal(tree: &TreeTopology, child: NodeRef) -> usize {
    let mut base = 0u64;
    for l in 1..child.level {
        base += tree.level_size(l);
    }
    (base + child.index) as usize
}

fn realize_vrm_edges(tree: &TreeTopology, params: &ModelParams) -> Result<Vec<Vec<Perm>>, SampleError> {
    let q = params.q as usize;
    let mut levels = Vec::with_capacity(tree.height() as usize);
    for level in 1..=tree.height() {
        let n = tree.level_size(level);
        let level_perm = match params.regime {
            Regime::Shared => {
                let mut rng = stream(params.seed, StreamTag::LevelParams, level, 0);
                Some(Perm::random(q, &mut rng))
            }
            _ => None,
        };
        let perms: Vec<Perm> = (0..n)
            .map(|index| match params.regime {
                Regime::Random => {
                    let mut rng = stream(params.seed, StreamTag::EdgeParams, level, index);
                    Perm::random(q, &mut rng)
                }
                Regime::Shared => level_perm.clone().expect("shared perm drawn above"),
                Regime::Adversarial => {
                    let list = params.adversarial_perms.as_ref().expect("validated");
                    list[edge_ordinal(tree, NodeRef::new(level, index))].clone()
                }
            })
            .collect();
        levels.push(perms);
    }
    Ok(levels)
}

fn realize_fim_edges(
    tree: &TreeTopology,
    params: &ModelParams,
) -> Result<Vec<Vec<PairPerm>>, SampleError> {
    let mut levels = Vec::with_capacity(tree.height() as usize);
    for level in 1..=tree.height() {
        let n = tree.level_size(level);
        let level_perm = match params.regime {
            Regime::Shared => {
                let mut rng = stream(params.seed, StreamTag::LevelParams, level, 0);
                Some(PairPerm::random(params.q, &mut rng))
            }
            _ => None,
        };
        let perms: Vec<PairPerm> = (0..n)
            .map(|index| match params.regime {
                Regime::Random => {
                    let mut rng = stream(params.seed, StreamTag::EdgeParams, level, index);
                    PairPerm::random(params.q, &mut rng)
                }
                Regime::Shared => level_perm.clone().expect("shared perm drawn above"),
                Regime::Adversarial => {
                    let list = params.adversarial_pair_perms.as_ref().expect("validated");
                    list[edge_ordinal(tree, NodeRef::new(level, index))].clone()
                }
            })
            .collect();
        levels.push(perms);
    }
    Ok(levels)
}

fn broadcast<F>(
    tree: &TreeTopology,
    params: &ModelParams,
    root: Representation,
    par: Parallelism,
    edge_map: F,
) -> Vec<Vec<Representation>>
where
    F: Fn(u32, u64, Representation) -> Representation + Sync + Send,
{
    let mut reps: Vec<Vec<Representation>> = Vec::with_capacity(tree.height() as usize + 1);
    reps.push(vec![root]);
    for level in 1..=tree.height() {
        let n = tree.level_size(level) as usize;
        let parents = &reps[level as usize - 1];
        let d = tree.arity();
        let row = map_indexed(par, n, |index| {
            let parent = &parents[index / d as usize];
            let mut rng = stream(params.seed, StreamTag::NodeChannel, level, index as u64);
            let noisy = noisy_copy(parent, params.lambda, params.q, &mut rng);
            edge_map(level, index as u64, noisy)
        });
        reps.push(row);
    }
    reps
}

/// Broadcast with independent per-letter channels on every edge.
pub fn sample_iidm(
    tree: &TreeTopology,
    params: &ModelParams,
    root: RootSpec,
    par: Parallelism,
) -> Result<GroundTruth, SampleError> {
    if params.variant != ModelVariant::Iidm {
        return Err(SampleError::WrongVariant { got: params.variant, want: ModelVariant::Iidm });
    }
    params.validate(tree)?;
    let root = draw_root(params, &root)?;
    let reps = broadcast(tree, params, root, par, |_, _, noisy| noisy);
    Ok(GroundTruth {
        tree: *tree,
        params: params.clone(),
        reps,
        edges: RealizedEdges::Iidm,
        labels: LabelAssignment::new(),
        sample_set: BTreeSet::new(),
    })
}

/// Broadcast where each edge additionally relabels the alphabet: the child
/// letter is `sigma_e(channel(parent letter))`.
pub fn sample_vrm(
    tree: &TreeTopology,
    params: &ModelParams,
    root: RootSpec,
    par: Parallelism,
) -> Result<GroundTruth, SampleError> {
    if params.variant != ModelVariant::Vrm {
        return Err(SampleError::WrongVariant { got: params.variant, want: ModelVariant::Vrm });
    }
    params.validate(tree)?;
    let root = draw_root(params, &root)?;
    let sigmas = realize_vrm_edges(tree, params)?;
    let reps = broadcast(tree, params, root, par, |level, index, noisy| {
        sigmas[level as usize - 1][index as usize].relabel(&noisy)
    });
    Ok(GroundTruth {
        tree: *tree,
        params: params.clone(),
        reps,
        edges: RealizedEdges::Vrm(sigmas),
        labels: LabelAssignment::new(),
        sample_set: BTreeSet::new(),
    })
}

/// Broadcast with interacting letter pairs: noise first, then the known
/// per-level rewiring feeds position pairs through the edge bijection.
pub fn sample_fim(
    tree: &TreeTopology,
    params: &ModelParams,
    root: RootSpec,
    par: Parallelism,
) -> Result<GroundTruth, SampleError> {
    if params.variant != ModelVariant::Fim {
        return Err(SampleError::WrongVariant { got: params.variant, want: ModelVariant::Fim });
    }
    params.validate(tree)?;
    let root = draw_root(params, &root)?;
    let taus = realize_fim_edges(tree, params)?;
    let rewiring = params.rewiring.as_ref().expect("validated: FIM carries rewirings");
    let reps = broadcast(tree, params, root, par, |level, index, noisy| {
        fim_mix(&noisy, &taus[level as usize - 1][index as usize], &rewiring[level as usize - 1])
    });
    Ok(GroundTruth {
        tree: *tree,
        params: params.clone(),
        reps,
        edges: RealizedEdges::Fim(taus),
        labels: LabelAssignment::new(),
        sample_set: BTreeSet::new(),
    })
}

/// Dispatch on the parameter variant.
pub fn sample_model(
    tree: &TreeTopology,
    params: &ModelParams,
    root: RootSpec,
    par: Parallelism,
) -> Result<GroundTruth, SampleError> {
    match params.variant {
        ModelVariant::Iidm => sample_iidm(tree, params, root, par),
        ModelVariant::Vrm => sample_vrm(tree, params, root, par),
        ModelVariant::Fim => sample_fim(tree, params, root, par),
    }
}

/// Levels defining the instance distribution: labels live at `h0`, the two
/// labeled subtrees per label are rooted at `h1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub h0: u32,
    pub h1: u32,
}

impl InstanceSpec {
    pub fn validate(&self, tree: &TreeTopology) -> Result<(), SampleError> {
        if self.h0 == 0 || self.h0 >= self.h1 || self.h1 >= tree.height() {
            return Err(SampleError::BadInstanceLevels {
                h0: self.h0,
                h1: self.h1,
                h: tree.height(),
            });
        }
        Ok(())
    }
}

/// Draw the labeled instance: distinct labels in random order across level
/// `h0`, and for each labeled node two level-`h1` descendants in different
/// child subtrees; the labeled set is every leaf under those descendants.
pub fn generate_instance(
    tree: &TreeTopology,
    spec: InstanceSpec,
    seed: u64,
) -> Result<(LabelAssignment, BTreeSet<NodeRef>), SampleError> {
    spec.validate(tree)?;
    let m = tree.level_size(spec.h0);
    let mut label_order: Vec<LabelId> = (0..m as LabelId).collect();
    let mut rng = stream(seed, StreamTag::InstanceLabels, 0, 0);
    for i in (1..label_order.len()).rev() {
        let j = rng.gen_range(0..=i);
        label_order.swap(i, j);
    }

    let mut anchors: BTreeMap<LabelId, NodeRef> = BTreeMap::new();
    let mut sample_set = BTreeSet::new();
    let span = tree.level_size(spec.h1 - spec.h0);
    // Positions inside one child subtree of a labeled node.
    let per_child = tree.level_size(spec.h1 - spec.h0 - 1);
    for index in 0..m {
        let v1 = NodeRef::new(spec.h0, index);
        anchors.insert(label_order[index as usize], v1);
        let mut rng = stream(seed, StreamTag::InstanceDescendants, spec.h0, index);
        let (a, b) = loop {
            let a = rng.gen_range(0..span);
            let b = rng.gen_range(0..span);
            // The lowest common ancestor is exactly v1 iff the two picks
            // fall under different children of v1.
            if a / per_child != b / per_child {
                break (a, b);
            }
        };
        for pick in [a, b] {
            let v2 = NodeRef::new(spec.h1, index * span + pick);
            sample_set.extend(tree.subtree_leaves(v2));
        }
    }
    Ok((LabelAssignment::from_anchors(tree, &anchors), sample_set))
}

/// Attach an instance to a sampled ground truth.
pub fn with_instance(
    mut gt: GroundTruth,
    labels: LabelAssignment,
    sample_set: BTreeSet<NodeRef>,
) -> GroundTruth {
    gt.labels = labels;
    gt.sample_set = sample_set;
    gt
}

/// Project the ground truth onto what inference is allowed to see.
pub fn make_dataset(gt: &GroundTruth) -> Result<Dataset, SampleError> {
    let tree = &gt.tree;
    let header = DataHeader {
        d: tree.arity(),
        h: tree.height(),
        q: gt.params.q,
        k: gt.params.k,
        model: gt.params.variant,
    };
    let mut labeled = Vec::new();
    let mut unlabeled = Vec::new();
    for leaf in tree.leaves() {
        let rep = gt.rep(leaf).clone();
        if gt.sample_set.contains(&leaf) {
            let label = gt
                .labels
                .most_specific(leaf)
                .ok_or(SampleError::UnlabeledSampleLeaf(leaf))?;
            labeled.push((leaf, rep, label));
        } else {
            unlabeled.push((leaf, rep));
        }
    }
    Ok(Dataset { header, labeled, unlabeled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::validate_labeling;
    use crate::model::random_rewiring;
    use crate::tree::build_tree;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(variant: ModelVariant, q: u16, k: usize, lambda: f64, seed: u64) -> ModelParams {
        ModelParams::new(variant, q, k, lambda, seed)
    }

    #[test]
    fn channel_step_extremes() {
        for u in [0.0, 0.3, 0.7, 0.999] {
            assert_eq!(channel_step(2, 1.0, 4, u), 2);
        }
        // lambda = 0 partitions the unit interval uniformly.
        assert_eq!(channel_step(2, 0.0, 4, 0.10), 0);
        assert_eq!(channel_step(2, 0.0, 4, 0.30), 1);
        assert_eq!(channel_step(2, 0.0, 4, 0.60), 2);
        assert_eq!(channel_step(2, 0.0, 4, 0.90), 3);
    }

    #[test]
    fn iidm_lambda_one_copies_root() {
        let tree = build_tree(2, 3).unwrap();
        let p = params(ModelVariant::Iidm, 4, 6, 1.0, 9);
        let root = Representation::new(vec![0, 1, 2, 3, 0, 1]);
        let gt =
            sample_iidm(&tree, &p, RootSpec::Fixed(root.clone()), Parallelism::Sequential).unwrap();
        for leaf in tree.leaves() {
            assert_eq!(gt.rep(leaf), &root);
        }
    }

    #[test]
    fn vrm_lambda_one_applies_edge_perms_exactly() {
        let tree = build_tree(2, 2).unwrap();
        let mut p = params(ModelVariant::Vrm, 4, 8, 1.0, 11);
        p.regime = Regime::Random;
        let gt = sample_vrm(&tree, &p, RootSpec::Uniform, Parallelism::Sequential).unwrap();
        for level in 1..=2u32 {
            for index in 0..tree.level_size(level) {
                let child = NodeRef::new(level, index);
                let parent = tree.parent(child).unwrap();
                let sigma = gt.edge_perm(child).unwrap();
                assert_eq!(gt.rep(child), &sigma.relabel(gt.rep(parent)));
            }
        }
    }

    #[test]
    fn vrm_identity_is_bit_identical_to_iidm() {
        let tree = build_tree(3, 3).unwrap();
        let pi = params(ModelVariant::Iidm, 5, 16, 0.7, 42);
        let gi = sample_iidm(&tree, &pi, RootSpec::Uniform, Parallelism::Sequential).unwrap();
        let mut pv = params(ModelVariant::Vrm, 5, 16, 0.7, 42);
        pv.regime = Regime::Adversarial;
        let edges = (tree.total_nodes() - 1) as usize;
        pv.adversarial_perms = Some(vec![Perm::identity(5); edges]);
        let gv = sample_vrm(&tree, &pv, RootSpec::Uniform, Parallelism::Sequential).unwrap();
        assert_eq!(gi.reps, gv.reps);
    }

    #[test]
    fn shared_regime_repeats_perm_within_level() {
        let tree = build_tree(2, 2).unwrap();
        let mut p = params(ModelVariant::Vrm, 4, 4, 0.9, 13);
        p.regime = Regime::Shared;
        let gt = sample_vrm(&tree, &p, RootSpec::Uniform, Parallelism::Sequential).unwrap();
        let a = gt.edge_perm(NodeRef::new(2, 0)).unwrap();
        let b = gt.edge_perm(NodeRef::new(2, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generation_is_worker_count_invariant() {
        let tree = build_tree(3, 4).unwrap();
        let p = params(ModelVariant::Iidm, 4, 32, 0.6, 77);
        let seq = sample_iidm(&tree, &p, RootSpec::Uniform, Parallelism::Sequential).unwrap();
        let par = sample_iidm(&tree, &p, RootSpec::Uniform, Parallelism::Workers(3)).unwrap();
        assert_eq!(seq.reps, par.reps);
    }

    #[test]
    fn fim_mix_unmix_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tau = PairPerm::random(3, &mut rng);
        let sigma = random_rewiring(8, &mut rng);
        let rtilde = Representation::new(vec![0, 1, 2, 0, 1, 2, 2, 1]);
        let child = fim_mix(&rtilde, &tau, &sigma);
        assert_eq!(fim_unmix(&child, &tau, &sigma), rtilde);
    }

    #[test]
    fn fim_matches_straight_line_recomputation() {
        // Independent recomputation of the two-stage kernel from the
        // documented stream contract: one uniform draw per coordinate in
        // order, then rewiring + pair mixing.
        let tree = build_tree(2, 2).unwrap();
        let mut p = params(ModelVariant::Fim, 2, 4, 0.6, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        p.rewiring = Some(vec![random_rewiring(4, &mut rng), random_rewiring(4, &mut rng)]);
        let gt = sample_fim(&tree, &p, RootSpec::Uniform, Parallelism::Sequential).unwrap();
        for level in 1..=2u32 {
            for index in 0..tree.level_size(level) {
                let child = NodeRef::new(level, index);
                let parent_rep = gt.rep(tree.parent(child).unwrap());
                let mut s = stream(p.seed, StreamTag::NodeChannel, level, index);
                let rtilde = Representation::new(
                    parent_rep
                        .letters()
                        .iter()
                        .map(|&l| channel_step(l, p.lambda, p.q, s.gen::<f64>()))
                        .collect(),
                );
                let tau = gt.edge_pair_perm(child).unwrap();
                let sigma = &p.rewiring.as_ref().unwrap()[level as usize - 1];
                let expect = fim_mix(&rtilde, tau, sigma);
                assert_eq!(gt.rep(child), &expect);
                // And the bijective inverse recovers the intermediate.
                assert_eq!(fim_unmix(gt.rep(child), tau, sigma), rtilde);
            }
        }
    }

    #[test]
    fn instance_counts_and_validity() {
        let tree = build_tree(2, 5).unwrap();
        let spec = InstanceSpec { h0: 1, h1: 3 };
        let (labels, sample) = generate_instance(&tree, spec, 3).unwrap();
        // 2 labels x 2 subtrees x 2^(5-3) leaves.
        assert_eq!(sample.len(), 16);
        assert_eq!(tree.leaf_count(), 32);
        assert_eq!(validate_labeling(&tree, &labels), crate::label::LabelingCheck::Ok);
        assert_eq!(labels.labels().len(), 2);
    }

    #[test]
    fn instance_rejects_degenerate_levels() {
        let tree = build_tree(2, 4).unwrap();
        assert!(generate_instance(&tree, InstanceSpec { h0: 2, h1: 2 }, 1).is_err());
        assert!(generate_instance(&tree, InstanceSpec { h0: 0, h1: 2 }, 1).is_err());
        assert!(generate_instance(&tree, InstanceSpec { h0: 2, h1: 4 }, 1).is_err());
    }

    #[test]
    fn binary_adjacent_levels_pick_both_children() {
        let tree = build_tree(2, 4).unwrap();
        let (_, sample) = generate_instance(&tree, InstanceSpec { h0: 1, h1: 2 }, 5).unwrap();
        // With d = 2 and h1 = h0 + 1 every leaf is labeled.
        assert_eq!(sample.len() as u64, tree.leaf_count());
    }

    #[test]
    fn dataset_partitions_leaves() {
        let tree = build_tree(2, 5).unwrap();
        let p = params(ModelVariant::Iidm, 4, 8, 0.8, 17);
        let gt = sample_iidm(&tree, &p, RootSpec::Uniform, Parallelism::Sequential).unwrap();
        let (labels, sample) = generate_instance(&tree, InstanceSpec { h0: 1, h1: 3 }, 17).unwrap();
        let gt = with_instance(gt, labels, sample);
        let data = make_dataset(&gt).unwrap();
        assert!(data.validate().is_ok());
        assert_eq!(data.labeled.len(), 16);
        assert_eq!(data.unlabeled.len(), 16);
    }

    #[test]
    fn dataset_extremes() {
        let tree = build_tree(2, 2).unwrap();
        let p = params(ModelVariant::Iidm, 2, 3, 0.5, 1);
        let gt = sample_iidm(&tree, &p, RootSpec::Uniform, Parallelism::Sequential).unwrap();
        // No instance: everything unlabeled.
        let data = make_dataset(&gt).unwrap();
        assert!(data.labeled.is_empty());
        assert_eq!(data.unlabeled.len(), 4);
        // Everything labeled.
        let mut anchors = BTreeMap::new();
        anchors.insert(0 as LabelId, NodeRef::ROOT);
        let labels = LabelAssignment::from_anchors(&tree, &anchors);
        let all: BTreeSet<NodeRef> = tree.leaves().collect();
        let gt = with_instance(gt, labels, all);
        let data = make_dataset(&gt).unwrap();
        assert!(data.unlabeled.is_empty());
        assert_eq!(data.labeled.len(), 4);
    }
}
