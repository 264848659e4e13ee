//! The deep reconstruction pipeline: estimate pairwise distances among the
//! current working nodes, group them into local subtrees, reconstruct each
//! group's ancestor, and repeat until the root — then propagate labels
//! through the inferred hierarchy.

pub mod bp;
pub mod cluster;
pub mod distance;
pub mod fim;

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::data::Dataset;
use crate::label::{LabelAssignment, LabelId};
use crate::model::{ModelVariant, Perm, Representation};
use crate::par::{map_indexed, Parallelism};
use crate::tree::{NodeRef, TreeTopology};

use cluster::{local_structure, pair_indices, Cluster, PairDistances, StructureError};
use distance::{
    estimate_distance_stepped, normalized_hamming, relative_hamming, relative_hamming_symbols,
    DistanceError, DistanceLabel,
};
use fim::{pair_symbols, recover_group, FimConfig, FimError};

/// A rooted hierarchy over leaf slots. During reconstruction the slots are
/// dataset row ordinals; inside one cluster they index the member list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Shape {
    Leaf(usize),
    Internal(Vec<Shape>),
}

impl Shape {
    pub fn leaf_count(&self) -> usize {
        match self {
            Shape::Leaf(_) => 1,
            Shape::Internal(children) => children.iter().map(Shape::leaf_count).sum(),
        }
    }

    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            Shape::Leaf(slot) => out.push(*slot),
            Shape::Internal(children) => {
                for c in children {
                    c.collect_leaves(out);
                }
            }
        }
    }

    /// Replace every leaf slot by a subtree.
    fn substitute(self, subs: &mut [Option<Shape>]) -> Shape {
        match self {
            Shape::Leaf(slot) => subs[slot].take().expect("each slot substitutes once"),
            Shape::Internal(children) => {
                Shape::Internal(children.into_iter().map(|c| c.substitute(subs)).collect())
            }
        }
    }

    /// Complete d-ary window shape with `d^levels` leaf slots in order.
    pub fn regular(d: usize, levels: u32) -> Shape {
        fn build(d: usize, levels: u32, base: usize, span: usize) -> Shape {
            if levels == 0 {
                Shape::Leaf(base)
            } else {
                let child_span = span / d;
                Shape::Internal(
                    (0..d).map(|c| build(d, levels - 1, base + c * child_span, child_span)).collect(),
                )
            }
        }
        build(d, levels, 0, d.pow(levels))
    }
}

#[derive(Debug, Error)]
pub enum ReconstructError {
    #[error("distance inversion needs a channel strictly inside (0, 1); lambda = {0} carries no usable signal")]
    UnsupportedLambda(f64),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("dataset leaf count {got} does not fill a complete {d}-ary tree of height {h}")]
    BadLeafCover { got: usize, d: u64, h: u32 },
    #[error("distance estimation failed at level {level}: {source}")]
    Distance {
        level: u32,
        #[source]
        source: DistanceError,
    },
    #[error("local structure failed at level {level}: {source}")]
    Structure {
        level: u32,
        #[source]
        source: StructureError,
    },
    #[error("pair recovery failed at level {level}: {source}")]
    Fim {
        level: u32,
        #[source]
        source: FimError,
    },
    #[error("reconstruction quality collapsed to {quality} at level {level}")]
    QualityCollapse { level: u32, quality: f64 },
}

/// Tuning for [`reconstruct_tree`].
#[derive(Debug, Clone)]
pub struct ReconstructParams {
    pub lambda: f64,
    /// Window height per iteration (letter models; the pair-interaction
    /// model recurses one level at a time).
    pub r: u32,
    /// Position rewirings per level, required for FIM data.
    pub rewiring: Option<Vec<Perm>>,
    /// Samples per quality calibration run.
    pub calibration_samples: u32,
    /// Seed for the calibration simulations (part of the configuration;
    /// fixed by default so results are reproducible).
    pub calibration_seed: u64,
    pub fim: FimConfig,
    pub par: Parallelism,
}

impl ReconstructParams {
    pub fn new(lambda: f64, r: u32) -> Self {
        ReconstructParams {
            lambda,
            r,
            rewiring: None,
            calibration_samples: 8000,
            calibration_seed: 0x5eed_ca11b,
            fim: FimConfig::default(),
            par: Parallelism::default(),
        }
    }
}

/// Per-run diagnostics: the calibrated quality at each reconstructed level
/// and the worst decision margin seen in each distance round.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub r: u32,
    /// `(level, quality)` from the leaves down to the last window.
    pub quality_trace: Vec<(u32, f64)>,
    /// `(level, minimum margin)` per distance-estimation round.
    pub level_margins: Vec<(u32, f64)>,
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    /// Inferred hierarchy over dataset row ordinals.
    pub tree: Shape,
    /// Row ordinal to generating leaf address (scoring only).
    pub leaf_nodes: Vec<NodeRef>,
    /// Inferred label per row ordinal, after propagation.
    pub labels: Vec<Option<LabelId>>,
    pub diagnostics: Diagnostics,
}

enum Metric {
    Plain,
    Relabel,
    PairProduct,
}

struct LevelState {
    reps: Vec<Representation>,
    shapes: Vec<Option<Shape>>,
    quality: f64,
    level: u32,
}

/// Raw disagreement for every pair at the current level, in
/// [`pair_indices`] order.
fn pairwise_raw(
    reps: &[Representation],
    syms: Option<&[Vec<u16>]>,
    metric: &Metric,
    q: u16,
    par: Parallelism,
) -> Vec<f64> {
    let n = reps.len();
    let pairs = pair_indices(n);
    map_indexed(par, pairs.len(), |p| {
        let (i, j) = pairs[p];
        match metric {
            Metric::Plain => normalized_hamming(&reps[i], &reps[j]).expect("equal lengths"),
            Metric::Relabel => relative_hamming(&reps[i], &reps[j], q).expect("equal lengths").0,
            Metric::PairProduct => {
                let syms = syms.expect("pair metric carries symbols");
                let nq = q as usize * q as usize;
                relative_hamming_symbols(&syms[i], &syms[j], nq).expect("equal lengths").0
            }
        }
    })
}

/// Convert a pair-symbol disagreement into its per-letter equivalent: the
/// pair survives exactly when both letters do, so the letter-level match
/// rate is the square root of the symbol-level one.
fn pair_raw_to_letter(raw: f64, q: u16) -> f64 {
    let ceiling = (q as f64 - 1.0) / q as f64;
    (1.0 - (1.0 - raw).max(0.0).sqrt()).clamp(0.0, ceiling)
}

fn estimate_level(
    raws: &[f64],
    metric: &Metric,
    lambda: f64,
    quality: f64,
    q: u16,
    r_eff: u32,
    n: usize,
    level: u32,
) -> Result<(PairDistances, f64), ReconstructError> {
    let mut entries = Vec::with_capacity(raws.len());
    let mut min_margin = f64::INFINITY;
    for &raw in raws {
        let raw = match metric {
            Metric::PairProduct => pair_raw_to_letter(raw, q),
            _ => raw,
        };
        let est = estimate_distance_stepped(raw, lambda, quality, quality, q, r_eff, 2)
            .map_err(|source| ReconstructError::Distance { level, source })?;
        min_margin = min_margin.min(est.margin);
        entries.push(match est.label {
            DistanceLabel::Within(d) => Some(d),
            DistanceLabel::Far => None,
        });
    }
    Ok((PairDistances::from_flat(n, entries), min_margin))
}

fn merge_clusters(clusters: &[Cluster], shapes: &mut [Option<Shape>]) -> Vec<Option<Shape>> {
    clusters
        .iter()
        .map(|cluster| {
            let shape = cluster.shape.clone();
            // Rewrite member slots into absolute indices, then substitute.
            fn absolutize(s: Shape, members: &[usize]) -> Shape {
                match s {
                    Shape::Leaf(slot) => Shape::Leaf(members[slot]),
                    Shape::Internal(ch) => {
                        Shape::Internal(ch.into_iter().map(|c| absolutize(c, members)).collect())
                    }
                }
            }
            Some(absolutize(shape, &cluster.members).substitute(shapes))
        })
        .collect()
}

/// Recover the tree and labels from leaf rows alone.
///
/// The working set starts as the dataset rows in file order; each iteration
/// estimates pairwise distances (relabel-minimized for the relabeled
/// models), groups a window of levels, reconstructs window ancestors, and
/// recalibrates the representation quality. Any stage's failure aborts with
/// a structured reason.
pub fn reconstruct_tree(
    data: &Dataset,
    params: &ReconstructParams,
) -> Result<ReconstructionResult, ReconstructError> {
    let header = data.header;
    if !(params.lambda > 0.0 && params.lambda < 1.0) {
        return Err(ReconstructError::UnsupportedLambda(params.lambda));
    }
    let tree = TreeTopology::new(header.d, header.h)
        .map_err(|e| ReconstructError::Unsupported(e.to_string()))?;
    let rows = data.rows_in_order();
    if rows.len() as u64 != tree.leaf_count() {
        return Err(ReconstructError::BadLeafCover { got: rows.len(), d: header.d, h: header.h });
    }
    let leaf_nodes: Vec<NodeRef> = rows.iter().map(|(n, _, _)| *n).collect();
    let labeled: Vec<(usize, LabelId)> = rows
        .iter()
        .enumerate()
        .filter_map(|(ord, (_, _, l))| l.map(|l| (ord, l)))
        .collect();
    let reps: Vec<Representation> = rows.iter().map(|(_, r, _)| (*r).clone()).collect();
    drop(rows);

    let metric = match header.model {
        ModelVariant::Iidm => Metric::Plain,
        ModelVariant::Vrm => Metric::Relabel,
        ModelVariant::Fim => Metric::PairProduct,
    };
    if matches!(metric, Metric::PairProduct) {
        if header.d < 3 {
            return Err(ReconstructError::Unsupported(format!(
                "pair recovery needs arity of at least 3, got d={}",
                header.d
            )));
        }
        let rew = params.rewiring.as_ref().map(|r| r.len()).unwrap_or(0);
        if rew != header.h as usize {
            return Err(ReconstructError::Unsupported(format!(
                "pair-interaction data needs {} per-level rewirings, got {rew}",
                header.h
            )));
        }
    }

    let state = LevelState {
        reps,
        shapes: (0..leaf_nodes.len()).map(|i| Some(Shape::Leaf(i))).collect(),
        quality: 1.0,
        level: header.h,
    };
    let mut diagnostics =
        Diagnostics { r: params.r, quality_trace: vec![(header.h, 1.0)], level_margins: vec![] };

    let root_shape = match metric {
        Metric::PairProduct => run_fim(state, data, params, &mut diagnostics)?,
        _ => run_letterwise(state, data, params, &metric, &mut diagnostics)?,
    };

    let labels = propagate_labels(&root_shape, &labeled, leaf_nodes.len());
    Ok(ReconstructionResult { tree: root_shape, leaf_nodes, labels, diagnostics })
}

fn run_letterwise(
    mut state: LevelState,
    data: &Dataset,
    params: &ReconstructParams,
    metric: &Metric,
    diagnostics: &mut Diagnostics,
) -> Result<Shape, ReconstructError> {
    let d = data.header.d as usize;
    let q = data.header.q;
    loop {
        let level = state.level;
        let r_eff = params.r.min(level);
        let n = state.reps.len();
        let raws = pairwise_raw(&state.reps, None, metric, q, params.par);
        let (dists, margin) =
            estimate_level(&raws, metric, params.lambda, state.quality, q, r_eff, n, level)?;
        diagnostics.level_margins.push((level, margin));
        let clusters = local_structure(&dists, n, d, r_eff)
            .map_err(|source| ReconstructError::Structure { level, source })?;
        let merged = merge_clusters(&clusters, &mut state.shapes);
        if level == r_eff {
            debug_assert_eq!(merged.len(), 1);
            return Ok(merged.into_iter().next().unwrap().unwrap());
        }

        // Window ancestors: align members (relabeled model) and run exact
        // per-coordinate reconstruction over the window shape.
        let lambda2 = state.quality;
        let align = matches!(metric, Metric::Relabel);
        let reps_ref = &state.reps;
        let new_reps: Vec<Representation> =
            map_indexed(params.par, clusters.len(), |c| {
                let cluster = &clusters[c];
                let members: Vec<&Representation> =
                    cluster.members.iter().map(|&m| &reps_ref[m]).collect();
                let tie = bp::TieBreak::Seeded(
                    params.calibration_seed
                        ^ (u64::from(level) << 40)
                        ^ cluster.members[0] as u64,
                );
                if align {
                    let mut aligned: Vec<Representation> = Vec::with_capacity(members.len());
                    aligned.push(members[0].clone());
                    for m in &members[1..] {
                        let (_, sigma) =
                            relative_hamming(m, members[0], q).expect("equal lengths");
                        aligned.push(sigma.relabel(m));
                    }
                    let refs: Vec<&Representation> = aligned.iter().collect();
                    bp::ancestral_bp_tied(&cluster.shape, &refs, lambda2, params.lambda, q, tie)
                } else {
                    bp::ancestral_bp_tied(&cluster.shape, &members, lambda2, params.lambda, q, tie)
                }
            });

        let quality = bp::calibrate_quality(
            &Shape::regular(d, r_eff),
            params.lambda,
            state.quality,
            q,
            params.calibration_samples,
            params.calibration_seed ^ u64::from(level),
        );
        let next_level = level - r_eff;
        if quality <= 0.0 {
            return Err(ReconstructError::QualityCollapse { level: next_level, quality });
        }
        diagnostics.quality_trace.push((next_level, quality));
        state = LevelState { reps: new_reps, shapes: merged, quality, level: next_level };
    }
}

fn run_fim(
    mut state: LevelState,
    data: &Dataset,
    params: &ReconstructParams,
    diagnostics: &mut Diagnostics,
) -> Result<Shape, ReconstructError> {
    let d = data.header.d as usize;
    let q = data.header.q;
    let k = data.header.k;
    let rewiring = params.rewiring.as_ref().expect("checked by caller");
    // Every decode relabels the letters of its output position classes by
    // an unrecoverable permutation (a symmetry of the model), so all
    // comparisons above the leaf level run per class pattern. The classes
    // are public: they depend only on the rewirings and the recursion.
    let mut classes: Vec<u16> = vec![0; k];
    loop {
        let level = state.level;
        let n = state.reps.len();
        let syms: Vec<Vec<u16>> = state.reps.iter().map(|r| pair_symbols(r, q)).collect();
        let (pattern_of_pair, n_patterns) = pair_patterns(&classes);

        // Pairwise distances: pair-symbol disagreement minimized over a
        // relabeling per class pattern.
        let nq = q as usize * q as usize;
        let pairs = pair_indices(n);
        let syms_ref = &syms;
        let pattern_ref = &pattern_of_pair;
        let raws: Vec<f64> = map_indexed(params.par, pairs.len(), |pi| {
            let (i, j) = pairs[pi];
            pattern_sym_disagreement(&syms_ref[i], &syms_ref[j], pattern_ref, n_patterns, nq)
        });
        if std::env::var_os("HTL_DEBUG_FIM").is_some() {
            let mut sorted = raws.clone();
            sorted.sort_by(f64::total_cmp);
            let below = sorted.iter().filter(|&&r| r < 0.5).count();
            eprintln!(
                "level {level}: n={n} patterns={n_patterns} quality={:.4} raws min={:.4} p50={:.4} max={:.4} below0.5={below} (expect {} sibling pairs) low-tail={:?}",
                state.quality,
                sorted[0],
                sorted[sorted.len() / 2],
                sorted[sorted.len() - 1],
                n / d * (d * (d - 1) / 2),
                &sorted[..(n / d * (d * (d - 1) / 2) + 3).min(sorted.len())]
            );
        }
        let (dists, margin) = estimate_level(
            &raws,
            &Metric::PairProduct,
            params.lambda,
            state.quality,
            q,
            1,
            n,
            level,
        )?;
        diagnostics.level_margins.push((level, margin));
        let clusters = local_structure(&dists, n, d, 1)
            .map_err(|source| ReconstructError::Structure { level, source })?;
        let merged = merge_clusters(&clusters, &mut state.shapes);

        // Pair indices and written parent positions per pattern.
        let sigma = &rewiring[level as usize - 1];
        let by_pattern: Vec<Vec<usize>> = {
            let mut v = vec![Vec::new(); n_patterns];
            for (j, &p) in pattern_of_pair.iter().enumerate() {
                v[p as usize].push(j);
            }
            v
        };

        // Per sibling group, per pattern: recover the members' pair
        // structure and reconstruct the parent letters under both flips.
        let lambda2 = state.quality;
        let by_pattern_ref = &by_pattern;
        let candidates: Vec<Result<GroupCandidates, FimError>> =
            map_indexed(params.par, clusters.len(), |c| {
                let cluster = &clusters[c];
                let tie_base = params.calibration_seed
                    ^ (u64::from(level) << 40)
                    ^ ((cluster.members[0] as u64) << 16);
                let mut per_pattern = Vec::with_capacity(n_patterns);
                for (pid, pair_ids) in by_pattern_ref.iter().enumerate() {
                    let member_syms: Vec<Vec<u16>> = cluster
                        .members
                        .iter()
                        .map(|&m| pair_ids.iter().map(|&j| syms_ref[m][j]).collect())
                        .collect();
                    let views: Vec<&[u16]> = member_syms.iter().map(|v| v.as_slice()).collect();
                    let recoveries = recover_group(&views, q, &params.fim)?;
                    // Parent letters for this pattern's positions, per flip:
                    // decode each member, then combine per position.
                    let tie = bp::TieBreak::Seeded(tie_base ^ pid as u64);
                    let star = Shape::Internal((0..cluster.members.len()).map(Shape::Leaf).collect());
                    let mut variants: [Vec<crate::model::Letter>; 2] = [Vec::new(), Vec::new()];
                    for (slot, flip) in [false, true].into_iter().enumerate() {
                        let decoded: Vec<Representation> = member_syms
                            .iter()
                            .zip(&recoveries)
                            .map(|(ms, rec)| {
                                Representation::new(
                                    ms.iter()
                                        .flat_map(|&v| {
                                            let (a, b) = rec.decode(v, flip);
                                            [a, b]
                                        })
                                        .collect(),
                                )
                            })
                            .collect();
                        let refs: Vec<&Representation> = decoded.iter().collect();
                        let combined =
                            bp::ancestral_bp_tied(&star, &refs, lambda2, params.lambda, q, tie);
                        variants[slot] = combined.letters().to_vec();
                    }
                    per_pattern.push(PatternCandidate {
                        pair_ids: pair_ids.clone(),
                        letters: variants,
                    });
                }
                Ok(GroupCandidates { per_pattern })
            });
        let candidates: Vec<GroupCandidates> = candidates
            .into_iter()
            .collect::<Result<_, _>>()
            .map_err(|source| ReconstructError::Fim { level, source })?;

        let next_level = level - 1;
        let quality = bp::calibrate_quality(
            &Shape::regular(d, 1),
            params.lambda,
            state.quality,
            q,
            params.calibration_samples,
            params.calibration_seed ^ u64::from(level),
        );
        if quality <= 0.0 {
            return Err(ReconstructError::QualityCollapse { level: next_level, quality });
        }

        // Flip orientation is only defined relative to other groups: the
        // transpose of every grid is an equally valid absolute decode. Tie
        // the groups together through reliable (sibling-level) parent
        // distances so each future sibling set shares one orientation; the
        // leftover per-component choice is a model symmetry.
        let flips: Vec<Vec<bool>> = if candidates.len() == 1 {
            vec![vec![false; n_patterns]]
        } else {
            resolve_pattern_flips(&candidates, q, quality, params.lambda, &params.fim)
                .map_err(|source| ReconstructError::Fim { level, source })?
        };

        // Assemble parents: letters of pattern pairs land at the rewired
        // positions of the new level.
        let new_reps: Vec<Representation> = candidates
            .iter()
            .zip(&flips)
            .map(|(group, group_flips)| {
                let mut letters = vec![0 as crate::model::Letter; k];
                for (pc, &flip) in group.per_pattern.iter().zip(group_flips) {
                    let chosen = &pc.letters[flip as usize];
                    for (slot, &j) in pc.pair_ids.iter().enumerate() {
                        letters[sigma.apply(2 * j as u32) as usize] = chosen[2 * slot];
                        letters[sigma.apply(2 * j as u32 + 1) as usize] = chosen[2 * slot + 1];
                    }
                }
                Representation::new(letters)
            })
            .collect();

        if new_reps.len() == 1 {
            let root_children = merged;
            debug_assert_eq!(root_children.len(), 1);
            return Ok(root_children.into_iter().next().unwrap().unwrap());
        }

        // New position classes: one pair of classes per pattern.
        let mut next_classes = vec![0u16; k];
        for (j, &p) in pattern_of_pair.iter().enumerate() {
            next_classes[sigma.apply(2 * j as u32) as usize] = 2 * p;
            next_classes[sigma.apply(2 * j as u32 + 1) as usize] = 2 * p + 1;
        }
        classes = next_classes;

        diagnostics.quality_trace.push((next_level, quality));
        state = LevelState { reps: new_reps, shapes: merged, quality, level: next_level };
    }
}

/// Reconstructed parent letters of one pattern, for both flip choices.
/// `letters[f]` holds the pair letters in pattern order: entry `2s, 2s+1`
/// belong to pattern pair `pair_ids[s]`.
struct PatternCandidate {
    pair_ids: Vec<usize>,
    letters: [Vec<crate::model::Letter>; 2],
}

struct GroupCandidates {
    per_pattern: Vec<PatternCandidate>,
}

/// Pattern id per pair index from the position classes; ids are dense.
fn pair_patterns(classes: &[u16]) -> (Vec<u16>, usize) {
    let mut ids: std::collections::BTreeMap<(u16, u16), u16> = Default::default();
    let mut out = Vec::with_capacity(classes.len() / 2);
    for j in 0..classes.len() / 2 {
        let key = (classes[2 * j], classes[2 * j + 1]);
        let next = ids.len() as u16;
        out.push(*ids.entry(key).or_insert(next));
    }
    (out, ids.len())
}

/// Pair-symbol disagreement minimized over one relabeling per class
/// pattern; exact sibling comparisons stay bijective within each pattern.
fn pattern_sym_disagreement(
    a: &[u16],
    b: &[u16],
    pattern_of_pair: &[u16],
    n_patterns: usize,
    nq: usize,
) -> f64 {
    let mut bucket_a: Vec<Vec<u16>> = vec![Vec::new(); n_patterns];
    let mut bucket_b: Vec<Vec<u16>> = vec![Vec::new(); n_patterns];
    for (j, &p) in pattern_of_pair.iter().enumerate() {
        bucket_a[p as usize].push(a[j]);
        bucket_b[p as usize].push(b[j]);
    }
    let mut mismatches = 0.0;
    for p in 0..n_patterns {
        if bucket_a[p].is_empty() {
            continue;
        }
        let (dist, _) = relative_hamming_symbols(&bucket_a[p], &bucket_b[p], nq)
            .expect("equal lengths per pattern");
        mismatches += dist * bucket_a[p].len() as f64;
    }
    mismatches / pattern_of_pair.len() as f64
}

/// Resolve per-group, per-pattern flips through parity constraints: for
/// every pair of groups whose best flip combination sits at sibling
/// distance, the combination's parity (same or opposite flips) is an edge
/// in a signed union-find; each connected component then takes one
/// orientation. Conflicting parities report ambiguity.
fn resolve_pattern_flips(
    candidates: &[GroupCandidates],
    q: u16,
    quality: f64,
    lambda: f64,
    cfg: &FimConfig,
) -> Result<Vec<Vec<bool>>, FimError> {
    let n = candidates.len();
    let n_patterns = candidates[0].per_pattern.len();
    let mut flips = vec![Vec::with_capacity(n_patterns); n];
    for pid in 0..n_patterns {
        let mut edges: Vec<(f64, usize, usize, bool)> = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                let mut class_min = [f64::INFINITY; 2]; // by parity
                for fu in 0..2 {
                    for fv in 0..2 {
                        let d = class_relabel_disagreement(
                            &candidates[u].per_pattern[pid].letters[fu],
                            &candidates[v].per_pattern[pid].letters[fv],
                            q,
                        );
                        let parity = (fu != fv) as usize;
                        if d < class_min[parity] {
                            class_min[parity] = d;
                        }
                    }
                }
                let best = class_min[0].min(class_min[1]);
                if std::env::var_os("HTL_DEBUG_FIM").is_some() && u == 0 && v <= 4 {
                    eprintln!(
                        "  flip probe ({u},{v}) pattern {pid}: same={:.4} diff={:.4} est={:?}",
                        class_min[0],
                        class_min[1],
                        distance::estimate_distance_stepped(best, lambda, quality, quality, q, 1, 2)
                    );
                }
                // Only sibling-level agreement carries orientation
                // information; everything else is noise.
                let sibling = matches!(
                    distance::estimate_distance_stepped(best, lambda, quality, quality, q, 1, 2),
                    Ok(distance::DistanceEstimate {
                        label: distance::DistanceLabel::Within(2),
                        ..
                    })
                );
                if !sibling {
                    continue;
                }
                if cfg.flip_margin > 0.0 && (class_min[0] - class_min[1]).abs() <= cfg.flip_margin {
                    return Err(FimError::AmbiguousFlip { node: u });
                }
                edges.push((best, u, v, class_min[1] < class_min[0]));
            }
        }
        edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        if std::env::var_os("HTL_DEBUG_FIM").is_some() {
            eprintln!(
                "  flip pattern {pid}: {} edges over {n} groups: {:?}",
                edges.len(),
                edges.iter().map(|(d, u, v, o)| format!("{u}-{v}{}{d:.3}", if *o { "!" } else { "=" })).collect::<Vec<_>>()
            );
        }
        let mut dsu = SignedDsu::new(n);
        for (_, u, v, opposite) in edges {
            if !dsu.union(u, v, opposite) {
                return Err(FimError::AmbiguousFlip { node: u });
            }
        }
        for (u, group_flips) in flips.iter_mut().enumerate() {
            group_flips.push(dsu.orientation(u));
        }
    }
    Ok(flips)
}

/// Union-find with a parity bit along each link.
struct SignedDsu {
    parent: Vec<usize>,
    /// Parity of the node relative to its parent link.
    parity: Vec<bool>,
}

impl SignedDsu {
    fn new(n: usize) -> Self {
        SignedDsu { parent: (0..n).collect(), parity: vec![false; n] }
    }

    /// Root of `x` and the parity of `x` relative to that root.
    fn find(&mut self, x: usize) -> (usize, bool) {
        if self.parent[x] == x {
            return (x, false);
        }
        let (root, up) = self.find(self.parent[x]);
        self.parent[x] = root;
        self.parity[x] ^= up;
        (root, self.parity[x])
    }

    /// Join with the constraint `parity(a) xor parity(b) == opposite`;
    /// false when the constraint contradicts an existing one.
    fn union(&mut self, a: usize, b: usize, opposite: bool) -> bool {
        let (ra, pa) = self.find(a);
        let (rb, pb) = self.find(b);
        if ra == rb {
            return (pa != pb) == opposite;
        }
        self.parent[rb] = ra;
        self.parity[rb] = pa ^ pb ^ opposite;
        true
    }

    fn orientation(&mut self, x: usize) -> bool {
        self.find(x).1
    }
}

/// Letter disagreement between two pattern-letter sequences, minimized
/// over separate relabelings of the first-slot and second-slot letters.
fn class_relabel_disagreement(a: &[crate::model::Letter], b: &[crate::model::Letter], q: u16) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let firsts_a: Vec<u16> = a.iter().step_by(2).map(|&l| u16::from(l)).collect();
    let firsts_b: Vec<u16> = b.iter().step_by(2).map(|&l| u16::from(l)).collect();
    let seconds_a: Vec<u16> = a.iter().skip(1).step_by(2).map(|&l| u16::from(l)).collect();
    let seconds_b: Vec<u16> = b.iter().skip(1).step_by(2).map(|&l| u16::from(l)).collect();
    let (d1, _) = relative_hamming_symbols(&firsts_a, &firsts_b, q as usize).expect("equal");
    let (d2, _) = relative_hamming_symbols(&seconds_a, &seconds_b, q as usize).expect("equal");
    (d1 + d2) / 2.0
}

/// For each label, the subtree under the most common ancestor of its
/// labeled leaves claims the label; each leaf takes the deepest claim and
/// ties go unlabeled.
pub fn propagate_labels(
    tree: &Shape,
    labeled: &[(usize, LabelId)],
    n_leaves: usize,
) -> Vec<Option<LabelId>> {
    let mut claims: Vec<(LabelId, usize, Vec<usize>)> = Vec::new(); // (label, depth, covered leaves)
    let mut by_label: std::collections::BTreeMap<LabelId, BTreeSet<usize>> = Default::default();
    for &(ord, label) in labeled {
        by_label.entry(label).or_default().insert(ord);
    }
    for (label, members) in by_label {
        let (node, depth) = most_common_ancestor(tree, &members);
        claims.push((label, depth, node.leaves()));
    }
    let mut best: Vec<Option<(usize, LabelId, bool)>> = vec![None; n_leaves]; // (depth, label, tie)
    for (label, depth, covered) in claims {
        for ord in covered {
            match &mut best[ord] {
                slot @ None => *slot = Some((depth, label, false)),
                Some((d, l, tie)) => {
                    if depth > *d {
                        *d = depth;
                        *l = label;
                        *tie = false;
                    } else if depth == *d && *l != label {
                        *tie = true;
                    }
                }
            }
        }
    }
    best.into_iter()
        .map(|slot| match slot {
            Some((_, label, false)) => Some(label),
            _ => None,
        })
        .collect()
}

/// Deepest node whose leaves cover `targets`, with its depth.
fn most_common_ancestor<'a>(tree: &'a Shape, targets: &BTreeSet<usize>) -> (&'a Shape, usize) {
    let mut node = tree;
    let mut depth = 0;
    'descend: loop {
        if let Shape::Internal(children) = node {
            for child in children {
                let leaves: BTreeSet<usize> = child.leaves().into_iter().collect();
                if targets.is_subset(&leaves) {
                    node = child;
                    depth += 1;
                    continue 'descend;
                }
            }
        }
        return (node, depth);
    }
}

/// True when the highest node carrying `label` reaches two labeled leaves
/// through edge-disjoint paths, i.e. its full leaf set is identifiable from
/// the tree alone.
pub fn is_well_represented(
    label: LabelId,
    sample_set: &BTreeSet<NodeRef>,
    labels: &LabelAssignment,
    tree: &TreeTopology,
) -> bool {
    let Some(anchor) = labels.anchor(label) else {
        return false;
    };
    if tree.is_leaf(anchor) {
        return sample_set.contains(&anchor);
    }
    let mut seen_child: Option<NodeRef> = None;
    for leaf in tree.subtree_leaves(anchor) {
        if !sample_set.contains(&leaf) {
            continue;
        }
        let child = tree.ancestor_at(leaf, anchor.level + 1);
        match seen_child {
            None => seen_child = Some(child),
            Some(c) if c != child => return true,
            Some(_) => {}
        }
    }
    false
}

/// Compare an inferred hierarchy against the generating topology: at every
/// node the child leaf sets must tile the true child subtrees.
pub fn topology_matches(shape: &Shape, leaf_nodes: &[NodeRef], tree: &TreeTopology) -> bool {
    fn check(shape: &Shape, node: NodeRef, leaf_nodes: &[NodeRef], tree: &TreeTopology) -> bool {
        match shape {
            Shape::Leaf(ord) => tree.is_leaf(node) && leaf_nodes[*ord] == node,
            Shape::Internal(children) => {
                if tree.is_leaf(node) || children.len() != tree.arity() as usize {
                    return false;
                }
                let mut used: BTreeSet<NodeRef> = BTreeSet::new();
                for child in children {
                    let leaves = child.leaves();
                    let Some(&first) = leaves.first() else {
                        return false;
                    };
                    let true_child = tree.ancestor_at(leaf_nodes[first], node.level + 1);
                    if tree.parent(true_child) != Some(node) || !used.insert(true_child) {
                        return false;
                    }
                    if !check(child, true_child, leaf_nodes, tree) {
                        return false;
                    }
                }
                true
            }
        }
    }
    shape.leaf_count() == leaf_nodes.len()
        && shape.leaf_count() as u64 == tree.leaf_count()
        && check(shape, NodeRef::ROOT, leaf_nodes, tree)
}

/// Serialize the result the way the CLI emits it: the tree as nested
/// arrays of leaf addresses, the leaf label map, and diagnostics.
pub fn result_to_json(result: &ReconstructionResult) -> serde_json::Value {
    fn tree_json(shape: &Shape, leaf_nodes: &[NodeRef]) -> serde_json::Value {
        match shape {
            Shape::Leaf(ord) => serde_json::Value::String(leaf_nodes[*ord].to_string()),
            Shape::Internal(children) => serde_json::Value::Array(
                children.iter().map(|c| tree_json(c, leaf_nodes)).collect(),
            ),
        }
    }
    let labels: std::collections::BTreeMap<String, Option<LabelId>> = result
        .leaf_nodes
        .iter()
        .zip(&result.labels)
        .map(|(node, label)| (node.to_string(), *label))
        .collect();
    serde_json::json!({
        "tree": tree_json(&result.tree, &result.leaf_nodes),
        "labels": labels,
        "diagnostics": {
            "r": result.diagnostics.r,
            "quality_trace": result.diagnostics.quality_trace,
            "level_margins": result.diagnostics.level_margins,
            "failure": serde_json::Value::Null,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::sample::{
        generate_instance, make_dataset, sample_iidm, with_instance, InstanceSpec, RootSpec,
    };
    use crate::tree::build_tree;

    fn quick_dataset(seed: u64) -> (Dataset, crate::sample::GroundTruth, TreeTopology) {
        let tree = build_tree(2, 4).unwrap();
        let p = ModelParams::new(ModelVariant::Iidm, 4, 3000, 0.9, seed);
        let gt = sample_iidm(&tree, &p, RootSpec::Uniform, Parallelism::Sequential).unwrap();
        let (labels, s) = generate_instance(&tree, InstanceSpec { h0: 1, h1: 2 }, seed).unwrap();
        let gt = with_instance(gt, labels, s);
        let data = make_dataset(&gt).unwrap();
        (data, gt, tree)
    }

    #[test]
    fn reconstructs_small_iidm_tree() {
        let (data, gt, tree) = quick_dataset(41);
        let params = ReconstructParams::new(0.9, 2);
        let result = reconstruct_tree(&data, &params).unwrap();
        assert!(topology_matches(&result.tree, &result.leaf_nodes, &tree));
        // Instance labels are fully recoverable on the true topology.
        for (ord, node) in result.leaf_nodes.iter().enumerate() {
            let truth = gt.labels.most_specific(*node);
            assert_eq!(result.labels[ord], truth);
        }
    }

    #[test]
    fn lambda_one_is_rejected_structurally() {
        let (data, _, _) = quick_dataset(42);
        let params = ReconstructParams::new(1.0, 2);
        assert!(matches!(
            reconstruct_tree(&data, &params),
            Err(ReconstructError::UnsupportedLambda(_))
        ));
    }

    #[test]
    fn propagate_single_leaf_label() {
        // One labeled leaf: the claim is the leaf itself.
        let tree = Shape::Internal(vec![
            Shape::Internal(vec![Shape::Leaf(0), Shape::Leaf(1)]),
            Shape::Internal(vec![Shape::Leaf(2), Shape::Leaf(3)]),
        ]);
        let out = propagate_labels(&tree, &[(2, 9)], 4);
        assert_eq!(out, vec![None, None, Some(9), None]);
    }

    #[test]
    fn propagate_conflicting_claims() {
        // Two labels whose leaves interleave in a wrong tree: the deeper
        // claim wins; equal-depth double claims go unlabeled.
        // Hand enumeration: label 1 on leaves {0, 2} -> claim at the root
        // (depth 0) covering everything; label 2 on {1} -> claim depth 2.
        // Leaf 1 gets label 2 (deeper); leaves 0, 2, 3 keep label 1.
        let tree = Shape::Internal(vec![
            Shape::Internal(vec![Shape::Leaf(0), Shape::Leaf(1)]),
            Shape::Internal(vec![Shape::Leaf(2), Shape::Leaf(3)]),
        ]);
        let out = propagate_labels(&tree, &[(0, 1), (2, 1), (1, 2)], 4);
        assert_eq!(out, vec![Some(1), Some(2), Some(1), Some(1)]);
        // Same-depth conflict: two labels anchored on the same single leaf.
        let out = propagate_labels(&tree, &[(3, 4), (3, 5)], 4);
        assert_eq!(out, vec![None, None, None, None]);
    }

    #[test]
    fn well_represented_cases() {
        let tree = build_tree(2, 3).unwrap();
        let mut labels = LabelAssignment::new();
        labels.add_subtree(&tree, 0, NodeRef::new(1, 0));
        // Two leaves in different child subtrees of the anchor.
        let s: BTreeSet<NodeRef> = [NodeRef::new(3, 0), NodeRef::new(3, 2)].into();
        assert!(is_well_represented(0, &s, &labels, &tree));
        // Single leaf below the anchor: the first edge is shared.
        let s: BTreeSet<NodeRef> = [NodeRef::new(3, 0)].into();
        assert!(!is_well_represented(0, &s, &labels, &tree));
        // Two leaves inside one child subtree: still shared.
        let s: BTreeSet<NodeRef> = [NodeRef::new(3, 0), NodeRef::new(3, 1)].into();
        assert!(!is_well_represented(0, &s, &labels, &tree));
        // A leaf anchor in the sample set is reachable by the empty path.
        let mut leaf_labels = LabelAssignment::new();
        leaf_labels.insert(NodeRef::new(3, 5), 1);
        let s: BTreeSet<NodeRef> = [NodeRef::new(3, 5)].into();
        assert!(is_well_represented(1, &s, &leaf_labels, &tree));
        assert!(!is_well_represented(1, &BTreeSet::new(), &leaf_labels, &tree));
    }

    #[test]
    fn topology_match_detects_swaps() {
        let tree = build_tree(2, 2).unwrap();
        let leaf_nodes: Vec<NodeRef> = tree.leaves().collect();
        let good = Shape::Internal(vec![
            Shape::Internal(vec![Shape::Leaf(0), Shape::Leaf(1)]),
            Shape::Internal(vec![Shape::Leaf(2), Shape::Leaf(3)]),
        ]);
        assert!(topology_matches(&good, &leaf_nodes, &tree));
        let reordered = Shape::Internal(vec![
            Shape::Internal(vec![Shape::Leaf(3), Shape::Leaf(2)]),
            Shape::Internal(vec![Shape::Leaf(1), Shape::Leaf(0)]),
        ]);
        assert!(topology_matches(&reordered, &leaf_nodes, &tree));
        let wrong = Shape::Internal(vec![
            Shape::Internal(vec![Shape::Leaf(0), Shape::Leaf(2)]),
            Shape::Internal(vec![Shape::Leaf(1), Shape::Leaf(3)]),
        ]);
        assert!(!topology_matches(&wrong, &leaf_nodes, &tree));
    }
}
