//! Ancestral reconstruction: exact per-coordinate root posteriors on a
//! small subtree by upward message passing over the symmetric channel,
//! with leaf observation noise absorbed as one extra edge.

use rand::Rng;

use crate::model::{Letter, Representation};
use crate::rng::{stream, StreamTag};
use crate::sample::channel_step;

use super::Shape;

/// How a posterior tie between letters is resolved.
///
/// `Smallest` is the documented default for the standalone operation.
/// Inside the recursion ties are broken by a seeded symmetric draw:
/// favoring small letters correlates the errors of independently
/// reconstructed nodes, which slowly poisons both the distance inversion
/// and the quality calibration as levels stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieBreak {
    Smallest,
    Seeded(u64),
}

/// Pass a message through one symmetric-channel edge. For the channel that
/// keeps a letter with probability `lambda + (1-lambda)/q`, the outgoing
/// message is `lambda * m(x) + (1-lambda) * mean(m)` — linear time in `q`.
fn through_channel(msg: &mut [f64], lambda: f64) {
    let mean = msg.iter().sum::<f64>() / msg.len() as f64;
    for m in msg.iter_mut() {
        *m = lambda * *m + (1.0 - lambda) * mean;
    }
}

fn normalize(msg: &mut [f64]) {
    let sum: f64 = msg.iter().sum();
    debug_assert!(sum > 0.0, "message must be normalizable");
    for m in msg.iter_mut() {
        *m /= sum;
    }
}

fn upward_message(
    shape: &Shape,
    leaf_letters: &[Letter],
    lambda2: f64,
    lambda: f64,
    q: usize,
) -> Vec<f64> {
    match shape {
        Shape::Leaf(slot) => {
            // Observation likelihood: the estimate equals the true letter
            // with probability lambda2 + (1-lambda2)/q.
            let obs = leaf_letters[*slot] as usize;
            let mut msg = vec![(1.0 - lambda2) / q as f64; q];
            msg[obs] += lambda2;
            msg
        }
        Shape::Internal(children) => {
            let mut msg = vec![1.0f64; q];
            for child in children {
                let mut m = upward_message(child, leaf_letters, lambda2, lambda, q);
                through_channel(&mut m, lambda);
                for (acc, f) in msg.iter_mut().zip(&m) {
                    *acc *= f;
                }
            }
            normalize(&mut msg);
            msg
        }
    }
}

/// Exact posterior of the root letter of `shape` given per-leaf letter
/// estimates of quality `lambda2`, under a uniform root prior.
pub fn root_posterior(
    shape: &Shape,
    leaf_letters: &[Letter],
    lambda2: f64,
    lambda: f64,
    q: u16,
) -> Vec<f64> {
    let mut msg = upward_message(shape, leaf_letters, lambda2, lambda, q as usize);
    normalize(&mut msg);
    msg
}

fn map_letter(posterior: &[f64], tie: TieBreak, coord: usize) -> Letter {
    let mut best = 0usize;
    for (i, &p) in posterior.iter().enumerate() {
        if p > posterior[best] {
            best = i;
        }
    }
    if let TieBreak::Seeded(seed) = tie {
        let top = posterior[best];
        let tied: Vec<usize> =
            (0..posterior.len()).filter(|&i| posterior[i] == top).collect();
        if tied.len() > 1 {
            let mut rng = stream(seed, StreamTag::TieBreak, 0, coord as u64);
            best = tied[rng.gen_range(0..tied.len())];
        }
    }
    best as Letter
}

/// Reconstruct the root representation coordinate by coordinate: exact
/// posterior, then the maximum-posterior letter (ties to the smallest).
pub fn ancestral_bp(
    shape: &Shape,
    leaf_reps: &[&Representation],
    lambda2: f64,
    lambda: f64,
    q: u16,
) -> Representation {
    ancestral_bp_tied(shape, leaf_reps, lambda2, lambda, q, TieBreak::Smallest)
}

/// [`ancestral_bp`] with an explicit tie policy (the recursion passes a
/// seeded one).
pub fn ancestral_bp_tied(
    shape: &Shape,
    leaf_reps: &[&Representation],
    lambda2: f64,
    lambda: f64,
    q: u16,
    tie: TieBreak,
) -> Representation {
    let k = leaf_reps.first().map_or(0, |r| r.len());
    let mut letters = Vec::with_capacity(k);
    let mut buf = vec![0 as Letter; leaf_reps.len()];
    for coord in 0..k {
        for (slot, rep) in leaf_reps.iter().enumerate() {
            buf[slot] = rep[coord];
        }
        let posterior = root_posterior(shape, &buf, lambda2, lambda, q);
        letters.push(map_letter(&posterior, tie, coord));
    }
    Representation::new(letters)
}

/// [`ancestral_bp`] together with the empirically calibrated quality of its
/// output under these parameters.
pub fn ancestral_bp_with_quality(
    shape: &Shape,
    leaf_reps: &[&Representation],
    lambda2: f64,
    lambda: f64,
    q: u16,
    calibration_samples: u32,
    seed: u64,
) -> (Representation, f64) {
    let rep = ancestral_bp(shape, leaf_reps, lambda2, lambda, q);
    let quality = calibrate_quality(shape, lambda, lambda2, q, calibration_samples, seed);
    (rep, quality)
}

/// Measure the quality of the reconstructed root letter by simulation:
/// broadcast a uniform root down `shape`, corrupt leaves to quality
/// `lambda2`, reconstruct, and convert the hit rate `p` back to the
/// mixture weight `(p - 1/q) / (1 - 1/q)` of a truth-or-uniform estimate.
///
/// With symmetric tie-breaking the truth-or-uniform mixture is the exact
/// conditional law of the estimate, so feeding each level's calibrated
/// quality into the next keeps the whole tower faithful.
pub fn calibrate_quality(
    shape: &Shape,
    lambda: f64,
    lambda2: f64,
    q: u16,
    samples: u32,
    seed: u64,
) -> f64 {
    let n_leaves = shape.leaf_count();
    let mut hits = 0u64;
    let mut leaf_letters = vec![0 as Letter; n_leaves];
    let mut rng = stream(seed, StreamTag::Calibration, 0, 0);
    let tie = TieBreak::Seeded(seed ^ 0x7ea5);
    for s in 0..samples {
        let root = rng.gen_range(0..q) as Letter;
        broadcast_letters(shape, root, lambda, lambda2, q, &mut leaf_letters, &mut rng);
        let posterior = root_posterior(shape, &leaf_letters, lambda2, lambda, q);
        if map_letter(&posterior, tie, s as usize) == root {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    let inv_q = 1.0 / q as f64;
    ((p - inv_q) / (1.0 - inv_q)).clamp(0.0, 1.0)
}

fn broadcast_letters<R: Rng>(
    shape: &Shape,
    letter: Letter,
    lambda: f64,
    lambda2: f64,
    q: u16,
    out: &mut [Letter],
    rng: &mut R,
) {
    match shape {
        Shape::Leaf(slot) => {
            out[*slot] = channel_step(letter, lambda2, q, rng.gen::<f64>());
        }
        Shape::Internal(children) => {
            for child in children {
                let next = channel_step(letter, lambda, q, rng.gen::<f64>());
                broadcast_letters(child, next, lambda, lambda2, q, out, rng);
            }
        }
    }
}
