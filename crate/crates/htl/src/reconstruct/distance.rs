//! Pairwise distance estimation from representation disagreement.
//!
//! Raw normalized Hamming values are inverted through the expected
//! disagreement of the symmetric channel at a given graph distance,
//! `(q-1)/q * (1 - qa * qb * lambda^dist)` for endpoint qualities `qa, qb`.
//! Alphabet-relabeled models minimize over letter permutations first.

use thiserror::Error;

use crate::model::{Letter, Perm, Representation};

#[derive(Debug, Error, PartialEq)]
pub enum DistanceError {
    #[error("representation lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("raw disagreement {raw} exceeds the channel ceiling {ceiling}; input is corrupt")]
    CorruptInput { raw: f64, ceiling: f64 },
    #[error("channel parameter must lie strictly inside (0, 1), got {0}")]
    BadChannel(f64),
}

/// Number of disagreeing positions.
pub fn hamming(a: &[Letter], b: &[Letter]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Fraction of disagreeing positions, in `[0, 1]`.
pub fn normalized_hamming(a: &Representation, b: &Representation) -> Result<f64, DistanceError> {
    if a.len() != b.len() {
        return Err(DistanceError::LengthMismatch(a.len(), b.len()));
    }
    Ok(hamming(a.letters(), b.letters()) as f64 / a.len() as f64)
}

/// `counts[x][y]` = number of positions where the first sequence shows `x`
/// and the second shows `y`.
fn confusion_counts(a: &[u16], b: &[u16], n: usize) -> Vec<Vec<i64>> {
    let mut m = vec![vec![0i64; n]; n];
    for (&x, &y) in a.iter().zip(b) {
        m[x as usize][y as usize] += 1;
    }
    m
}

/// Exhaustive maximum-agreement relabeling in lexicographic order; the
/// first strict maximum is kept, so ties resolve to the lexicographically
/// smallest permutation. Feasible for `n <= 6`.
fn best_relabel_exhaustive(counts: &[Vec<i64>]) -> (i64, Vec<u16>) {
    let n = counts.len();
    let mut perm: Vec<u16> = (0..n as u16).collect();
    let mut best_score = i64::MIN;
    let mut best_perm = perm.clone();
    loop {
        let score: i64 = perm.iter().enumerate().map(|(x, &y)| counts[x][y as usize]).sum();
        if score > best_score {
            best_score = score;
            best_perm = perm.clone();
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    (best_score, best_perm)
}

/// Advance to the next lexicographic permutation; false once exhausted.
fn next_permutation(p: &mut [u16]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Minimum-cost perfect assignment by shortest augmenting paths, O(n^3).
/// Returns (total cost, row -> column assignment).
pub fn min_cost_assignment(cost: &[Vec<i64>]) -> (i64, Vec<usize>) {
    let n = cost.len();
    let virt = n; // virtual column
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut col_row = vec![n; n + 1]; // row assigned to each column, n = none
    let mut way = vec![0usize; n + 1];
    for row in 0..n {
        col_row[virt] = row;
        let mut j0 = virt;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_row[j0];
            let mut delta = i64::MAX;
            let mut j1 = virt;
            for j in 0..n {
                if !used[j] {
                    let cur = cost[i0][j] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_row[j]] += delta;
                    v[j] -= delta;
                } else if minv[j] != i64::MAX {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_row[j0] == n {
                break;
            }
        }
        // Augment back along the alternating path.
        loop {
            let j1 = way[j0];
            col_row[j0] = col_row[j1];
            j0 = j1;
            if j0 == virt {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    let mut total = 0i64;
    for j in 0..n {
        let r = col_row[j];
        assignment[r] = j;
        total += cost[r][j];
    }
    (total, assignment)
}

/// Maximum-agreement relabeling for sequences over an `n`-symbol alphabet:
/// exhaustive (lexicographically canonical) for `n <= 6`, assignment solver
/// beyond. Returns `(normalized min distance, relabeling of the first
/// sequence)`.
pub fn relative_hamming_symbols(a: &[u16], b: &[u16], n: usize) -> Result<(f64, Vec<u16>), DistanceError> {
    if a.len() != b.len() {
        return Err(DistanceError::LengthMismatch(a.len(), b.len()));
    }
    let counts = confusion_counts(a, b, n);
    let (agree, perm) = if n <= 6 {
        best_relabel_exhaustive(&counts)
    } else {
        let cost: Vec<Vec<i64>> =
            counts.iter().map(|row| row.iter().map(|&c| -c).collect()).collect();
        let (neg, assignment) = min_cost_assignment(&cost);
        (-neg, assignment.iter().map(|&j| j as u16).collect())
    };
    let dist = 1.0 - agree as f64 / a.len() as f64;
    Ok((dist, perm))
}

/// Letter-alphabet wrapper over [`relative_hamming_symbols`]: the minimal
/// normalized Hamming distance over relabelings of `a`, with the minimizer.
pub fn relative_hamming(
    a: &Representation,
    b: &Representation,
    q: u16,
) -> Result<(f64, Perm), DistanceError> {
    let aw: Vec<u16> = a.letters().iter().map(|&l| l as u16).collect();
    let bw: Vec<u16> = b.letters().iter().map(|&l| l as u16).collect();
    let (dist, perm) = relative_hamming_symbols(&aw, &bw, q as usize)?;
    Ok((dist, Perm(perm.into_iter().map(u32::from).collect())))
}

/// Classification of one node pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceLabel {
    /// Estimated graph distance within the window `0..=2r+2`.
    Within(u32),
    /// Beyond the window; usable only as "not nearby".
    Far,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceEstimate {
    pub label: DistanceLabel,
    /// The raw normalized (possibly relabel-minimized) Hamming input.
    pub raw: f64,
    /// Distance to the nearest decision boundary in log-channel units;
    /// 0.5 is the safest possible, 0 sits on a boundary.
    pub margin: f64,
}

/// Invert the expected-disagreement curve and round to the nearest integer
/// distance in log-channel space (boundaries sit at geometric midpoints of
/// adjacent channel powers). Values past the window boundary at `2r + 2.5`
/// log-units classify as [`DistanceLabel::Far`].
pub fn estimate_distance(
    raw: f64,
    lambda: f64,
    quality_a: f64,
    quality_b: f64,
    q: u16,
    r: u32,
) -> Result<DistanceEstimate, DistanceError> {
    estimate_distance_stepped(raw, lambda, quality_a, quality_b, q, r, 1)
}

/// [`estimate_distance`] rounding to the nearest multiple of `step`.
/// Working nodes all sit at one level, so their true distances are even;
/// the reconstruction passes `step = 2`, which doubles every decision
/// margin without changing the inverted curve.
pub fn estimate_distance_stepped(
    raw: f64,
    lambda: f64,
    quality_a: f64,
    quality_b: f64,
    q: u16,
    r: u32,
    step: u32,
) -> Result<DistanceEstimate, DistanceError> {
    debug_assert!(step == 1 || step == 2);
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(DistanceError::BadChannel(lambda));
    }
    let ceiling = (q as f64 - 1.0) / q as f64;
    const TOLERANCE: f64 = 1e-6;
    if raw > ceiling + TOLERANCE {
        return Err(DistanceError::CorruptInput { raw, ceiling });
    }
    let half = step as f64 / 2.0;
    let window = (2 * r + 2) as f64;
    let power = (1.0 - raw / ceiling) / (quality_a * quality_b);
    if power <= 0.0 {
        return Ok(DistanceEstimate { label: DistanceLabel::Far, raw, margin: half });
    }
    let d_real = power.ln() / lambda.ln();
    if d_real > window + half {
        let margin = (d_real - (window + half)).min(half);
        return Ok(DistanceEstimate { label: DistanceLabel::Far, raw, margin });
    }
    let rounded = (d_real / step as f64).round().max(0.0) * step as f64;
    let margin = (half - (d_real - rounded).abs()).min(half);
    Ok(DistanceEstimate { label: DistanceLabel::Within(rounded as u32), raw, margin })
}

/// Expected raw disagreement at a given graph distance; the forward curve
/// that [`estimate_distance`] inverts.
pub fn expected_disagreement(lambda: f64, quality_a: f64, quality_b: f64, q: u16, dist: u32) -> f64 {
    let ceiling = (q as f64 - 1.0) / q as f64;
    ceiling * (1.0 - quality_a * quality_b * lambda.powi(dist as i32))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamming_basics() {
        let a = Representation::new(vec![0, 1, 2, 3]);
        assert_eq!(normalized_hamming(&a, &a).unwrap(), 0.0);
        let b = Representation::new(vec![1, 2, 3, 0]);
        assert_eq!(normalized_hamming(&a, &b).unwrap(), 1.0);
        let c = Representation::new(vec![0, 1, 2, 0]);
        assert_eq!(normalized_hamming(&a, &c).unwrap(), 0.25);
        let short = Representation::new(vec![0]);
        assert!(normalized_hamming(&a, &short).is_err());
    }

    #[test]
    fn relabeled_sequences_have_zero_distance() {
        let a = Representation::new(vec![0, 0, 1, 1]);
        let b = Representation::new(vec![1, 1, 0, 0]);
        let (d, sigma) = relative_hamming(&a, &b, 2).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(sigma.0, vec![1, 0]);
    }

    #[test]
    fn relative_never_exceeds_plain() {
        let a = Representation::new(vec![0, 1, 2, 3, 0, 1, 2, 3]);
        let b = Representation::new(vec![0, 1, 2, 0, 0, 1, 3, 3]);
        let (rel, _) = relative_hamming(&a, &b, 4).unwrap();
        assert!(rel <= normalized_hamming(&a, &b).unwrap());
    }

    #[test]
    fn assignment_agrees_with_enumeration() {
        // Cross-check the solver against the exhaustive path on alphabets
        // where both run.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for n in 2..=6usize {
            for _ in 0..40 {
                let counts: Vec<Vec<i64>> =
                    (0..n).map(|_| (0..n).map(|_| rng.gen_range(0..50)).collect()).collect();
                let (best, _) = best_relabel_exhaustive(&counts);
                let cost: Vec<Vec<i64>> =
                    counts.iter().map(|r| r.iter().map(|&c| -c).collect()).collect();
                let (neg, assignment) = min_cost_assignment(&cost);
                assert_eq!(-neg, best);
                let mut seen = vec![false; n];
                for &j in &assignment {
                    assert!(!seen[j]);
                    seen[j] = true;
                }
            }
        }
    }

    #[test]
    fn distance_inversion_round_trips_integers() {
        for (lambda, q, r) in [(0.9, 4u16, 2u32), (0.6, 2, 1), (0.45, 64, 2)] {
            for dist in 0..=(2 * r + 2) {
                let raw = expected_disagreement(lambda, 1.0, 1.0, q, dist);
                let est = estimate_distance(raw, lambda, 1.0, 1.0, q, r).unwrap();
                assert_eq!(est.label, DistanceLabel::Within(dist), "lambda={lambda} dist={dist}");
                assert!(est.margin > 0.45);
            }
        }
    }

    #[test]
    fn distance_formula_example() {
        // q=4, lambda=0.5, raw = 0.75 * (1 - 0.25) = 0.5625 sits at distance 2.
        let est = estimate_distance(0.5625, 0.5, 1.0, 1.0, 4, 2).unwrap();
        assert_eq!(est.label, DistanceLabel::Within(2));
    }

    #[test]
    fn ceiling_maps_far_and_beyond_errors() {
        let est = estimate_distance(0.75, 0.5, 1.0, 1.0, 4, 1).unwrap();
        assert_eq!(est.label, DistanceLabel::Far);
        assert!(estimate_distance(0.80, 0.5, 1.0, 1.0, 4, 1).is_err());
        assert!(estimate_distance(0.0, 1.0, 1.0, 1.0, 4, 1).is_err());
    }

    #[test]
    fn zero_raw_with_full_quality_is_distance_zero() {
        let est = estimate_distance(0.0, 0.7, 1.0, 1.0, 4, 2).unwrap();
        assert_eq!(est.label, DistanceLabel::Within(0));
    }
}
