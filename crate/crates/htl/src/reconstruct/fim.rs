//! Pair-bijection recovery for the feature-interaction model.
//!
//! Siblings carry bijective images of the same noisy parent pair values at
//! aligned pair positions. Conditioning on a value pair in two siblings and
//! ranking co-occurrences in a third recovers, for each value, its top
//! partner and the `2(q-1)` values sharing one parent letter with it. The
//! mutual-neighbor structure splits those into the two single-letter lines,
//! line classes assemble into a q-by-q grid, and the grid is the recovered
//! bijection up to per-letter renames of each axis plus one global
//! transpose (the flip), which sister comparisons resolve.

use thiserror::Error;

use crate::model::{Letter, PairPerm, Perm, Representation};

use super::distance::relative_hamming_symbols;

#[derive(Debug, Error, PartialEq)]
pub enum FimError {
    #[error("pair recovery needs at least 3 siblings, got {0}")]
    NeedThreeSiblings(usize),
    #[error("representations must share an even length")]
    BadLengths,
    #[error("observed count {count} for value {value} is below the configured minimum {need}")]
    LowCount { value: u16, count: u64, need: u64 },
    #[error("co-occurrence ranking around value {value} is ambiguous at the configured margin")]
    AmbiguousSelection { value: u16 },
    #[error("recovered correspondence for sibling {sibling} is not a bijection")]
    NotABijection { sibling: usize },
    #[error("neighbor set of value {value} does not split into two lines")]
    BadPartition { value: u16 },
    #[error("line naming is inconsistent; the co-occurrence structure is corrupt")]
    InconsistentNaming,
    #[error("grid cell ({row}, {col}) is not uniquely occupied")]
    GridCell { row: u8, col: u8 },
    #[error("flip resolution for node {node} is ambiguous at the configured margin")]
    AmbiguousFlip { node: usize },
    #[error("flip resolution needs at least 2 nodes, got {0}")]
    NeedTwoNodes(usize),
}

/// Knobs for the count-based recovery.
#[derive(Debug, Clone, Copy)]
pub struct FimConfig {
    /// Minimum co-occurrence mass behind each conditioned value.
    pub min_value_count: u64,
    /// Minimum count separation at every ranking boundary.
    pub margin: u64,
    /// Distance separation below which flip resolution reports ambiguity
    /// (0 disables the check; exact ties then resolve to no flip).
    pub flip_margin: f64,
}

impl Default for FimConfig {
    fn default() -> Self {
        FimConfig { min_value_count: 30, margin: 1, flip_margin: 0.0 }
    }
}

/// Encode a representation as its canonical pair-value sequence
/// `(rep[2i], rep[2i+1])`.
pub fn pair_symbols(rep: &Representation, q: u16) -> Vec<u16> {
    rep.letters()
        .chunks_exact(2)
        .map(|ab| PairPerm::encode(q, ab[0], ab[1]))
        .collect()
}

/// One sibling's recovered pair structure: grid coordinates per value, up
/// to per-letter renames of both axes and a global transpose shared by the
/// whole sibling group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairPermRecovery {
    pub q: u16,
    /// `coords[value] = (row, col)`.
    pub coords: Vec<(Letter, Letter)>,
    /// `grid[row][col] = value`; the assembled bijection.
    pub grid: Vec<Vec<u16>>,
}

impl PairPermRecovery {
    /// The recovered neighbor set `A(x)`: every value sharing a row or a
    /// column with `x`.
    pub fn neighbor_set(&self, x: u16) -> Vec<u16> {
        let mut out = self.row_mates(x);
        out.extend(self.col_mates(x));
        out.sort_unstable();
        out
    }

    /// Values in `x`'s recovered row, excluding `x` (one of `B(x)/C(x)`).
    pub fn row_mates(&self, x: u16) -> Vec<u16> {
        let (r, c) = self.coords[x as usize];
        (0..self.q as usize)
            .filter(|&j| j != c as usize)
            .map(|j| self.grid[r as usize][j])
            .collect()
    }

    /// Values in `x`'s recovered column, excluding `x` (the other of
    /// `B(x)/C(x)`).
    pub fn col_mates(&self, x: u16) -> Vec<u16> {
        let (r, c) = self.coords[x as usize];
        (0..self.q as usize)
            .filter(|&i| i != r as usize)
            .map(|i| self.grid[i][c as usize])
            .collect()
    }

    /// Grid coordinates of a value, transposed when `flip` is set.
    pub fn decode(&self, value: u16, flip: bool) -> (Letter, Letter) {
        let (r, c) = self.coords[value as usize];
        if flip {
            (c, r)
        } else {
            (r, c)
        }
    }
}

struct Ranked {
    values: Vec<u16>,
    counts: Vec<u64>,
}

fn rank_counts(row: &[u32]) -> Ranked {
    let mut order: Vec<u16> = (0..row.len() as u16).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(row[v as usize]), v));
    Ranked { counts: order.iter().map(|&v| row[v as usize] as u64).collect(), values: order }
}

fn check_bijection(map: &[u16], sibling: usize) -> Result<(), FimError> {
    let mut seen = vec![false; map.len()];
    for &v in map {
        if seen[v as usize] {
            return Err(FimError::NotABijection { sibling });
        }
        seen[v as usize] = true;
    }
    Ok(())
}

/// Recover the pair structure of every sibling in one group from their
/// aligned pair-value sequences. Requires at least three siblings: the
/// first three provide the conditioned co-occurrence tensor, the rest align
/// to the first pairwise.
pub fn recover_group(
    seqs: &[&[u16]],
    q: u16,
    cfg: &FimConfig,
) -> Result<Vec<PairPermRecovery>, FimError> {
    if seqs.len() < 3 {
        return Err(FimError::NeedThreeSiblings(seqs.len()));
    }
    let len = seqs[0].len();
    if len == 0 || seqs.iter().any(|s| s.len() != len) {
        return Err(FimError::BadLengths);
    }
    let nq = q as usize * q as usize;

    // Count tensor over (sibling1 value, sibling2 value, sibling0 value)
    // and its marginal over sibling0.
    let mut tensor = vec![0u32; nq * nq * nq];
    let mut marginal = vec![0u32; nq * nq];
    for pos in 0..len {
        let b = seqs[1][pos] as usize;
        let c = seqs[2][pos] as usize;
        let a = seqs[0][pos] as usize;
        tensor[(b * nq + c) * nq + a] += 1;
        marginal[b * nq + c] += 1;
    }

    // Diagonal partner of each sibling1 value in sibling2.
    let mut partner = vec![0u16; nq];
    for b in 0..nq {
        let ranked = rank_counts(&marginal[b * nq..(b + 1) * nq]);
        if ranked.counts[0] < cfg.min_value_count {
            return Err(FimError::LowCount {
                value: b as u16,
                count: ranked.counts[0],
                need: cfg.min_value_count,
            });
        }
        if ranked.counts[0] < ranked.counts[1] + cfg.margin {
            return Err(FimError::AmbiguousSelection { value: b as u16 });
        }
        partner[b] = ranked.values[0];
    }
    check_bijection(&partner, 1)?;

    // Aligned value in sibling0 and the neighbor set of that value.
    let mut to_first = vec![0u16; nq]; // sibling1 value -> sibling0 value
    let mut neighbors: Vec<Vec<u16>> = vec![Vec::new(); nq]; // by sibling0 value
    let a_size = 2 * (q as usize - 1);
    for b in 0..nq {
        let c = partner[b] as usize;
        let ranked = rank_counts(&tensor[(b * nq + c) * nq..(b * nq + c + 1) * nq]);
        if ranked.counts[0] < ranked.counts[1] + cfg.margin {
            return Err(FimError::AmbiguousSelection { value: b as u16 });
        }
        let boundary = a_size; // last neighbor rank; rank 0 is the value itself
        if boundary + 1 < nq && ranked.counts[boundary] < ranked.counts[boundary + 1] + cfg.margin {
            return Err(FimError::AmbiguousSelection { value: ranked.values[0] });
        }
        let x = ranked.values[0];
        to_first[b] = x;
        neighbors[x as usize] = ranked.values[1..=a_size].to_vec();
    }
    check_bijection(&to_first, 0)?;

    let coords0 = assemble_grid(&neighbors, q)?;
    let mut out = Vec::with_capacity(seqs.len());
    out.push(recovery_from_coords(coords0.clone(), q)?);

    // Sibling 1 via the conditioned alignment, sibling 2 via the diagonal.
    let coords1: Vec<(Letter, Letter)> =
        (0..nq).map(|b| coords0[to_first[b] as usize]).collect();
    out.push(recovery_from_coords(coords1, q)?);
    let mut coords2 = vec![(0 as Letter, 0 as Letter); nq];
    for b in 0..nq {
        coords2[partner[b] as usize] = coords0[to_first[b] as usize];
    }
    out.push(recovery_from_coords(coords2, q)?);

    // Remaining siblings align to sibling0 by plain co-occurrence argmax.
    for (s, seq) in seqs.iter().enumerate().skip(3) {
        let mut counts = vec![0u32; nq * nq];
        for pos in 0..len {
            counts[(seq[pos] as usize) * nq + seqs[0][pos] as usize] += 1;
        }
        let mut to0 = vec![0u16; nq];
        for v in 0..nq {
            let ranked = rank_counts(&counts[v * nq..(v + 1) * nq]);
            if ranked.counts[0] < cfg.min_value_count {
                return Err(FimError::LowCount {
                    value: v as u16,
                    count: ranked.counts[0],
                    need: cfg.min_value_count,
                });
            }
            if ranked.counts[0] < ranked.counts[1] + cfg.margin {
                return Err(FimError::AmbiguousSelection { value: v as u16 });
            }
            to0[v] = ranked.values[0];
        }
        check_bijection(&to0, s)?;
        let coords: Vec<(Letter, Letter)> =
            (0..nq).map(|v| coords0[to0[v] as usize]).collect();
        out.push(recovery_from_coords(coords, q)?);
    }
    Ok(out)
}

/// Split each neighbor set into its two mutual-neighbor lines, name the
/// line families consistently across all values, and intersect them into
/// grid coordinates.
fn assemble_grid(neighbors: &[Vec<u16>], q: u16) -> Result<Vec<(Letter, Letter)>, FimError> {
    let nq = neighbors.len();
    let line = q as usize - 1;

    // Two mutually-adjacent parts per value.
    let mut parts: Vec<[Vec<u16>; 2]> = Vec::with_capacity(nq);
    for (x, set) in neighbors.iter().enumerate() {
        if set.len() != 2 * line {
            return Err(FimError::BadPartition { value: x as u16 });
        }
        let mut comp: Vec<Option<usize>> = vec![None; set.len()];
        let mut n_comp = 0;
        for start in 0..set.len() {
            if comp[start].is_some() {
                continue;
            }
            let id = n_comp;
            n_comp += 1;
            let mut stack = vec![start];
            comp[start] = Some(id);
            while let Some(i) = stack.pop() {
                for j in 0..set.len() {
                    if comp[j].is_none()
                        && neighbors[set[i] as usize].contains(&set[j])
                        && neighbors[set[j] as usize].contains(&set[i])
                    {
                        comp[j] = Some(id);
                        stack.push(j);
                    }
                }
            }
        }
        if n_comp != 2 {
            return Err(FimError::BadPartition { value: x as u16 });
        }
        let mut p: [Vec<u16>; 2] = [Vec::new(), Vec::new()];
        for (i, &v) in set.iter().enumerate() {
            p[comp[i].unwrap()].push(v);
        }
        if p[0].len() != line || p[1].len() != line {
            return Err(FimError::BadPartition { value: x as u16 });
        }
        p[0].sort_unstable();
        p[1].sort_unstable();
        if p[1].first() < p[0].first() {
            p.swap(0, 1);
        }
        parts.push(p);
    }

    // Name one part per value "row" consistently: mates see each other in
    // the same family of lines.
    let mut row_part: Vec<Option<usize>> = vec![None; nq];
    row_part[0] = Some(0);
    let mut queue = std::collections::VecDeque::from([0u16]);
    while let Some(v) = queue.pop_front() {
        let rp = row_part[v as usize].expect("queued values are named");
        for (part_idx, family_is_row) in [(rp, true), (1 - rp, false)] {
            for &y in &parts[v as usize][part_idx] {
                let contains = |side: usize| parts[y as usize][side].contains(&v);
                let side_with_v = if contains(0) {
                    0
                } else if contains(1) {
                    1
                } else {
                    return Err(FimError::InconsistentNaming);
                };
                let y_row = if family_is_row { side_with_v } else { 1 - side_with_v };
                match row_part[y as usize] {
                    None => {
                        row_part[y as usize] = Some(y_row);
                        queue.push_back(y);
                    }
                    Some(existing) if existing == y_row => {}
                    Some(_) => return Err(FimError::InconsistentNaming),
                }
            }
        }
    }
    if row_part.iter().any(Option::is_none) {
        return Err(FimError::InconsistentNaming);
    }

    // Row classes and column classes by closure over mates.
    let row_class = line_classes(nq, q, |v| {
        let rp = row_part[v].unwrap();
        parts[v][rp].clone()
    })?;
    let col_class = line_classes(nq, q, |v| {
        let rp = row_part[v].unwrap();
        parts[v][1 - rp].clone()
    })?;

    let mut coords = vec![(0 as Letter, 0 as Letter); nq];
    let mut grid_seen = vec![false; nq];
    for v in 0..nq {
        let (r, c) = (row_class[v], col_class[v]);
        let cell = r as usize * q as usize + c as usize;
        if grid_seen[cell] {
            return Err(FimError::GridCell { row: r, col: c });
        }
        grid_seen[cell] = true;
        coords[v] = (r, c);
    }
    Ok(coords)
}

/// Partition values into `q` classes of size `q` by the mate relation;
/// class ids follow the smallest contained value.
fn line_classes(
    nq: usize,
    q: u16,
    mates: impl Fn(usize) -> Vec<u16>,
) -> Result<Vec<Letter>, FimError> {
    let mut class: Vec<Option<u16>> = vec![None; nq];
    let mut n_classes = 0u16;
    for v in 0..nq {
        if class[v].is_some() {
            continue;
        }
        let id = n_classes;
        n_classes += 1;
        let mut stack = vec![v as u16];
        class[v] = Some(id);
        let mut size = 1;
        while let Some(x) = stack.pop() {
            for y in mates(x as usize) {
                match class[y as usize] {
                    None => {
                        class[y as usize] = Some(id);
                        size += 1;
                        stack.push(y);
                    }
                    Some(existing) if existing == id => {}
                    Some(_) => return Err(FimError::InconsistentNaming),
                }
            }
        }
        if size != q as usize {
            return Err(FimError::InconsistentNaming);
        }
    }
    if n_classes != q {
        return Err(FimError::InconsistentNaming);
    }
    Ok(class.into_iter().map(|c| c.unwrap() as Letter).collect())
}

fn recovery_from_coords(
    coords: Vec<(Letter, Letter)>,
    q: u16,
) -> Result<PairPermRecovery, FimError> {
    let mut grid = vec![vec![u16::MAX; q as usize]; q as usize];
    for (v, &(r, c)) in coords.iter().enumerate() {
        if grid[r as usize][c as usize] != u16::MAX {
            return Err(FimError::GridCell { row: r, col: c });
        }
        grid[r as usize][c as usize] = v as u16;
    }
    Ok(PairPermRecovery { q, coords, grid })
}

/// Rebuild a parent-position representation from one sibling's pair values:
/// grid coordinates (optionally transposed) written back through the known
/// position rewiring.
pub fn decode_member(
    syms: &[u16],
    recovery: &PairPermRecovery,
    flip: bool,
    rewiring: &Perm,
) -> Representation {
    let k = syms.len() * 2;
    let mut out = vec![0 as Letter; k];
    for (i, &sym) in syms.iter().enumerate() {
        let (r, c) = recovery.decode(sym, flip);
        out[rewiring.apply(2 * i as u32) as usize] = r;
        out[rewiring.apply(2 * i as u32 + 1) as usize] = c;
    }
    Representation::new(out)
}

/// Choose each node's flip bit so that reconstructions of nearby nodes
/// agree: for every node, the candidate whose best pair-symbol relative
/// distance to some other node's candidate is smallest wins; exact ties
/// keep the unflipped decode.
pub fn fim_resolve_flip(
    candidates: &[(Representation, Representation)],
    q: u16,
    cfg: &FimConfig,
) -> Result<Vec<bool>, FimError> {
    let n = candidates.len();
    if n < 2 {
        return Err(FimError::NeedTwoNodes(n));
    }
    let nq = (q as u32 * q as u32) as usize;
    let syms: Vec<[Vec<u16>; 2]> = candidates
        .iter()
        .map(|(plain, flipped)| [pair_symbols(plain, q), pair_symbols(flipped, q)])
        .collect();
    let mut flips = Vec::with_capacity(n);
    for u in 0..n {
        let mut best = [f64::INFINITY; 2];
        for v in 0..n {
            if v == u {
                continue;
            }
            for (fu, item) in best.iter_mut().enumerate() {
                for fv in 0..2 {
                    let (d, _) = relative_hamming_symbols(&syms[u][fu], &syms[v][fv], nq)
                        .expect("equal lengths");
                    if d < *item {
                        *item = d;
                    }
                }
            }
        }
        if cfg.flip_margin > 0.0 && (best[0] - best[1]).abs() <= cfg.flip_margin {
            return Err(FimError::AmbiguousFlip { node: u });
        }
        flips.push(best[1] < best[0]);
    }
    Ok(flips)
}

/// Check that a recovery differs from the true pair map only by per-letter
/// renames of both axes and an optional transpose; returns the witnesses.
pub fn residual_dof(recovery: &PairPermRecovery, truth: &PairPerm) -> Option<(Perm, Perm, bool)> {
    let q = truth.q;
    'flip: for flip in [false, true] {
        let mut row_map = vec![u32::MAX; q as usize];
        let mut col_map = vec![u32::MAX; q as usize];
        for a in 0..q as u8 {
            for b in 0..q as u8 {
                let v = truth.apply(PairPerm::encode(q, a, b));
                let (r, c) = recovery.decode(v, flip);
                if row_map[a as usize] == u32::MAX {
                    row_map[a as usize] = u32::from(r);
                } else if row_map[a as usize] != u32::from(r) {
                    continue 'flip;
                }
                if col_map[b as usize] == u32::MAX {
                    col_map[b as usize] = u32::from(c);
                } else if col_map[b as usize] != u32::from(c) {
                    continue 'flip;
                }
            }
        }
        let (rho_r, rho_c) = (Perm(row_map), Perm(col_map));
        if rho_r.is_valid() && rho_c.is_valid() {
            return Some((rho_r, rho_c, flip));
        }
    }
    None
}
