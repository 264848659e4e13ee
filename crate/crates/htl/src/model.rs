//! Representations, alphabet permutations, and generative-model parameters.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A single representation letter. The alphabet is `0..q` with `q <= 256`,
/// which keeps representations byte-dense for the Hamming inner loops.
pub type Letter = u8;

/// Maximum supported alphabet size.
pub const MAX_ALPHABET: u16 = 256;

/// Length-`k` string over `[q]` attached to a tree node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Representation {
    letters: Vec<Letter>,
}

impl Representation {
    pub fn new(letters: Vec<Letter>) -> Self {
        Representation { letters }
    }

    /// Validating constructor: enforces length `k` and letters `< q`.
    pub fn checked(letters: Vec<Letter>, q: u16, k: usize) -> Result<Self, ModelError> {
        if letters.len() != k {
            return Err(ModelError::BadRepresentationLength { got: letters.len(), want: k });
        }
        if let Some(&bad) = letters.iter().find(|&&l| (l as u16) >= q) {
            return Err(ModelError::LetterOutOfRange { letter: bad, q });
        }
        Ok(Representation { letters })
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }
}

impl std::ops::Index<usize> for Representation {
    type Output = Letter;
    fn index(&self, i: usize) -> &Letter {
        &self.letters[i]
    }
}

/// Permutation of `{0, .., n-1}` stored as the image table: `perm[i]` is the
/// image of `i`. Used both for alphabet relabelings (`n = q`) and for
/// position rewirings (`n = k`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Perm(pub Vec<u32>);

impl Perm {
    pub fn identity(n: usize) -> Self {
        Perm((0..n as u32).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply(&self, x: u32) -> u32 {
        self.0[x as usize]
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0u32; self.0.len()];
        for (i, &img) in self.0.iter().enumerate() {
            inv[img as usize] = i as u32;
        }
        Perm(inv)
    }

    /// `self` after `other`: `(self * other)(x) = self(other(x))`.
    pub fn compose(&self, other: &Perm) -> Perm {
        Perm(other.0.iter().map(|&x| self.0[x as usize]).collect())
    }

    pub fn is_valid(&self) -> bool {
        let n = self.0.len();
        let mut seen = vec![false; n];
        for &img in &self.0 {
            let img = img as usize;
            if img >= n || seen[img] {
                return false;
            }
            seen[img] = true;
        }
        true
    }

    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Perm {
        let mut table: Vec<u32> = (0..n as u32).collect();
        // Fisher-Yates.
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            table.swap(i, j);
        }
        Perm(table)
    }

    /// Relabel a representation letter-wise (alphabet permutation, n = q).
    pub fn relabel(&self, rep: &Representation) -> Representation {
        Representation::new(rep.letters().iter().map(|&l| self.0[l as usize] as Letter).collect())
    }

    /// Permute positions: output position `i` takes the input letter at
    /// `perm(i)` (position rewiring, n = k).
    pub fn gather(&self, rep: &Representation) -> Representation {
        Representation::new(self.0.iter().map(|&src| rep[src as usize]).collect())
    }
}

/// Bijection of `[q]^2` stored over encoded pair values `a*q + b`.
/// `table[x]` is the image of pair value `x`; viewing the image as
/// `(f(x), g(x))` gives the two per-letter component functions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairPerm {
    pub q: u16,
    pub table: Vec<u16>,
}

impl PairPerm {
    pub fn identity(q: u16) -> Self {
        PairPerm { q, table: (0..q * q).collect() }
    }

    pub fn random<R: Rng>(q: u16, rng: &mut R) -> Self {
        PairPerm {
            q,
            table: Perm::random((q * q) as usize, rng).0.into_iter().map(|v| v as u16).collect(),
        }
    }

    pub fn encode(q: u16, a: Letter, b: Letter) -> u16 {
        a as u16 * q + b as u16
    }

    pub fn decode(q: u16, x: u16) -> (Letter, Letter) {
        ((x / q) as Letter, (x % q) as Letter)
    }

    pub fn apply(&self, x: u16) -> u16 {
        self.table[x as usize]
    }

    /// First output letter of the pair map.
    pub fn f(&self, a: Letter, b: Letter) -> Letter {
        Self::decode(self.q, self.apply(Self::encode(self.q, a, b))).0
    }

    /// Second output letter of the pair map.
    pub fn g(&self, a: Letter, b: Letter) -> Letter {
        Self::decode(self.q, self.apply(Self::encode(self.q, a, b))).1
    }

    pub fn inverse(&self) -> PairPerm {
        let mut inv = vec![0u16; self.table.len()];
        for (i, &img) in self.table.iter().enumerate() {
            inv[img as usize] = i as u16;
        }
        PairPerm { q: self.q, table: inv }
    }

    pub fn is_valid(&self) -> bool {
        self.table.len() == (self.q * self.q) as usize
            && Perm(self.table.iter().map(|&v| u32::from(v)).collect()).is_valid()
    }
}

/// Which generative model produced (or is assumed for) the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModelVariant {
    /// Letters evolve independently through the symmetric channel.
    Iidm,
    /// Each edge additionally relabels the alphabet by a permutation.
    Vrm,
    /// Letters evolve in interacting pairs through a pair bijection, with a
    /// known per-level position rewiring.
    Fim,
}

impl ModelVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelVariant::Iidm => "IIDM",
            ModelVariant::Vrm => "VRM",
            ModelVariant::Fim => "FIM",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "IIDM" => Some(ModelVariant::Iidm),
            "VRM" => Some(ModelVariant::Vrm),
            "FIM" => Some(ModelVariant::Fim),
            _ => None,
        }
    }
}

/// How per-edge parameters are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Independent uniform draw per edge.
    Random,
    /// One draw per level, shared by all edges at that level.
    Shared,
    /// Caller-supplied list, one entry per edge in level-major order.
    Adversarial,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Random => "random",
            Regime::Shared => "shared",
            Regime::Adversarial => "adversarial",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "random" => Some(Regime::Random),
            "shared" => Some(Regime::Shared),
            "adversarial" => Some(Regime::Adversarial),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("alphabet size must be in 2..={MAX_ALPHABET}, got {0}")]
    BadAlphabet(u16),
    #[error("representation length must be at least 1, got {0}")]
    BadLength(usize),
    #[error("copy probability must lie in [0, 1]")]
    BadLambda,
    #[error("representation has length {got}, expected {want}")]
    BadRepresentationLength { got: usize, want: usize },
    #[error("letter {letter} out of range for alphabet size {q}")]
    LetterOutOfRange { letter: Letter, q: u16 },
    #[error("the pair-interaction model requires an even representation length, got {0}")]
    OddPairLength(usize),
    #[error("rewiring permutation for level {level} maps pair {pair} onto itself")]
    RewiringFixesPair { level: u32, pair: usize },
    #[error("expected one rewiring permutation per level ({want}), got {got}")]
    RewiringCount { got: usize, want: usize },
    #[error("rewiring permutation for level {0} is not a permutation of the positions")]
    RewiringInvalid(u32),
    #[error("adversarial edge-parameter list has length {got}, expected {want}")]
    AdversarialLength { got: usize, want: usize },
    #[error("adversarial regime requires caller-supplied edge parameters")]
    AdversarialMissing,
}

/// Check the rewiring condition: every output pair must draw from positions
/// other than its own, `{sigma(2i), sigma(2i+1)} != {2i, 2i+1}`.
pub fn rewiring_moves_pairs(sigma: &Perm) -> Result<(), usize> {
    let k = sigma.len();
    for i in 0..k / 2 {
        let (a, b) = (sigma.apply(2 * i as u32) as usize, sigma.apply(2 * i as u32 + 1) as usize);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if lo == 2 * i && hi == 2 * i + 1 {
            return Err(i);
        }
    }
    Ok(())
}

/// Draw a position rewiring satisfying [`rewiring_moves_pairs`] by rejection.
pub fn random_rewiring<R: Rng>(k: usize, rng: &mut R) -> Perm {
    loop {
        let p = Perm::random(k, rng);
        if rewiring_moves_pairs(&p).is_ok() {
            return p;
        }
    }
}

/// Full parameter set for one generative run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelParams {
    pub variant: ModelVariant,
    pub q: u16,
    pub k: usize,
    pub lambda: f64,
    pub regime: Regime,
    /// Position rewirings, one per level `1..=h`; required for FIM and
    /// known to inference.
    pub rewiring: Option<Vec<Perm>>,
    /// Adversarial per-edge alphabet permutations (VRM), level-major order.
    pub adversarial_perms: Option<Vec<Perm>>,
    /// Adversarial per-edge pair bijections (FIM), level-major order.
    pub adversarial_pair_perms: Option<Vec<PairPerm>>,
    pub seed: u64,
}

impl ModelParams {
    pub fn new(variant: ModelVariant, q: u16, k: usize, lambda: f64, seed: u64) -> Self {
        ModelParams {
            variant,
            q,
            k,
            lambda,
            regime: Regime::Random,
            rewiring: None,
            adversarial_perms: None,
            adversarial_pair_perms: None,
            seed,
        }
    }

    /// Validate against a concrete tree (edge counts, rewiring shape).
    pub fn validate(&self, tree: &crate::tree::TreeTopology) -> Result<(), ModelError> {
        if self.q < 2 || self.q > MAX_ALPHABET {
            return Err(ModelError::BadAlphabet(self.q));
        }
        if self.k == 0 {
            return Err(ModelError::BadLength(self.k));
        }
        if !(0.0..=1.0).contains(&self.lambda) || self.lambda.is_nan() {
            return Err(ModelError::BadLambda);
        }
        if self.variant == ModelVariant::Fim {
            if self.k % 2 != 0 {
                return Err(ModelError::OddPairLength(self.k));
            }
            let rew = self.rewiring.as_ref().ok_or(ModelError::RewiringCount {
                got: 0,
                want: tree.height() as usize,
            })?;
            if rew.len() != tree.height() as usize {
                return Err(ModelError::RewiringCount { got: rew.len(), want: tree.height() as usize });
            }
            for (i, sigma) in rew.iter().enumerate() {
                let level = i as u32 + 1;
                if sigma.len() != self.k || !sigma.is_valid() {
                    return Err(ModelError::RewiringInvalid(level));
                }
                if let Err(pair) = rewiring_moves_pairs(sigma) {
                    return Err(ModelError::RewiringFixesPair { level, pair });
                }
            }
        }
        if self.regime == Regime::Adversarial {
            let edges = (tree.total_nodes() - 1) as usize;
            match self.variant {
                ModelVariant::Iidm => {}
                ModelVariant::Vrm => {
                    let list = self.adversarial_perms.as_ref().ok_or(ModelError::AdversarialMissing)?;
                    if list.len() != edges {
                        return Err(ModelError::AdversarialLength { got: list.len(), want: edges });
                    }
                }
                ModelVariant::Fim => {
                    let list =
                        self.adversarial_pair_perms.as_ref().ok_or(ModelError::AdversarialMissing)?;
                    if list.len() != edges {
                        return Err(ModelError::AdversarialLength { got: list.len(), want: edges });
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perm_compose_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = Perm::random(7, &mut rng);
        assert!(p.is_valid());
        let id = p.compose(&p.inverse());
        assert_eq!(id, Perm::identity(7));
    }

    #[test]
    fn pair_perm_components_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = PairPerm::random(3, &mut rng);
        assert!(t.is_valid());
        let inv = t.inverse();
        for x in 0..9u16 {
            assert_eq!(inv.apply(t.apply(x)), x);
            let (a, b) = PairPerm::decode(3, x);
            assert_eq!(t.apply(x), PairPerm::encode(3, t.f(a, b), t.g(a, b)));
        }
    }

    #[test]
    fn rewiring_condition_detects_fixed_pair() {
        // Identity fixes every pair.
        assert_eq!(rewiring_moves_pairs(&Perm::identity(4)), Err(0));
        // Swapping the two pairs wholesale moves both.
        let sigma = Perm(vec![2, 3, 0, 1]);
        assert!(rewiring_moves_pairs(&sigma).is_ok());
        // Swapping within a pair still occupies the same slot set.
        let sigma = Perm(vec![1, 0, 2, 3]);
        assert_eq!(rewiring_moves_pairs(&sigma), Err(0));
    }

    #[test]
    fn random_rewiring_always_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let p = random_rewiring(6, &mut rng);
            assert!(rewiring_moves_pairs(&p).is_ok());
        }
    }

    #[test]
    fn params_validation() {
        let tree = crate::tree::build_tree(2, 3).unwrap();
        let mut p = ModelParams::new(ModelVariant::Fim, 3, 5, 0.9, 1);
        assert_eq!(p.validate(&tree), Err(ModelError::OddPairLength(5)));
        p.k = 4;
        assert!(matches!(p.validate(&tree), Err(ModelError::RewiringCount { .. })));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        p.rewiring = Some((0..3).map(|_| random_rewiring(4, &mut rng)).collect());
        assert_eq!(p.validate(&tree), Ok(()));
    }

    #[test]
    fn representation_checks() {
        assert!(Representation::checked(vec![0, 1, 2], 3, 3).is_ok());
        assert!(Representation::checked(vec![0, 3], 3, 2).is_err());
        assert!(Representation::checked(vec![0], 3, 2).is_err());
    }
}
