//! Domain types, validation and permutation enumeration.

use crate::error::{invalid, Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Complex evaluation point.
pub type ComplexPoint = Complex64;

/// Default cap on the size of permutation groups that may be summed over.
pub const DEFAULT_FACTORIAL_CAP: usize = 9;

/// A finite particle configuration on Z.
///
/// Positions are strictly increasing. Each particle carries a colour in `1..=r`;
/// in the two-species view colour 2 is "type 2" and colour 1 is "type 1".
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParticleConfig {
    positions: Vec<i64>,
    species: Vec<u8>,
}

impl ParticleConfig {
    /// Coloured configuration from sorted positions and per-particle colours.
    pub fn new(positions: Vec<i64>, species: Vec<u8>) -> Result<Self> {
        if positions.len() != species.len() {
            return Err(Error::DimensionMismatch { expected: positions.len(), got: species.len() });
        }
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return invalid(format!("positions must be strictly increasing: {positions:?}"));
        }
        if species.iter().any(|&c| c == 0) {
            return invalid("colours start at 1");
        }
        Ok(Self { positions, species })
    }

    /// Two-species configuration: particle `i` (1-based) is type 2 iff `i` is in `type2`.
    pub fn two_species(positions: Vec<i64>, type2: &[usize]) -> Result<Self> {
        let n = positions.len();
        if type2.windows(2).any(|w| w[0] >= w[1]) {
            return invalid(format!("type-2 index set must be strictly increasing: {type2:?}"));
        }
        if type2.iter().any(|&i| i == 0 || i > n) {
            return invalid(format!("type-2 index set {type2:?} not inside 1..={n}"));
        }
        let mut species = vec![1u8; n];
        for &i in type2 {
            species[i - 1] = 2;
        }
        Self::new(positions, species)
    }

    /// Rainbow configuration: colour `i` sits at `colour_positions[i-1]`.
    pub fn from_colour_positions(colour_positions: &[i64]) -> Result<Self> {
        let mut pairs: Vec<(i64, u8)> = Vec::with_capacity(colour_positions.len());
        for (i, &x) in colour_positions.iter().enumerate() {
            let c = u8::try_from(i + 1).map_err(|_| Error::Overflow("colour label".into()))?;
            pairs.push((x, c));
        }
        pairs.sort();
        Self::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
    }

    /// Configuration whose block `k` (1-based) carries colour `k`.
    pub fn from_blocks(blocks: &BlockSignatureVector) -> Result<Self> {
        let mut pairs = Vec::new();
        for (k, b) in blocks.blocks().iter().enumerate() {
            let c = u8::try_from(k + 1).map_err(|_| Error::Overflow("colour label".into()))?;
            pairs.extend(b.parts().iter().map(|&x| (x, c)));
        }
        pairs.sort();
        Self::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
    }

    pub fn positions(&self) -> &[i64] {
        &self.positions
    }

    pub fn species(&self) -> &[u8] {
        &self.species
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    /// Number of distinct colours used (largest label).
    pub fn colours(&self) -> u8 {
        self.species.iter().copied().max().unwrap_or(0)
    }

    /// 1-based indices of type-2 particles.
    pub fn type2_indices(&self) -> Vec<usize> {
        self.species.iter().enumerate().filter(|(_, &c)| c == 2).map(|(i, _)| i + 1).collect()
    }

    /// Number of type-2 particles.
    pub fn m(&self) -> usize {
        self.species.iter().filter(|&&c| c == 2).count()
    }

    /// Positions of each colour, colour-major: entry `k-1` lists colour `k` sites increasingly.
    pub fn colour_sites(&self) -> Vec<Vec<i64>> {
        let r = self.colours() as usize;
        let mut out = vec![Vec::new(); r];
        for (&x, &c) in self.positions.iter().zip(&self.species) {
            out[c as usize - 1].push(x);
        }
        out
    }

    /// Translate every particle by `k`.
    pub fn shifted(&self, k: i64) -> Result<Self> {
        let positions = self
            .positions
            .iter()
            .map(|&x| x.checked_add(k).ok_or_else(|| Error::Overflow("shifting positions".into())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { positions, species: self.species.clone() })
    }
}

/// Strictly decreasing integer vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StrictSignature(Vec<i64>);

impl StrictSignature {
    pub fn new(parts: Vec<i64>) -> Result<Self> {
        if parts.windows(2).any(|w| w[0] <= w[1]) {
            return invalid(format!("signature must be strictly decreasing: {parts:?}"));
        }
        Ok(Self(parts))
    }

    pub fn parts(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Whether the blocks describe the initial or the final state of a crossing event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Block `i` lies entirely to the right of block `j` whenever `i < j`.
    Initial,
    /// Block `i` lies entirely to the left of block `j` whenever `i < j`.
    Final,
}

/// An ordered list of strict signatures, one per colour block.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockSignatureVector {
    blocks: Vec<StrictSignature>,
    orientation: Orientation,
}

impl BlockSignatureVector {
    pub fn new(blocks: Vec<Vec<i64>>, orientation: Orientation) -> Result<Self> {
        if blocks.iter().any(Vec::is_empty) {
            return invalid("blocks must be non-empty");
        }
        let blocks = blocks.into_iter().map(StrictSignature::new).collect::<Result<Vec<_>>>()?;
        for w in blocks.windows(2) {
            let (a, b) = (w[0].parts(), w[1].parts());
            let ok = match orientation {
                Orientation::Initial => a[a.len() - 1] > b[0],
                Orientation::Final => a[0] < b[b.len() - 1],
            };
            if !ok {
                return invalid(format!("blocks {a:?} and {b:?} violate {orientation:?} ordering"));
            }
        }
        Ok(Self { blocks, orientation })
    }

    pub fn blocks(&self) -> &[StrictSignature] {
        &self.blocks
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Block sizes `(n_1, ..., n_r)`.
    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(StrictSignature::len).collect()
    }

    pub fn n(&self) -> usize {
        self.blocks.iter().map(StrictSignature::len).sum()
    }

    /// Offsets `N_k = n_1 + ... + n_{k-1}`.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.blocks
            .iter()
            .map(|b| {
                let o = acc;
                acc += b.len();
                o
            })
            .collect()
    }

    /// All parts concatenated block by block.
    pub fn flat(&self) -> Vec<i64> {
        self.blocks.iter().flat_map(|b| b.parts().iter().copied()).collect()
    }
}

/// Integer vector without ordering constraints.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntegerComposition {
    parts: Vec<i64>,
    strict: bool,
}

impl IntegerComposition {
    pub fn new(parts: Vec<i64>) -> Self {
        Self { parts, strict: false }
    }

    /// Composition with pairwise distinct parts.
    pub fn strict(parts: Vec<i64>) -> Result<Self> {
        let mut sorted = parts.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return invalid(format!("parts must be pairwise distinct: {parts:?}"));
        }
        Ok(Self { parts, strict: true })
    }

    pub fn parts(&self) -> &[i64] {
        &self.parts
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    /// Weakly increasing.
    pub fn is_anti_dominant(&self) -> bool {
        self.parts.windows(2).all(|w| w[0] <= w[1])
    }

    /// Weakly decreasing.
    pub fn is_dominant(&self) -> bool {
        self.parts.windows(2).all(|w| w[0] >= w[1])
    }
}

/// Model and evaluation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub q: f64,
    pub s: ComplexPoint,
    pub rho: f64,
    pub t: f64,
    pub ell: u32,
    pub epsilon: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { q: 0.0, s: ComplexPoint::new(0.0, 0.0), rho: 1.0, t: 0.0, ell: 0, epsilon: 1.0 }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 0.0 && self.q.is_finite()) {
            return invalid(format!("q must be finite and nonnegative, got {}", self.q));
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return invalid(format!("t must be finite and nonnegative, got {}", self.t));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return invalid(format!("rho must lie in (0,1], got {}", self.rho));
        }
        if !(self.epsilon > 0.0) {
            return invalid(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.s.re.is_finite() && self.s.im.is_finite()) {
            return invalid("s must be finite");
        }
        Ok(())
    }
}

/// True iff `nu` is reachable from `mu` in the standard regime ordering.
pub fn validate_standard_regime(mu: &ParticleConfig, nu: &ParticleConfig) -> Result<bool> {
    if mu.n() != nu.n() {
        return Err(Error::DimensionMismatch { expected: mu.n(), got: nu.n() });
    }
    let (p0, p) = (mu.type2_indices(), nu.type2_indices());
    if p0.len() != p.len() {
        return Err(Error::DimensionMismatch { expected: p0.len(), got: p.len() });
    }
    Ok(mu.positions().iter().zip(nu.positions()).all(|(a, b)| b >= a)
        && p0.iter().zip(&p).all(|(a, b)| b >= a))
}

/// Predicate: does `nu` show the blocks of `mu` in fully reversed order?
pub fn crossing_configs(mu: &BlockSignatureVector) -> impl Fn(&ParticleConfig) -> bool {
    let sizes = mu.sizes();
    move |nu: &ParticleConfig| {
        let mut expected = Vec::with_capacity(nu.n());
        for (k, &nk) in sizes.iter().enumerate() {
            expected.extend(std::iter::repeat((k + 1) as u8).take(nk));
        }
        nu.species() == expected.as_slice()
    }
}

/// All permutations of `0..n` with their signs, in lexicographic order.
pub fn enumerate_permutations(n: usize) -> Result<Vec<(Vec<usize>, i8)>> {
    enumerate_permutations_capped(n, DEFAULT_FACTORIAL_CAP)
}

pub fn enumerate_permutations_capped(n: usize, cap: usize) -> Result<Vec<(Vec<usize>, i8)>> {
    if n > cap {
        return Err(Error::ResourceLimit { what: format!("permutation group of size {n}!"), cap: cap as u64 });
    }
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        out.push((perm.clone(), permutation_sign(&perm)));
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(out)
}

fn next_permutation(p: &mut [usize]) -> bool {
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

/// Sign of a permutation of `0..n` from its cycle decomposition.
pub fn permutation_sign(p: &[usize]) -> i8 {
    let mut seen = vec![false; p.len()];
    let mut sign = 1i8;
    for start in 0..p.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut k = start;
        while !seen[k] {
            seen[k] = true;
            k = p[k];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// All distinct rearrangements of `parts`.
pub fn distinct_rearrangements(parts: &[i64]) -> Vec<Vec<i64>> {
    let mut v = parts.to_vec();
    v.sort_unstable();
    let mut out = Vec::new();
    loop {
        out.push(v.clone());
        let mut i = v.len();
        if i < 2 {
            break;
        }
        i -= 1;
        while i > 0 && v[i - 1] >= v[i] {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        let mut j = v.len() - 1;
        while v[j] <= v[i - 1] {
            j -= 1;
        }
        v.swap(i - 1, j);
        v[i..].reverse();
    }
    out
}

/// Determinant by partial-pivot Gaussian elimination.
pub fn determinant(mut a: Vec<Vec<ComplexPoint>>) -> ComplexPoint {
    let n = a.len();
    let mut det = ComplexPoint::new(1.0, 0.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm())).unwrap();
        if a[piv][col].norm() == 0.0 {
            return ComplexPoint::new(0.0, 0.0);
        }
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                let v = a[col][c];
                a[r][c] -= f * v;
            }
        }
    }
    det
}

/// Compensated complex summation in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: ComplexPoint,
    comp: ComplexPoint,
}

impl KahanSum {
    pub fn add(&mut self, x: ComplexPoint) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> ComplexPoint {
        self.sum
    }
}

/// Reject evaluation points that (nearly) coincide.
pub fn check_separated(points: &[ComplexPoint], min_sep: f64) -> Result<()> {
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if (points[i] - points[j]).norm() < min_sep {
                return Err(Error::Pole(format!("points {i} and {j} closer than {min_sep:e}")));
            }
        }
    }
    Ok(())
}

/// q-Pochhammer symbol `(a; q)_k`.
pub fn q_pochhammer(a: ComplexPoint, q: f64, k: usize) -> ComplexPoint {
    (0..k).fold(ComplexPoint::new(1.0, 0.0), |acc, i| acc * (1.0 - a * q.powi(i as i32)))
}

/// Multiplicities of equal values in `parts`, in increasing order of value.
pub fn multiplicities(parts: &[i64]) -> Vec<usize> {
    let mut v = parts.to_vec();
    v.sort_unstable();
    let mut out = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j < v.len() && v[j] == v[i] {
            j += 1;
        }
        out.push(j - i);
        i = j;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn standard_regime_examples() {
        let mu = ParticleConfig::two_species(vec![0, 1], &[1]).unwrap();
        let nu = ParticleConfig::two_species(vec![0, 1], &[1]).unwrap();
        assert!(validate_standard_regime(&mu, &nu).unwrap());
        let nu = ParticleConfig::two_species(vec![-1, 1], &[1]).unwrap();
        assert!(!validate_standard_regime(&mu, &nu).unwrap());
        let mu = ParticleConfig::two_species(vec![0, 1, 2], &[1]).unwrap();
        let nu = ParticleConfig::two_species(vec![1, 2, 5], &[2]).unwrap();
        assert!(validate_standard_regime(&mu, &nu).unwrap());
        let short = ParticleConfig::two_species(vec![0], &[]).unwrap();
        assert!(validate_standard_regime(&mu, &short).is_err());
    }

    #[test]
    fn permutation_examples() {
        assert_eq!(enumerate_permutations(1).unwrap(), vec![(vec![0], 1)]);
        let p2 = enumerate_permutations(2).unwrap();
        assert_eq!(p2, vec![(vec![0, 1], 1), (vec![1, 0], -1)]);
        let p3 = enumerate_permutations(3).unwrap();
        assert_eq!(p3.len(), 6);
        assert_eq!(p3.iter().map(|p| p.1 as i32).sum::<i32>(), 0);
        assert!(matches!(enumerate_permutations(10), Err(Error::ResourceLimit { cap: 9, .. })));
    }

    #[test]
    fn sign_matches_inversion_parity() {
        for n in 0..=6 {
            let perms = enumerate_permutations(n).unwrap();
            let expected: usize = (1..=n).product();
            assert_eq!(perms.len(), expected);
            let mut uniq = perms.iter().map(|p| p.0.clone()).collect::<Vec<_>>();
            uniq.dedup();
            assert_eq!(uniq.len(), expected);
            for (p, s) in perms {
                let inv = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
                assert_eq!(s, if inv % 2 == 0 { 1 } else { -1 });
            }
        }
    }

    #[test]
    fn crossing_predicate() {
        let mu = BlockSignatureVector::new(vec![vec![0], vec![-1]], Orientation::Initial).unwrap();
        let pred = crossing_configs(&mu);
        let good = ParticleConfig::new(vec![3, 5], vec![1, 2]).unwrap();
        let bad = ParticleConfig::new(vec![3, 5], vec![2, 1]).unwrap();
        assert!(pred(&good));
        assert!(!pred(&bad));
        let single = BlockSignatureVector::new(vec![vec![3, 1]], Orientation::Initial).unwrap();
        let pred = crossing_configs(&single);
        assert!(pred(&ParticleConfig::new(vec![-2, 7], vec![1, 1]).unwrap()));
    }

    #[test]
    fn block_orientation_rejected() {
        assert!(BlockSignatureVector::new(vec![vec![0], vec![1]], Orientation::Initial).is_err());
        assert!(BlockSignatureVector::new(vec![vec![0], vec![1]], Orientation::Final).is_ok());
        assert!(BlockSignatureVector::new(vec![vec![1, 1]], Orientation::Final).is_err());
    }

    #[test]
    fn rearrangements_count() {
        assert_eq!(distinct_rearrangements(&[2, 1, 1]).len(), 3);
        assert_eq!(distinct_rearrangements(&[3, 2, 1]).len(), 6);
        assert_eq!(multiplicities(&[2, 1, 1, 5]), vec![2, 1, 1]);
    }

    #[test]
    fn determinant_small() {
        let c = |x: f64| ComplexPoint::new(x, 0.0);
        let d = determinant(vec![vec![c(1.0), c(2.0)], vec![c(3.0), c(4.0)]]);
        assert!((d - c(-2.0)).norm() < 1e-14);
    }

    proptest! {
        #[test]
        fn config_constructor_accepts_iff_strict(v in proptest::collection::vec(-20i64..20, 0..6)) {
            let strict = v.windows(2).all(|w| w[0] < w[1]);
            let species = vec![1u8; v.len()];
            prop_assert_eq!(ParticleConfig::new(v.clone(), species).is_ok(), strict);
            prop_assert_eq!(StrictSignature::new(v.iter().rev().copied().collect()).is_ok(), strict);
        }

        #[test]
        fn type2_roundtrip(n in 1usize..7, mask in 0u32..128) {
            let p: Vec<usize> = (1..=n).filter(|i| mask & (1 << (i - 1)) != 0).collect();
            let cfg = ParticleConfig::two_species((0..n as i64).collect(), &p).unwrap();
            prop_assert_eq!(cfg.type2_indices(), p.clone());
            prop_assert_eq!(cfg.m(), p.len());
        }

        #[test]
        fn shift_overflow_checked(x in proptest::num::i64::ANY) {
            let cfg = ParticleConfig::new(vec![x], vec![1]).unwrap();
            prop_assert_eq!(cfg.shifted(1).is_ok(), x.checked_add(1).is_some());
        }
    }
}
