//! Fixed-length feature subsets and the two neighborhood operators.
//!
//! Bit `i` set means feature `i + 1` is included. Search states always have
//! `1 <= k <= n - 1` selected features; evaluation also accepts the full set.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WORD: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FeatureSubset {
    n: usize,
    k: usize,
    words: Vec<u64>,
}

impl FeatureSubset {
    pub fn empty(n: usize) -> Self {
        FeatureSubset {
            n,
            k: 0,
            words: vec![0; n.div_ceil(WORD)],
        }
    }

    pub fn all(n: usize) -> Self {
        let mut s = Self::empty(n);
        for i in 0..n {
            s.set(i, true);
        }
        s
    }

    /// Builds a subset from 0-based feature indices.
    pub fn from_indices(n: usize, indices: &[usize]) -> Result<Self> {
        let mut s = Self::empty(n);
        for &i in indices {
            if i >= n {
                return Err(Error::SubsetEncoding(format!(
                    "index {i} out of range for n={n}"
                )));
            }
            s.set(i, true);
        }
        Ok(s)
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut s = Self::empty(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            s.set(i, b);
        }
        s
    }

    /// Parses a `0`/`1` string, index 0 first (e.g. `"110"`).
    pub fn from_bit_str(bits: &str) -> Result<Self> {
        let parsed: Result<Vec<bool>> = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::SubsetEncoding(format!("unexpected bit {other:?}"))),
            })
            .collect();
        Ok(Self::from_bits(&parsed?))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of selected features.
    pub fn count(&self) -> usize {
        self.k
    }

    pub fn contains(&self, i: usize) -> bool {
        debug_assert!(i < self.n);
        self.words[i / WORD] >> (i % WORD) & 1 == 1
    }

    fn set(&mut self, i: usize, value: bool) {
        let was = self.contains(i);
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
        match (was, value) {
            (false, true) => self.k += 1,
            (true, false) => self.k -= 1,
            _ => {}
        }
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.n).map(move |i| self.contains(i))
    }

    /// Selected 0-based indices in ascending order.
    pub fn ones(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.contains(i)).collect()
    }

    pub fn zeros(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| !self.contains(i)).collect()
    }

    pub fn hamming(&self, other: &Self) -> usize {
        assert_eq!(self.n, other.n);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    pub fn to_bit_string(&self) -> String {
        self.bits().map(|b| if b { '1' } else { '0' }).collect()
    }

    /// Lowercase hex of the bit array read MSB-first (bit 0 is the most
    /// significant), zero-padded to `ceil(n / 4)` digits.
    pub fn to_hex(&self) -> String {
        let digits = self.n.div_ceil(4);
        let pad = digits * 4 - self.n;
        let padded: Vec<bool> = std::iter::repeat_n(false, pad).chain(self.bits()).collect();
        padded
            .chunks(4)
            .map(|nib| {
                let v = nib.iter().fold(0u32, |acc, &b| acc << 1 | b as u32);
                char::from_digit(v, 16).expect("nibble < 16")
            })
            .collect()
    }

    pub fn from_hex(n: usize, hex: &str) -> Result<Self> {
        let digits = n.div_ceil(4);
        let hex = hex.trim();
        if hex.len() != digits {
            return Err(Error::SubsetEncoding(format!(
                "expected {digits} hex digits for n={n}, found {:?}",
                hex
            )));
        }
        let mut padded = Vec::with_capacity(digits * 4);
        for c in hex.chars() {
            let v = c
                .to_digit(16)
                .ok_or_else(|| Error::SubsetEncoding(format!("bad hex digit {c:?}")))?;
            padded.extend((0..4).rev().map(|s| v >> s & 1 == 1));
        }
        let pad = digits * 4 - n;
        if padded[..pad].iter().any(|&b| b) {
            return Err(Error::SubsetEncoding(format!(
                "{hex:?} sets bits beyond n={n}"
            )));
        }
        Ok(Self::from_bits(&padded[pad..]))
    }

    fn check_search_state(&self) {
        assert!(
            self.k >= 1 && self.k < self.n,
            "search state needs 1 <= k <= n-1, got k={} n={}",
            self.k,
            self.n
        );
    }
}

impl Ord for FeatureSubset {
    /// Length first, then lexicographic over the bit string (index 0 first).
    fn cmp(&self, other: &Self) -> Ordering {
        self.n
            .cmp(&other.n)
            .then_with(|| self.bits().cmp(other.bits()))
    }
}

impl PartialOrd for FeatureSubset {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for FeatureSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FeatureSubset({})", self.to_bit_string())
    }
}

impl fmt::Display for FeatureSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for FeatureSubset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}:{}", self.n, self.to_hex()))
    }
}

impl<'de> Deserialize<'de> for FeatureSubset {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        let (n, hex) = raw
            .split_once(':')
            .ok_or_else(|| serde::de::Error::custom("expected <n>:<hex>"))?;
        let n: usize = n.parse().map_err(serde::de::Error::custom)?;
        FeatureSubset::from_hex(n, hex).map_err(serde::de::Error::custom)
    }
}

/// Uniformly random `k`-subset of `n` features.
pub fn random_subset<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<FeatureSubset> {
    if k == 0 || k >= n {
        return Err(Error::SubsetSize { n, k });
    }
    let picked = index::sample(rng, n, k).into_vec();
    FeatureSubset::from_indices(n, &picked)
}

/// Clears one random selected bit and sets one random clear bit.
pub fn swap_neighbor<R: Rng + ?Sized>(state: &FeatureSubset, rng: &mut R) -> FeatureSubset {
    state.check_search_state();
    let ones = state.ones();
    let zeros = state.zeros();
    let one = ones[rng.gen_range(0..ones.len())];
    let zero = zeros[rng.gen_range(0..zeros.len())];
    swap_move(state, one, zero)
}

pub fn swap_move(state: &FeatureSubset, one: usize, zero: usize) -> FeatureSubset {
    debug_assert!(state.contains(one) && !state.contains(zero));
    let mut next = state.clone();
    next.set(one, false);
    next.set(zero, true);
    next
}

/// Moves the bit at `from` to position `to`, shifting the bits in between by
/// one toward `from`: a right rotation of `[to..=from]` when `to < from`, a
/// left rotation of `[from..=to]` otherwise.
pub fn insertion_move(state: &FeatureSubset, to: usize, from: usize) -> FeatureSubset {
    let mut bits: Vec<bool> = state.bits().collect();
    if to < from {
        bits[to..=from].rotate_right(1);
    } else if from < to {
        bits[from..=to].rotate_left(1);
    }
    FeatureSubset::from_bits(&bits)
}

/// Draws two distinct positions uniformly and applies [`insertion_move`].
/// Returns the positions as `(to, from)` along with the neighbor.
pub fn insertion_neighbor_with_positions<R: Rng + ?Sized>(
    state: &FeatureSubset,
    rng: &mut R,
) -> (FeatureSubset, usize, usize) {
    let n = state.len();
    assert!(n >= 2, "insertion needs at least two positions");
    let to = rng.gen_range(0..n);
    let from = loop {
        let j = rng.gen_range(0..n);
        if j != to {
            break j;
        }
    };
    (insertion_move(state, to, from), to, from)
}

pub fn insertion_neighbor<R: Rng + ?Sized>(state: &FeatureSubset, rng: &mut R) -> FeatureSubset {
    insertion_neighbor_with_positions(state, rng).0
}

/// All swap neighbors: for each selected index (ascending), each clear index
/// (ascending). Exactly `k * (n - k)` distinct subsets.
pub fn enumerate_swap_neighbors(state: &FeatureSubset) -> Vec<FeatureSubset> {
    state.check_search_state();
    let zeros = state.zeros();
    state
        .ones()
        .into_iter()
        .flat_map(|one| zeros.iter().map(move |&zero| swap_move(state, one, zero)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborhoodKind {
    Swap,
    Insertion,
}

impl NeighborhoodKind {
    pub fn neighbor<R: Rng + ?Sized>(self, state: &FeatureSubset, rng: &mut R) -> FeatureSubset {
        match self {
            NeighborhoodKind::Swap => swap_neighbor(state, rng),
            NeighborhoodKind::Insertion => insertion_neighbor(state, rng),
        }
    }

    /// Table-style tag: `n1` for swap, `n2` for insertion.
    pub fn tag(self) -> &'static str {
        match self {
            NeighborhoodKind::Swap => "n1",
            NeighborhoodKind::Insertion => "n2",
        }
    }
}

impl fmt::Display for NeighborhoodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NeighborhoodKind::Swap => "swap",
            NeighborhoodKind::Insertion => "insertion",
        })
    }
}

impl FromStr for NeighborhoodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "swap" | "n1" => Ok(NeighborhoodKind::Swap),
            "insertion" | "n2" => Ok(NeighborhoodKind::Insertion),
            other => Err(Error::Config(format!("unknown neighborhood {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::run_rng;
    use std::collections::BTreeSet;

    fn s(bits: &str) -> FeatureSubset {
        FeatureSubset::from_bit_str(bits).unwrap()
    }

    #[test]
    fn random_subset_rejects_bad_k() {
        let mut rng = run_rng(1);
        assert!(matches!(
            random_subset(5, 5, &mut rng),
            Err(Error::SubsetSize { .. })
        ));
        assert!(matches!(
            random_subset(5, 0, &mut rng),
            Err(Error::SubsetSize { .. })
        ));
    }

    #[test]
    fn random_subset_deterministic() {
        let a = random_subset(46, 10, &mut run_rng(42)).unwrap();
        let b = random_subset(46, 10, &mut run_rng(42)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.count(), 10);
    }

    #[test]
    fn random_subset_n2_is_fair() {
        let mut rng = run_rng(9);
        let draws = 10_000;
        let first = (0..draws)
            .filter(|_| random_subset(2, 1, &mut rng).unwrap().contains(0))
            .count();
        let freq = first as f64 / draws as f64;
        assert!((freq - 0.5).abs() <= 0.02, "frequency {freq}");
    }

    #[test]
    fn swap_forced_and_enumerated() {
        let mut rng = run_rng(3);
        assert_eq!(swap_neighbor(&s("10"), &mut rng), s("01"));

        // brute-force oracle: every (one, zero) pair flipped by hand
        let state = s("110");
        let mut oracle = BTreeSet::new();
        for one in [0usize, 1] {
            let mut bits: Vec<bool> = state.bits().collect();
            bits[one] = false;
            bits[2] = true;
            oracle.insert(FeatureSubset::from_bits(&bits));
        }
        let enumerated: BTreeSet<_> = enumerate_swap_neighbors(&state).into_iter().collect();
        assert_eq!(enumerated, oracle);
        assert_eq!(enumerated, [s("011"), s("101")].into_iter().collect());
        for _ in 0..50 {
            assert!(oracle.contains(&swap_neighbor(&state, &mut rng)));
        }
    }

    #[test]
    fn enumeration_sizes() {
        let n3: BTreeSet<_> = enumerate_swap_neighbors(&s("100")).into_iter().collect();
        assert_eq!(n3, [s("010"), s("001")].into_iter().collect());
        assert_eq!(enumerate_swap_neighbors(&s("1010")).len(), 4);
        assert_eq!(enumerate_swap_neighbors(&s("0110")).len(), 4);
        assert_eq!(enumerate_swap_neighbors(&s("01")).len(), 1);
    }

    #[test]
    fn insertion_examples() {
        assert_eq!(insertion_move(&s("1001"), 0, 3), s("1100"));
        assert_eq!(insertion_move(&s("1001"), 3, 0), s("0011"));
        assert_eq!(insertion_move(&s("100011"), 1, 3), s("100011"));
        assert_eq!(insertion_move(&s("0110"), 1, 2), s("0110"));
    }

    #[test]
    fn hex_encoding() {
        assert_eq!(s("110").to_hex(), "6");
        assert_eq!(s("10000").to_hex(), "10");
        assert_eq!(s("1111").to_hex(), "f");
        assert_eq!(s("000000001").to_hex(), "001");
        let x = s("1011001110001");
        assert_eq!(FeatureSubset::from_hex(13, &x.to_hex()).unwrap(), x);
        assert!(FeatureSubset::from_hex(3, "8").is_err());
        assert!(FeatureSubset::from_hex(3, "06").is_err());
        assert!(FeatureSubset::from_hex(4, "g").is_err());
    }

    #[test]
    fn ordering_is_lexicographic_over_bits() {
        assert!(s("0110") < s("1000"));
        assert!(s("0011") < s("0101"));
    }

    #[test]
    fn serde_round_trip() {
        let x = s("0100110");
        let json = serde_json::to_string(&x).unwrap();
        assert_eq!(json, "\"7:26\"");
        assert_eq!(serde_json::from_str::<FeatureSubset>(&json).unwrap(), x);
    }
}
