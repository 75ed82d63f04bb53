//! Closed-form subset objective used as a trainer-free test oracle.
//!
//! `score(S) = clamp01((sum_{i in S} u_i - sum_{i<j in S} r_ij) / sum_i u_i)`

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subset::FeatureSubset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub utilities: Vec<f64>,
    /// Pairwise redundancy penalties `(i, j, r_ij)`, 0-based, `i != j`.
    pub redundancy: Vec<(usize, usize, f64)>,
}

impl Landscape {
    pub fn new(utilities: Vec<f64>, redundancy: Vec<(usize, usize, f64)>) -> Result<Self> {
        let n = utilities.len();
        if n < 2 {
            return Err(Error::Config(
                "landscape needs at least two features".into(),
            ));
        }
        if utilities.iter().any(|&u| !(u.is_finite() && u >= 0.0)) {
            return Err(Error::Config(
                "utilities must be finite and non-negative".into(),
            ));
        }
        if utilities.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("total utility must be positive".into()));
        }
        for &(i, j, r) in &redundancy {
            if i >= n || j >= n || i == j {
                return Err(Error::Config(format!("bad redundancy pair ({i}, {j})")));
            }
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::Config(format!(
                    "redundancy ({i}, {j}) must be non-negative"
                )));
            }
        }
        Ok(Landscape {
            utilities,
            redundancy,
        })
    }

    pub fn n_features(&self) -> usize {
        self.utilities.len()
    }

    pub fn total_utility(&self) -> f64 {
        self.utilities.iter().sum()
    }

    pub fn score(&self, subset: &FeatureSubset) -> f64 {
        debug_assert_eq!(subset.len(), self.n_features());
        let gain: f64 = subset.ones().iter().map(|&i| self.utilities[i]).sum();
        let penalty: f64 = self
            .redundancy
            .iter()
            .filter(|&&(i, j, _)| subset.contains(i) && subset.contains(j))
            .map(|&(_, _, r)| r)
            .sum();
        ((gain - penalty) / self.total_utility()).clamp(0.0, 1.0)
    }
}

impl Landscape {
    /// n=12 landscape whose k=4 optimum sits behind a plateau.
    ///
    /// Features 0..4 carry utility 1 and 4..8 are exact clones of them (a
    /// feature plus its clone adds nothing), so sixteen subsets share the
    /// optimum. Features 8..12 (utility 0.55) overlap 2, 3 and their clones
    /// by 0.45 each: a state holding two of them next to 0 and 1 is a strict
    /// local optimum for hill climbing whose only exits are neutral moves.
    pub fn plateau_trap() -> Landscape {
        let shelf = 0.55;
        let mut utilities = vec![1.0; 8];
        let mut redundancy: Vec<(usize, usize, f64)> = (0..4).map(|i| (i, i + 4, 1.0)).collect();
        for x in 8..12 {
            utilities.push(shelf);
            for s in [2, 3, 6, 7] {
                redundancy.push((s, x, 1.0 - shelf));
            }
        }
        Landscape::new(utilities, redundancy).expect("valid fixture")
    }

    /// n=12 landscape with two k=4 basins: graded features 0..4 (the global
    /// optimum) and a flat runner-up block 4..8 that overlaps it, plus a
    /// mid-utility filler block 8..12 the search can drift around in.
    pub fn two_basin() -> Landscape {
        let runner_up = 0.6;
        let mut utilities = vec![1.0, 0.9, 0.8, 0.7];
        utilities.extend([runner_up; 4]);
        utilities.extend([0.5; 4]);
        let mut redundancy = Vec::new();
        for i in 0..4 {
            for j in 4..8 {
                redundancy.push((i, j, 0.5 * runner_up));
            }
        }
        Landscape::new(utilities, redundancy).expect("valid fixture")
    }

    /// Best score over all `C(n, k)` subsets and every subset attaining it
    /// (within 1e-12), in lexicographic index order.
    pub fn exhaustive_optimum(&self, k: usize) -> (f64, Vec<FeatureSubset>) {
        let n = self.n_features();
        assert!(k <= n && n <= 30, "exhaustive enumeration is for small n");
        let mut best = f64::NEG_INFINITY;
        let mut argmax = Vec::new();
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let s = FeatureSubset::from_indices(n, &idx).expect("indices in range");
            let v = self.score(&s);
            if v > best + 1e-12 {
                best = v;
                argmax.clear();
            }
            if (v - best).abs() <= 1e-12 {
                argmax.push(s);
            }
            // next combination
            let Some(pos) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
                break;
            };
            idx[pos] += 1;
            for i in pos + 1..k {
                idx[i] = idx[i - 1] + 1;
            }
        }
        (best, argmax)
    }
}

/// Free-function form of [`Landscape::score`].
pub fn synthetic_objective(subset: &FeatureSubset, landscape: &Landscape) -> f64 {
    landscape.score(subset)
}
