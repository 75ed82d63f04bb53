//! Local beam search over fixed-size feature subsets.
//!
//! The pool holds the `q` best distinct states. Each step draws one neighbor
//! per pool member (or, in full-expansion mode, every neighbor); a candidate
//! that strictly beats the member it came from is merged into the pool, which
//! is then cut back to `q`.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{Evaluator, ScoreCard};
use crate::record::{RunRecord, TraceRow};
use crate::rng::run_rng;
use crate::subset::{
    enumerate_swap_neighbors, insertion_move, random_subset, FeatureSubset, NeighborhoodKind,
};

pub const DEFAULT_BEAM_WIDTH: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub width: usize,
    pub steps: usize,
    pub neighborhood: NeighborhoodKind,
    pub seed: u64,
    /// Expand every neighbor of every member instead of one random neighbor.
    pub full_expansion: bool,
}

impl BeamConfig {
    /// Steps chosen so `width * steps` covers `budget` evaluations.
    pub fn matched(budget: usize, width: usize, neighborhood: NeighborhoodKind, seed: u64) -> Self {
        BeamConfig {
            width,
            steps: budget.div_ceil(width.max(1)).max(1),
            neighborhood,
            seed,
            full_expansion: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub subset: FeatureSubset,
    pub card: ScoreCard,
    seq: u64,
}

impl PoolEntry {
    pub fn score(&self) -> f64 {
        self.card.guide_score
    }
}

/// Best-first pool of distinct states. Ties go to the earlier insertion,
/// then to the lexicographically smaller bit pattern.
#[derive(Debug, Clone)]
pub struct BeamPool {
    capacity: usize,
    entries: Vec<PoolEntry>,
    next_seq: u64,
}

impl BeamPool {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "beam width must be positive");
        BeamPool {
            capacity,
            entries: Vec::with_capacity(capacity + 1),
            next_seq: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn best(&self) -> Option<&PoolEntry> {
        self.entries.first()
    }

    pub fn contains(&self, subset: &FeatureSubset) -> bool {
        self.entries.iter().any(|e| &e.subset == subset)
    }

    fn order(a: &PoolEntry, b: &PoolEntry) -> Ordering {
        b.score()
            .total_cmp(&a.score())
            .then(a.seq.cmp(&b.seq))
            .then_with(|| a.subset.cmp(&b.subset))
    }

    /// Inserts unless the bit pattern is already pooled, re-sorts and
    /// truncates. Returns whether the candidate is in the pool afterwards.
    pub fn update(&mut self, subset: FeatureSubset, card: ScoreCard) -> bool {
        if self.contains(&subset) {
            return false;
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.entries.push(PoolEntry { subset, card, seq });
        self.entries.sort_by(Self::order);
        self.entries.truncate(self.capacity);
        self.entries.iter().any(|e| e.seq == seq)
    }
}

/// `C(n, k)`, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| {
        acc.saturating_mul((n - i) as u128) / (i as u128 + 1)
    })
}

/// Every distinct insertion neighbor other than the state itself.
pub fn enumerate_insertion_neighbors(state: &FeatureSubset) -> Vec<FeatureSubset> {
    let n = state.len();
    let mut out = BTreeSet::new();
    for to in 0..n {
        for from in 0..n {
            if to != from {
                let next = insertion_move(state, to, from);
                if &next != state {
                    out.insert(next);
                }
            }
        }
    }
    out.into_iter().collect()
}

pub fn beam_search(k: usize, evaluator: &Evaluator, cfg: &BeamConfig) -> Result<RunRecord> {
    let started = Instant::now();
    let n = evaluator.n_features();
    if k == 0 || k >= n {
        return Err(Error::SubsetSize { n, k });
    }
    if cfg.width == 0 || cfg.steps == 0 {
        return Err(Error::Config(
            "beam width and steps must be positive".into(),
        ));
    }
    if binomial(n, k) < cfg.width as u128 {
        return Err(Error::Config(format!(
            "beam width {} exceeds the {} subsets of size {k}",
            cfg.width,
            binomial(n, k)
        )));
    }

    let mut rng = run_rng(cfg.seed);
    let mut pool = BeamPool::new(cfg.width);
    let mut calls = 0usize;

    let mut initial = Vec::with_capacity(cfg.width);
    let mut drawn = BTreeSet::new();
    while initial.len() < cfg.width {
        let s = random_subset(n, k, &mut rng)?;
        if drawn.insert(s.clone()) {
            initial.push(s);
        }
    }
    let cards = score_all(evaluator, &initial)?;
    calls += initial.len();
    for (s, card) in initial.into_iter().zip(cards) {
        pool.update(s, card);
    }
    let initial_guide_score = pool.best().expect("pool seeded").score();

    let mut trace = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let parents: Vec<(FeatureSubset, f64)> = pool
            .entries()
            .iter()
            .map(|e| (e.subset.clone(), e.score()))
            .collect();
        let mut candidates = Vec::new();
        for (parent, parent_score) in &parents {
            if cfg.full_expansion {
                let all = match cfg.neighborhood {
                    NeighborhoodKind::Swap => enumerate_swap_neighbors(parent),
                    NeighborhoodKind::Insertion => enumerate_insertion_neighbors(parent),
                };
                candidates.extend(all.into_iter().map(|c| (c, *parent_score)));
            } else {
                candidates.push((cfg.neighborhood.neighbor(parent, &mut rng), *parent_score));
            }
        }
        let subsets: Vec<FeatureSubset> = candidates.iter().map(|(c, _)| c.clone()).collect();
        let cards = score_all(evaluator, &subsets)?;
        calls += subsets.len();

        let mut any = false;
        for ((candidate, parent_score), card) in candidates.into_iter().zip(cards) {
            if card.guide_score > parent_score {
                any |= pool.update(candidate, card);
            }
        }
        let best = pool.best().expect("pool nonempty").score();
        trace.push(TraceRow {
            iteration: step,
            temperature: None,
            current: best,
            best,
            accepted: any,
            restarted: false,
            acceptance_probability: None,
            uniform_draw: None,
        });
    }

    let best = pool.best().expect("pool nonempty");
    Ok(RunRecord {
        k,
        seed: cfg.seed,
        best_subset: best.subset.clone(),
        best_guide_score: best.card.guide_score,
        best_test_score: best.card.test_score,
        best_test_ndcg10: best.card.test_ndcg10,
        best_test_map: best.card.test_map,
        initial_guide_score,
        trace,
        evaluations_used: calls,
        evaluator_calls: calls,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// Scores independent candidates, possibly in parallel; output order
/// matches input order.
fn score_all(evaluator: &Evaluator, subsets: &[FeatureSubset]) -> Result<Vec<ScoreCard>> {
    subsets.par_iter().map(|s| evaluator.evaluate(s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    fn card(score: f64) -> ScoreCard {
        ScoreCard {
            guide_score: score,
            test_score: score,
            test_ndcg10: score,
            test_map: score,
            per_query: None,
            train_time: Duration::ZERO,
        }
    }

    fn s(bits: &str) -> FeatureSubset {
        FeatureSubset::from_bit_str(bits).unwrap()
    }

    fn full_pool() -> BeamPool {
        let mut pool = BeamPool::new(3);
        pool.update(s("1100"), card(0.5));
        pool.update(s("1010"), card(0.7));
        pool.update(s("0110"), card(0.3));
        pool
    }

    fn patterns(pool: &BeamPool) -> Vec<String> {
        pool.entries()
            .iter()
            .map(|e| e.subset.to_bit_string())
            .collect()
    }

    #[test]
    fn pool_sorted_descending() {
        assert_eq!(patterns(&full_pool()), ["1010", "1100", "0110"]);
    }

    #[test]
    fn below_minimum_leaves_pool_unchanged() {
        let mut pool = full_pool();
        assert!(!pool.update(s("0011"), card(0.1)));
        assert_eq!(patterns(&pool), ["1010", "1100", "0110"]);
    }

    #[test]
    fn duplicate_is_ignored() {
        let mut pool = full_pool();
        assert!(!pool.update(s("1100"), card(0.99)));
        assert_eq!(pool.entries()[1].score(), 0.5);
        assert_eq!(pool.len(), 3);
    }

    #[test]
    fn tie_with_minimum_loses_to_earlier_insertion() {
        let mut pool = full_pool();
        // lexicographically smaller than the incumbent, still excluded
        assert!(!pool.update(s("0011"), card(0.3)));
        assert_eq!(patterns(&pool), ["1010", "1100", "0110"]);
    }

    #[test]
    fn better_candidate_evicts_minimum() {
        let mut pool = full_pool();
        assert!(pool.update(s("0011"), card(0.6)));
        assert_eq!(patterns(&pool), ["1010", "0011", "1100"]);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(12, 4), 495);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(46, 23), 8_233_430_727_600);
    }

    #[test]
    fn insertion_enumeration_preserves_count() {
        let state = s("100110");
        let all = enumerate_insertion_neighbors(&state);
        assert!(!all.is_empty());
        assert!(all.iter().all(|x| x.count() == 3 && x != &state));
    }
}
