//! Linear ranker trained by cyclic coordinate line search (RankLib-style
//! coordinate ascent) directly on an IR metric.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::RankingDataset;
use crate::metrics::{has_relevant, Metric, NoRelevantPolicy};
use crate::rng::{derive_seed, run_rng};

/// Per-feature min-max statistics taken from the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl Normalizer {
    pub fn fit(train: &RankingDataset) -> Self {
        let n = train.n_features;
        let mut min = vec![f64::INFINITY; n];
        let mut max = vec![f64::NEG_INFINITY; n];
        for doc in train.groups.iter().flat_map(|g| &g.documents) {
            for (i, &v) in doc.features.iter().enumerate() {
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
            }
        }
        Normalizer { min, max }
    }

    /// Constant (or absent) on train: carries no ranking signal.
    pub fn is_degenerate(&self, feature: usize) -> bool {
        self.max[feature].partial_cmp(&self.min[feature]) != Some(std::cmp::Ordering::Greater)
    }

    pub fn apply(&self, feature: usize, value: f64) -> f64 {
        if self.is_degenerate(feature) {
            0.0
        } else {
            (value - self.min[feature]) / (self.max[feature] - self.min[feature])
        }
    }
}

/// Column-major, normalized copy of one split for fast rescoring.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    columns: Vec<Vec<f64>>,
    /// Document index ranges, one per query.
    bounds: Vec<(usize, usize)>,
    grades: Vec<u32>,
    /// Per query: does it have a document with grade >= 1?
    relevant: Vec<bool>,
}

impl PreparedSplit {
    pub fn new(data: &RankingDataset, norm: &Normalizer) -> Self {
        let n_docs = data.num_documents();
        let mut columns = vec![Vec::with_capacity(n_docs); data.n_features];
        let mut bounds = Vec::with_capacity(data.groups.len());
        let mut grades = Vec::with_capacity(n_docs);
        for group in &data.groups {
            let start = grades.len();
            for doc in &group.documents {
                for (i, &v) in doc.features.iter().enumerate() {
                    columns[i].push(norm.apply(i, v));
                }
                grades.push(doc.relevance);
            }
            bounds.push((start, grades.len()));
        }
        let relevant = bounds
            .iter()
            .map(|&(lo, hi)| has_relevant(&grades[lo..hi]))
            .collect();
        PreparedSplit {
            columns,
            bounds,
            grades,
            relevant,
        }
    }

    pub fn num_queries(&self) -> usize {
        self.bounds.len()
    }

    pub fn num_documents(&self) -> usize {
        self.grades.len()
    }

    pub fn scores(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_documents()];
        for (col, &w) in self.columns.iter().zip(weights) {
            if w != 0.0 {
                for (o, &x) in out.iter_mut().zip(col) {
                    *o += w * x;
                }
            }
        }
        out
    }

    /// Per-query metric values for the given document scores.
    pub fn per_query(&self, metric: Metric, scores: &[f64]) -> Vec<f64> {
        let mut ranked = Vec::new();
        let mut order = Vec::new();
        self.bounds
            .iter()
            .map(|&(lo, hi)| {
                rank_into(
                    &scores[lo..hi],
                    &self.grades[lo..hi],
                    &mut order,
                    &mut ranked,
                );
                metric.query_score(&ranked)
            })
            .collect()
    }

    pub fn mean(&self, metric: Metric, scores: &[f64], policy: NoRelevantPolicy) -> f64 {
        let mut ranked = Vec::new();
        let mut order = Vec::new();
        let mut sum = 0.0;
        let mut count = 0usize;
        for (&(lo, hi), &relevant) in self.bounds.iter().zip(&self.relevant) {
            if !relevant {
                // every supported metric is 0 here; no need to rank
                if policy == NoRelevantPolicy::Zero {
                    count += 1;
                }
                continue;
            }
            let grades = &self.grades[lo..hi];
            rank_into(&scores[lo..hi], grades, &mut order, &mut ranked);
            sum += metric.query_score(&ranked);
            count += 1;
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }
}

fn rank_into(scores: &[f64], grades: &[u32], order: &mut Vec<usize>, ranked: &mut Vec<u32>) {
    order.clear();
    order.extend(0..scores.len());
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    ranked.clear();
    ranked.extend(order.iter().map(|&i| grades[i]));
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordinateAscentParams {
    pub max_passes: usize,
    /// Smallest trial step; trial steps double up to `step_count` times.
    pub base_step: f64,
    pub step_count: usize,
    /// A pass must improve the train metric by more than this to continue.
    pub tolerance: f64,
}

impl Default for CoordinateAscentParams {
    fn default() -> Self {
        CoordinateAscentParams {
            max_passes: 5,
            base_step: 0.01,
            step_count: 8,
            tolerance: 1e-4,
        }
    }
}

/// Trains linear weights (length `n_features`, zero outside `active`) that
/// maximize `metric` on `train`.
pub fn train_coordinate_ascent(
    train: &PreparedSplit,
    norm: &Normalizer,
    active: &[usize],
    metric: Metric,
    policy: NoRelevantPolicy,
    params: &CoordinateAscentParams,
    seed: u64,
) -> Vec<f64> {
    let n = train.columns.len();
    let mut weights = vec![0.0; n];
    let usable: Vec<usize> = active
        .iter()
        .copied()
        .filter(|&f| !norm.is_degenerate(f))
        .collect();
    if usable.is_empty() {
        return weights;
    }
    let init = 1.0 / usable.len() as f64;
    for &f in &usable {
        weights[f] = init;
    }
    let mut scores = train.scores(&weights);
    let mut best = train.mean(metric, &scores, policy);
    let mut trial = vec![0.0; scores.len()];

    for pass in 0..params.max_passes {
        let pass_start = best;
        let mut order = usable.clone();
        order.shuffle(&mut run_rng(derive_seed(seed, &[pass as u64])));
        for &f in &order {
            let current = weights[f];
            let mut candidates = vec![-current, 0.0];
            for dir in [1.0, -1.0] {
                let mut step = params.base_step;
                for _ in 0..params.step_count {
                    candidates.push(current + dir * step);
                    step *= 2.0;
                }
            }
            let col = &train.columns[f];
            let mut chosen = None;
            for cand in candidates {
                if cand == current {
                    continue;
                }
                let delta = cand - current;
                for ((t, &s), &x) in trial.iter_mut().zip(&scores).zip(col) {
                    *t = s + delta * x;
                }
                let value = train.mean(metric, &trial, policy);
                if value > best {
                    best = value;
                    chosen = Some(cand);
                }
            }
            if let Some(cand) = chosen {
                let delta = cand - current;
                for (s, &x) in scores.iter_mut().zip(col) {
                    *s += delta * x;
                }
                weights[f] = cand;
            }
        }
        // rescale to unit L1 norm; rankings are unchanged
        let l1: f64 = weights.iter().map(|w| w.abs()).sum();
        if l1 > 0.0 {
            weights.iter_mut().for_each(|w| *w /= l1);
            scores.iter_mut().for_each(|s| *s /= l1);
        }
        if best - pass_start <= params.tolerance {
            break;
        }
    }
    weights
}
