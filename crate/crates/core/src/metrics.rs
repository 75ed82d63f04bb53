//! NDCG@k and (mean) average precision over graded relevance lists.
//!
//! A ranked list is the sequence of relevance grades in predicted order.
//! Gain is `2^rel - 1`, discount `log2(i + 1)` for 1-based rank `i`. A
//! document counts as relevant for AP when its grade is at least 1.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn gain(grade: u32) -> f64 {
    2f64.powi(grade as i32) - 1.0
}

fn discount(rank: usize) -> f64 {
    ((rank + 1) as f64).log2()
}

pub fn dcg_at_k(ranked: &[u32], k: usize) -> f64 {
    ranked
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| gain(g) / discount(i + 1))
        .sum()
}

pub fn ideal_dcg_at_k(ranked: &[u32], k: usize) -> f64 {
    let mut ideal = ranked.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    dcg_at_k(&ideal, k)
}

/// NDCG@k in `[0, 1]`; a list without relevant documents scores 0.
pub fn ndcg_at_k(ranked: &[u32], k: usize) -> f64 {
    assert!(k >= 1, "NDCG cutoff must be positive");
    let ideal = ideal_dcg_at_k(ranked, k);
    if ideal == 0.0 {
        return 0.0;
    }
    (dcg_at_k(ranked, k) / ideal).min(1.0)
}

pub fn has_relevant(ranked: &[u32]) -> bool {
    ranked.iter().any(|&g| g >= 1)
}

/// Average precision with binarization at grade >= 1. With a cutoff only
/// the first `cutoff` positions contribute; the denominator stays the total
/// relevant count (RankLib's AP@k).
pub fn average_precision_at(ranked: &[u32], cutoff: Option<usize>) -> f64 {
    let total_relevant = ranked.iter().filter(|&&g| g >= 1).count();
    if total_relevant == 0 {
        return 0.0;
    }
    let depth = cutoff.unwrap_or(ranked.len());
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &g) in ranked.iter().take(depth).enumerate() {
        if g >= 1 {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / total_relevant as f64
}

pub fn average_precision(ranked: &[u32]) -> f64 {
    average_precision_at(ranked, None)
}

pub fn mean_over_queries(per_query: &[f64]) -> Result<f64> {
    if per_query.is_empty() {
        return Err(Error::EmptyData("no per-query scores to average".into()));
    }
    Ok(per_query.iter().sum::<f64>() / per_query.len() as f64)
}

/// Orders `grades` by `scores` descending; equal scores keep document order.
pub fn rank_by_scores(scores: &[f64], grades: &[u32]) -> Vec<u32> {
    debug_assert_eq!(scores.len(), grades.len());
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx.into_iter().map(|i| grades[i]).collect()
}

/// Serialized as its display form, e.g. `"ndcg@10"` or `"map"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Metric {
    Ndcg(usize),
    Map,
    /// AP truncated at a cutoff, averaged over queries.
    MapAt(usize),
}

impl Default for Metric {
    fn default() -> Self {
        Metric::Ndcg(10)
    }
}

impl Metric {
    pub fn query_score(self, ranked: &[u32]) -> f64 {
        match self {
            Metric::Ndcg(k) => ndcg_at_k(ranked, k),
            Metric::Map => average_precision(ranked),
            Metric::MapAt(k) => average_precision_at(ranked, Some(k)),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Ndcg(k) => write!(f, "ndcg@{k}"),
            Metric::Map => f.write_str("map"),
            Metric::MapAt(k) => write!(f, "map@{k}"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let cutoff = |rest: &str| -> Result<usize> {
            match rest.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(k),
                _ => Err(Error::Config(format!("bad metric cutoff in {s:?}"))),
            }
        };
        if lower == "map" {
            Ok(Metric::Map)
        } else if let Some(rest) = lower.strip_prefix("map@") {
            Ok(Metric::MapAt(cutoff(rest)?))
        } else if let Some(rest) = lower.strip_prefix("ndcg@") {
            Ok(Metric::Ndcg(cutoff(rest)?))
        } else if lower == "ndcg" {
            Ok(Metric::Ndcg(10))
        } else {
            Err(Error::Config(format!("unknown metric {s:?}")))
        }
    }
}

impl TryFrom<String> for Metric {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Metric> for String {
    fn from(m: Metric) -> String {
        m.to_string()
    }
}

/// What to do with queries that have no relevant document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoRelevantPolicy {
    /// Count the query with score 0 (RankLib).
    #[default]
    Zero,
    Skip,
}

/// Mean of `metric` over ranked lists. With [`NoRelevantPolicy::Skip`] and no
/// query left, the mean is 0.
pub fn mean_metric<'a, I>(metric: Metric, ranked_lists: I, policy: NoRelevantPolicy) -> f64
where
    I: IntoIterator<Item = &'a [u32]>,
{
    let mut sum = 0.0;
    let mut count = 0usize;
    for ranked in ranked_lists {
        if policy == NoRelevantPolicy::Skip && !has_relevant(ranked) {
            continue;
        }
        sum += metric.query_score(ranked);
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg_at_k(&[2, 1, 0], 3), 1.0);
        let expected = (1.0 / 3f64.log2() + 3.0 / 2.0) / (3.0 + 1.0 / 3f64.log2());
        assert!((ndcg_at_k(&[0, 1, 2], 3) - expected).abs() < 1e-15);
        assert!((ndcg_at_k(&[0, 1, 2], 3) - 0.586_882_671).abs() < 1e-9);
        assert_eq!(ndcg_at_k(&[0; 12], 10), 0.0);
    }

    #[test]
    fn ndcg_cutoff_longer_than_list() {
        assert_eq!(ndcg_at_k(&[1], 10), 1.0);
        assert!(ndcg_at_k(&[0, 0, 1], 2) == 0.0);
    }

    #[test]
    fn ap_examples() {
        assert!((average_precision(&[1, 0, 1, 0]) - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(average_precision(&[1, 1, 1]), 1.0);
        assert_eq!(average_precision(&[0, 0, 0]), 0.0);
        // graded labels binarize at 1
        assert_eq!(average_precision(&[2, 1, 0]), 1.0);
    }

    #[test]
    fn truncated_ap() {
        // only the first relevant hit is inside the cutoff
        assert!((average_precision_at(&[1, 0, 1, 0], Some(2)) - 0.5).abs() < 1e-15);
        assert_eq!(
            average_precision_at(&[1, 0, 1, 0], Some(10)),
            average_precision(&[1, 0, 1, 0])
        );
    }

    #[test]
    fn mean_examples() {
        assert!((mean_over_queries(&[0.5, 0.7]).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(mean_over_queries(&[0.3141]).unwrap(), 0.3141);
        assert!(mean_over_queries(&[]).is_err());
    }

    #[test]
    fn ties_keep_document_order() {
        let ranked = rank_by_scores(&[0.5, 0.9, 0.5, 0.5], &[0, 1, 2, 3]);
        assert_eq!(ranked, vec![1, 0, 2, 3]);
    }

    #[test]
    fn no_relevant_policy() {
        let lists: Vec<&[u32]> = vec![&[1, 0], &[0, 0]];
        assert_eq!(
            mean_metric(Metric::Ndcg(10), lists.clone(), NoRelevantPolicy::Zero),
            0.5
        );
        assert_eq!(
            mean_metric(Metric::Ndcg(10), lists, NoRelevantPolicy::Skip),
            1.0
        );
    }

    #[test]
    fn metric_parsing() {
        assert_eq!("ndcg@10".parse::<Metric>().unwrap(), Metric::Ndcg(10));
        assert_eq!("MAP".parse::<Metric>().unwrap(), Metric::Map);
        assert_eq!("map@10".parse::<Metric>().unwrap(), Metric::MapAt(10));
        assert!("ndcg@0".parse::<Metric>().is_err());
        assert!("err@3".parse::<Metric>().is_err());
        assert_eq!(Metric::Ndcg(5).to_string(), "ndcg@5");
        assert_eq!(
            serde_json::to_string(&Metric::MapAt(3)).unwrap(),
            "\"map@3\""
        );
        assert_eq!(
            serde_json::from_str::<Metric>("\"NDCG@5\"").unwrap(),
            Metric::Ndcg(5)
        );
    }
}
