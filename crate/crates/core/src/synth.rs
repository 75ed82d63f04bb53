//! Generator for small LETOR corpora with a known informative subset.
//!
//! The first `p` features (p = min(4, max(1, n/3))) drive relevance with
//! decreasing weights; the next features are noisy copies of them; the rest
//! are uniform noise. Alongside the three splits the generator emits the
//! matching closed-form landscape and the planted subset.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{write_split_dir, Document, QueryGroup, RankingDataset, Split, SplitData};
use crate::error::{Error, Result};
use crate::evaluator::Landscape;
use crate::rng::run_rng;
use crate::subset::FeatureSubset;
use crate::sweep::LANDSCAPE_FILE;

pub const TRUTH_FILE: &str = "truth.json";
pub const DEFAULT_DOCS_PER_QUERY: usize = 20;

/// Role of every feature in a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub n: usize,
    /// 0-based indices of the informative features.
    pub planted: Vec<usize>,
    pub planted_hex: String,
    pub weights: Vec<f64>,
    /// `(copy, source)` pairs.
    pub copies: Vec<(usize, usize)>,
    pub noise: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub data: SplitData,
    pub landscape: Landscape,
    pub truth: GroundTruth,
}

impl SyntheticCorpus {
    pub fn planted(&self) -> FeatureSubset {
        FeatureSubset::from_indices(self.truth.n, &self.truth.planted).expect("planted in range")
    }

    /// Writes `train.txt`, `vali.txt`, `test.txt`, `landscape.json` and
    /// `truth.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_split_dir(&self.data, dir)?;
        for (name, json) in [
            (
                LANDSCAPE_FILE,
                serde_json::to_string_pretty(&self.landscape)?,
            ),
            (TRUTH_FILE, serde_json::to_string_pretty(&self.truth)?),
        ] {
            let path = dir.join(name);
            fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// `queries` queries of `DEFAULT_DOCS_PER_QUERY` documents, split 60/20/20.
pub fn make_synthetic(n: usize, queries: usize, seed: u64) -> Result<SyntheticCorpus> {
    make_synthetic_with(n, queries, DEFAULT_DOCS_PER_QUERY, seed)
}

pub fn make_synthetic_with(
    n: usize,
    queries: usize,
    docs_per_query: usize,
    seed: u64,
) -> Result<SyntheticCorpus> {
    if n < 2 {
        return Err(Error::Config(format!(
            "synthetic corpus needs n >= 2, got {n}"
        )));
    }
    if docs_per_query == 0 {
        return Err(Error::Config("docs per query must be positive".into()));
    }
    let p = (n / 3).clamp(1, 4);
    let weights: Vec<f64> = (0..p).map(|i| 1.0 - 0.15 * i as f64).collect();
    let n_copies = p.min((n - p) / 2);
    let copies: Vec<(usize, usize)> = (0..n_copies).map(|j| (p + j, j)).collect();
    let noise: Vec<usize> = (p + n_copies..n).collect();
    let weight_sum: f64 = weights.iter().sum();

    let mut rng = run_rng(seed);
    let n_vali = queries / 5;
    let n_test = queries / 5;
    let n_train = queries - n_vali - n_test;
    let mut splits = [Split::Train, Split::Validation, Split::Test].map(|split| RankingDataset {
        n_features: n,
        groups: Vec::new(),
        split,
    });
    for q in 0..queries {
        let mut documents = Vec::with_capacity(docs_per_query);
        for d in 0..docs_per_query {
            let mut x: Vec<f64> = (0..n).map(|_| round4(rng.gen_range(0.0..1.0))).collect();
            for &(copy, source) in &copies {
                x[copy] = round4((x[source] + rng.gen_range(-0.1..0.1)).clamp(0.0, 1.0));
            }
            let signal: f64 = weights.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>() / weight_sum;
            let z = signal + rng.gen_range(-0.1..0.1);
            let relevance = if z > 0.75 {
                2
            } else if z > 0.6 {
                1
            } else {
                0
            };
            documents.push(Document {
                features: x,
                relevance,
                doc_id: format!("q{}-d{}", q + 1, d + 1),
            });
        }
        let which = if q < n_train {
            0
        } else if q < n_train + n_vali {
            1
        } else {
            2
        };
        splits[which].groups.push(QueryGroup {
            query_id: (q + 1).to_string(),
            documents,
        });
    }
    let [train, validation, test] = splits;

    let mut utilities = vec![0.02; n];
    utilities[..p].copy_from_slice(&weights);
    let mut redundancy = Vec::new();
    for &(copy, source) in &copies {
        utilities[copy] = 0.9 * weights[source];
        redundancy.push((source, copy, 0.9 * weights[source]));
    }
    let landscape = Landscape::new(utilities, redundancy)?;
    let planted: Vec<usize> = (0..p).collect();
    let truth = GroundTruth {
        n,
        planted_hex: FeatureSubset::from_indices(n, &planted)?.to_hex(),
        planted,
        weights,
        copies,
        noise,
    };
    Ok(SyntheticCorpus {
        data: SplitData {
            train,
            validation,
            test,
        },
        landscape,
        truth,
    })
}
