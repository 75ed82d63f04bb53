//! Subset quality: train a ranker on the selected features and score it.
//!
//! An [`Evaluator`] wraps a [`ScoreSource`] (the built-in coordinate-ascent
//! ranker, the closed-form synthetic landscape, or anything external) with a
//! shared memo cache and call counters. It is `Sync`: concurrent runs share
//! one instance.

pub mod ranker;
pub mod synthetic;

use std::fs;
use std::io::Write;
use std::num::NonZeroUsize;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;
use std::time::{Duration, Instant};

use lru::LruCache;
use serde::{Deserialize, Serialize};

use crate::data::{Split, SplitData};
use crate::error::{Error, Result};
use crate::metrics::{Metric, NoRelevantPolicy};
use crate::rng::stable_hash;
use crate::subset::FeatureSubset;

pub use ranker::{train_coordinate_ascent, CoordinateAscentParams, Normalizer, PreparedSplit};
pub use synthetic::{synthetic_objective, Landscape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankerKind {
    CoordinateAscent,
    Synthetic,
}

impl std::str::FromStr for RankerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coordinate_ascent" | "ca" => Ok(RankerKind::CoordinateAscent),
            "synthetic" => Ok(RankerKind::Synthetic),
            other => Err(Error::Config(format!("unknown ranker {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluatorConfig {
    pub guide_metric: Metric,
    /// Split whose score steers the search: validation or test.
    pub guide_split: Split,
    pub seed: u64,
    pub ranker: RankerKind,
    pub no_relevant: NoRelevantPolicy,
    pub ranker_params: CoordinateAscentParams,
    /// LRU entry cap; unbounded when `None`.
    pub cache_capacity: Option<usize>,
    pub keep_per_query: bool,
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        EvaluatorConfig {
            guide_metric: Metric::Ndcg(10),
            guide_split: Split::Validation,
            seed: 0,
            ranker: RankerKind::CoordinateAscent,
            no_relevant: NoRelevantPolicy::Zero,
            ranker_params: CoordinateAscentParams::default(),
            cache_capacity: None,
            keep_per_query: false,
        }
    }
}

impl EvaluatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.guide_split == Split::Train {
            return Err(Error::Config(
                "guide split must be validation or test".into(),
            ));
        }
        if matches!(self.guide_metric, Metric::Ndcg(0) | Metric::MapAt(0)) {
            return Err(Error::Config("metric cutoff must be positive".into()));
        }
        if self.cache_capacity == Some(0) {
            return Err(Error::Config("cache capacity must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    /// Guide metric on the guide split; this is what the search maximizes.
    pub guide_score: f64,
    /// Guide metric on the test split.
    pub test_score: f64,
    pub test_ndcg10: f64,
    pub test_map: f64,
    /// Guide metric per guide-split query, when requested.
    pub per_query: Option<Vec<f64>>,
    pub train_time: Duration,
}

impl ScoreCard {
    /// Same scores, ignoring the timing field.
    pub fn same_scores(&self, other: &ScoreCard) -> bool {
        self.guide_score.to_bits() == other.guide_score.to_bits()
            && self.test_score.to_bits() == other.test_score.to_bits()
            && self.test_ndcg10.to_bits() == other.test_ndcg10.to_bits()
            && self.test_map.to_bits() == other.test_map.to_bits()
            && self.per_query == other.per_query
    }
}

/// Anything that can score a feature subset.
pub trait ScoreSource: Send + Sync {
    fn n_features(&self) -> usize;
    /// Identifies data and configuration for cache persistence.
    fn fingerprint(&self) -> u64;
    fn score(&self, subset: &FeatureSubset) -> Result<ScoreCard>;
}

struct HashWriter(Vec<u8>, u64);

impl Write for HashWriter {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.extend_from_slice(buf);
        if self.0.len() > 1 << 16 {
            self.flush()?;
        }
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.1 = stable_hash(&[self.1.to_le_bytes().as_slice(), &self.0].concat());
        self.0.clear();
        Ok(())
    }
}

/// Content hash of all three splits.
pub fn dataset_fingerprint(data: &SplitData) -> u64 {
    let mut w = HashWriter(Vec::new(), 0);
    for split in [Split::Train, Split::Validation, Split::Test] {
        data.get(split)
            .write_letor(&mut w)
            .expect("hashing never fails");
        w.write_all(b"\x00").expect("hashing never fails");
    }
    w.flush().expect("hashing never fails");
    w.1
}

fn config_fingerprint<T: Serialize>(value: &T) -> u64 {
    stable_hash(&serde_json::to_vec(value).expect("config serializes"))
}

/// Coordinate-ascent ranker trained on the train split.
pub struct CoordinateAscentSource {
    norm: Normalizer,
    train: PreparedSplit,
    guide: PreparedSplit,
    test: PreparedSplit,
    n_features: usize,
    cfg: EvaluatorConfig,
    fingerprint: u64,
}

impl CoordinateAscentSource {
    pub fn new(data: &SplitData, cfg: &EvaluatorConfig) -> Result<Self> {
        cfg.validate()?;
        for split in [Split::Train, cfg.guide_split, Split::Test] {
            if data.get(split).is_empty() {
                return Err(Error::EmptyData(format!("{split} split has no queries")));
            }
        }
        let norm = Normalizer::fit(&data.train);
        Ok(CoordinateAscentSource {
            train: PreparedSplit::new(&data.train, &norm),
            guide: PreparedSplit::new(data.get(cfg.guide_split), &norm),
            test: PreparedSplit::new(&data.test, &norm),
            norm,
            n_features: data.n_features(),
            cfg: cfg.clone(),
            fingerprint: stable_hash(
                &[
                    dataset_fingerprint(data).to_le_bytes(),
                    config_fingerprint(&(
                        cfg.guide_metric,
                        cfg.guide_split,
                        cfg.seed,
                        cfg.no_relevant,
                        cfg.ranker_params,
                    ))
                    .to_le_bytes(),
                ]
                .concat(),
            ),
        })
    }

    pub fn weights(&self, subset: &FeatureSubset) -> Vec<f64> {
        train_coordinate_ascent(
            &self.train,
            &self.norm,
            &subset.ones(),
            self.cfg.guide_metric,
            self.cfg.no_relevant,
            &self.cfg.ranker_params,
            self.cfg.seed,
        )
    }
}

impl ScoreSource for CoordinateAscentSource {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    fn score(&self, subset: &FeatureSubset) -> Result<ScoreCard> {
        let start = Instant::now();
        let weights = self.weights(subset);
        let train_time = start.elapsed();
        let metric = self.cfg.guide_metric;
        let policy = self.cfg.no_relevant;
        let guide_scores = self.guide.scores(&weights);
        let test_scores = self.test.scores(&weights);
        Ok(ScoreCard {
            guide_score: self.guide.mean(metric, &guide_scores, policy),
            test_score: self.test.mean(metric, &test_scores, policy),
            test_ndcg10: self.test.mean(Metric::Ndcg(10), &test_scores, policy),
            test_map: self.test.mean(Metric::Map, &test_scores, policy),
            per_query: self
                .cfg
                .keep_per_query
                .then(|| self.guide.per_query(metric, &guide_scores)),
            train_time,
        })
    }
}

/// Closed-form landscape; guide and test scores coincide.
pub struct SyntheticSource {
    landscape: Landscape,
}

impl SyntheticSource {
    pub fn new(landscape: Landscape) -> Self {
        SyntheticSource { landscape }
    }
}

impl ScoreSource for SyntheticSource {
    fn n_features(&self) -> usize {
        self.landscape.n_features()
    }

    fn fingerprint(&self) -> u64 {
        config_fingerprint(&self.landscape)
    }

    fn score(&self, subset: &FeatureSubset) -> Result<ScoreCard> {
        let value = self.landscape.score(subset);
        Ok(ScoreCard {
            guide_score: value,
            test_score: value,
            test_ndcg10: value,
            test_map: value,
            per_query: None,
            train_time: Duration::ZERO,
        })
    }
}

const CACHE_FORMAT: &str = "rank-anneal-cache";
const CACHE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CacheFile {
    format: String,
    version: u32,
    fingerprint: u64,
    n_features: usize,
    entries: Vec<(FeatureSubset, ScoreCard)>,
}

pub struct Evaluator {
    source: Box<dyn ScoreSource>,
    cache: RwLock<LruCache<FeatureSubset, ScoreCard>>,
    bounded: bool,
    calls: AtomicU64,
    computed: AtomicU64,
}

impl Evaluator {
    pub fn new(source: Box<dyn ScoreSource>, cache_capacity: Option<usize>) -> Self {
        let cache = match cache_capacity.and_then(NonZeroUsize::new) {
            Some(cap) => LruCache::new(cap),
            None => LruCache::unbounded(),
        };
        Evaluator {
            source,
            cache: RwLock::new(cache),
            bounded: cache_capacity.is_some(),
            calls: AtomicU64::new(0),
            computed: AtomicU64::new(0),
        }
    }

    pub fn synthetic(landscape: Landscape) -> Self {
        Self::new(Box::new(SyntheticSource::new(landscape)), None)
    }

    /// Builds the evaluator `cfg.ranker` names. The synthetic ranker needs a
    /// landscape; the coordinate-ascent ranker ignores it.
    pub fn from_config(
        data: Option<&SplitData>,
        landscape: Option<Landscape>,
        cfg: &EvaluatorConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let source: Box<dyn ScoreSource> = match cfg.ranker {
            RankerKind::CoordinateAscent => {
                let data = data.ok_or_else(|| {
                    Error::Config("coordinate-ascent ranker needs a dataset".into())
                })?;
                Box::new(CoordinateAscentSource::new(data, cfg)?)
            }
            RankerKind::Synthetic => {
                Box::new(SyntheticSource::new(landscape.ok_or_else(|| {
                    Error::Config("synthetic ranker needs a landscape".into())
                })?))
            }
        };
        Ok(Self::new(source, cfg.cache_capacity))
    }

    pub fn n_features(&self) -> usize {
        self.source.n_features()
    }

    pub fn fingerprint(&self) -> u64 {
        self.source.fingerprint()
    }

    /// Total `evaluate` calls, cache hits included.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    /// Calls that actually trained and scored a ranker.
    pub fn computed(&self) -> u64 {
        self.computed.load(Ordering::Relaxed)
    }

    pub fn cache_len(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    pub fn evaluate(&self, subset: &FeatureSubset) -> Result<ScoreCard> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if subset.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: subset.len(),
            });
        }
        if subset.count() == 0 {
            return Err(Error::EmptySubset);
        }
        if let Some(card) = self.lookup(subset) {
            return Ok(card);
        }
        let card = self.source.score(subset)?;
        let mut cache = self.cache.write().expect("cache lock");
        // another thread may have filled the slot meanwhile; keep the first
        if let Some(existing) = cache.get(subset) {
            return Ok(existing.clone());
        }
        self.computed.fetch_add(1, Ordering::Relaxed);
        cache.put(subset.clone(), card.clone());
        Ok(card)
    }

    pub fn guide_score(&self, subset: &FeatureSubset) -> Result<f64> {
        Ok(self.evaluate(subset)?.guide_score)
    }

    fn lookup(&self, subset: &FeatureSubset) -> Option<ScoreCard> {
        if self.bounded {
            // recency update needs the write lock
            self.cache.write().expect("cache lock").get(subset).cloned()
        } else {
            self.cache.read().expect("cache lock").peek(subset).cloned()
        }
    }

    /// Writes the cache as versioned JSON, entries sorted by subset.
    pub fn save_cache(&self, path: &Path) -> Result<()> {
        let mut entries: Vec<_> = self
            .cache
            .read()
            .expect("cache lock")
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let file = CacheFile {
            format: CACHE_FORMAT.into(),
            version: CACHE_VERSION,
            fingerprint: self.fingerprint(),
            n_features: self.n_features(),
            entries,
        };
        let bytes = serde_json::to_vec(&file)?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    /// Loads a cache written by [`Evaluator::save_cache`] for the same data
    /// and configuration. Returns the number of entries added.
    pub fn load_cache(&self, path: &Path) -> Result<usize> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let file: CacheFile = serde_json::from_slice(&bytes)?;
        if file.format != CACHE_FORMAT || file.version != CACHE_VERSION {
            return Err(Error::Config(format!(
                "{}: unsupported cache format {} v{}",
                path.display(),
                file.format,
                file.version
            )));
        }
        if file.fingerprint != self.fingerprint() || file.n_features != self.n_features() {
            return Err(Error::Config(format!(
                "{}: cache was written for different data or configuration",
                path.display()
            )));
        }
        let mut cache = self.cache.write().expect("cache lock");
        let mut added = 0;
        for (subset, card) in file.entries {
            if !cache.contains(&subset) {
                cache.put(subset, card);
                added += 1;
            }
        }
        Ok(added)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn landscape() -> Landscape {
        Landscape::new(vec![3.0, 2.0, 1.0, 0.5], vec![(0, 1, 4.0)]).unwrap()
    }

    #[test]
    fn memoized_and_counted() {
        let ev = Evaluator::synthetic(landscape());
        let s = FeatureSubset::from_indices(4, &[0, 2]).unwrap();
        let a = ev.evaluate(&s).unwrap();
        let b = ev.evaluate(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(ev.calls(), 2);
        assert_eq!(ev.computed(), 1);
    }

    #[test]
    fn all_ones_scores_closed_form() {
        let free = Landscape::new(vec![3.0, 2.0, 1.0, 0.5], vec![]).unwrap();
        let ev = Evaluator::synthetic(free);
        assert_eq!(ev.guide_score(&FeatureSubset::all(4)).unwrap(), 1.0);
        let ev = Evaluator::synthetic(landscape());
        let expected = (6.5 - 4.0) / 6.5;
        assert_eq!(ev.guide_score(&FeatureSubset::all(4)).unwrap(), expected);
    }

    #[test]
    fn precondition_errors() {
        let ev = Evaluator::synthetic(landscape());
        assert!(matches!(
            ev.evaluate(&FeatureSubset::empty(4)),
            Err(Error::EmptySubset)
        ));
        assert!(matches!(
            ev.evaluate(&FeatureSubset::all(5)),
            Err(Error::DimensionMismatch {
                expected: 4,
                found: 5
            })
        ));
    }

    #[test]
    fn bounded_cache_evicts_but_stays_sound() {
        let ev = Evaluator::new(Box::new(SyntheticSource::new(landscape())), Some(2));
        let subsets: Vec<_> = [[0usize], [1], [2], [3]]
            .iter()
            .map(|i| FeatureSubset::from_indices(4, i).unwrap())
            .collect();
        let first: Vec<_> = subsets.iter().map(|s| ev.evaluate(s).unwrap()).collect();
        assert_eq!(ev.cache_len(), 2);
        let again: Vec<_> = subsets.iter().map(|s| ev.evaluate(s).unwrap()).collect();
        assert_eq!(first, again);
        assert_eq!(ev.computed(), 8);
    }

    #[test]
    fn cache_file_round_trip_and_fingerprint_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        let ev = Evaluator::synthetic(landscape());
        for idx in [[0usize, 1], [1, 2], [2, 3]] {
            ev.evaluate(&FeatureSubset::from_indices(4, &idx).unwrap())
                .unwrap();
        }
        ev.save_cache(&path).unwrap();

        let resumed = Evaluator::synthetic(landscape());
        assert_eq!(resumed.load_cache(&path).unwrap(), 3);
        let s = FeatureSubset::from_indices(4, &[1, 2]).unwrap();
        assert_eq!(resumed.evaluate(&s).unwrap(), ev.evaluate(&s).unwrap());
        assert_eq!(resumed.computed(), 0);

        let other = Evaluator::synthetic(Landscape::new(vec![1.0; 4], vec![]).unwrap());
        assert!(matches!(other.load_cache(&path), Err(Error::Config(_))));
    }

    #[test]
    fn config_rejects_train_guide() {
        let cfg = EvaluatorConfig {
            guide_split: Split::Train,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
