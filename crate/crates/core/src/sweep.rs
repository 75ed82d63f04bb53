//! The k-by-repeat experiment protocol.
//!
//! For every `k` in the range and every repeat `r` one search runs with seed
//! `derive_seed(base, [k, r])`, so adding repeats or widening the range never
//! perturbs runs already done. Finished runs are appended to a JSON-lines
//! store keyed by (dataset hash, config hash, k, repeat); a rerun with the
//! same store skips them. Per-k aggregates go to a CSV whose bytes depend
//! only on the configuration; wall-clock figures go to a `.timing.csv`
//! sidecar next to it.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annealer::{
    anneal, calibrate_initial_temperature, default_budget, AcceptanceMode, AnnealerConfig,
    BudgetUnit, CoolingScheme, DEFAULT_ALPHA, DEFAULT_BUDGET_CAP, DEFAULT_BUDGET_FACTOR,
    DEFAULT_INITIAL_TEMPERATURE, DEFAULT_LOG_OFFSET,
};
use crate::beam::{beam_search, BeamConfig, DEFAULT_BEAM_WIDTH};
use crate::data::{load_split_dir, SplitData};
use crate::error::{Error, Result};
use crate::evaluator::{dataset_fingerprint, Evaluator, EvaluatorConfig, Landscape, RankerKind};
use crate::record::RunRecord;
use crate::rng::{derive_seed, stable_hash};
use crate::subset::NeighborhoodKind;

/// First line of every results CSV; bump when the columns change.
pub const RESULTS_FORMAT: &str = "rank-anneal-sweep v1";

pub const RESULT_COLUMNS: [&str; 11] = [
    "k",
    "algorithm",
    "neighborhood",
    "scheme",
    "mean_guide",
    "stderr_guide",
    "mean_test_ndcg10",
    "mean_test_map",
    "best_subset_hex",
    "mean_evaluations",
    "repeats",
];

/// File name of the landscape a synthetic-ranker sweep reads from the data
/// directory.
pub const LANDSCAPE_FILE: &str = "landscape.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sa,
    Lbs,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Sa => "sa",
            Algorithm::Lbs => "lbs",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sa" | "anneal" => Ok(Algorithm::Sa),
            "lbs" | "beam" => Ok(Algorithm::Lbs),
            other => Err(Error::Config(format!(
                "unknown algorithm {other:?} (sa or lbs)"
            ))),
        }
    }
}

/// Cooling rule without its numeric parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    Geometric,
    Logarithmic,
    Fast,
}

impl Schedule {
    pub fn tag(self) -> &'static str {
        match self {
            Schedule::Geometric => "s1",
            Schedule::Logarithmic => "s2",
            Schedule::Fast => "s3",
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schedule::Geometric => "geometric",
            Schedule::Logarithmic => "logarithmic",
            Schedule::Fast => "fast",
        })
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" | "geometric" => Ok(Schedule::Geometric),
            "s2" | "logarithmic" | "log" => Ok(Schedule::Logarithmic),
            "s3" | "fast" => Ok(Schedule::Fast),
            other => Err(Error::Config(format!("unknown cooling schedule {other:?}"))),
        }
    }
}

/// Neighborhood plus cooling schedule, written `n1s3` etc.: `n1` swap,
/// `n2` insertion; `s1` geometric, `s2` logarithmic, `s3` fast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Setting {
    pub neighborhood: NeighborhoodKind,
    pub schedule: Schedule,
}

impl Setting {
    pub const ALL: [&'static str; 6] = ["n1s1", "n1s2", "n1s3", "n2s1", "n2s2", "n2s3"];
}

impl Default for Setting {
    fn default() -> Self {
        Setting {
            neighborhood: NeighborhoodKind::Swap,
            schedule: Schedule::Fast,
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.neighborhood.tag(), self.schedule.tag())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let bad = || {
            Error::Config(format!(
                "setting {s:?} is not n1s1..n2s3 or NEIGHBORHOOD/SCHEDULE"
            ))
        };
        if let Some((nb, sc)) = s.split_once('/') {
            return Ok(Setting {
                neighborhood: nb.parse()?,
                schedule: sc.parse()?,
            });
        }
        if s.len() != 4 {
            return Err(bad());
        }
        Ok(Setting {
            neighborhood: s[..2].parse().map_err(|_| bad())?,
            schedule: s[2..].parse().map_err(|_| bad())?,
        })
    }
}

impl TryFrom<String> for Setting {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Setting> for String {
    fn from(s: Setting) -> String {
        s.to_string()
    }
}

/// Sorted, deduplicated list of subset sizes, written `1..45`, `4,8,16` or
/// a mix such as `1..3,8`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct KRange(Vec<usize>);

impl KRange {
    pub fn new(mut ks: Vec<usize>) -> Result<Self> {
        ks.sort_unstable();
        ks.dedup();
        if ks.is_empty() {
            return Err(Error::Config("empty k range".into()));
        }
        Ok(KRange(ks))
    }

    /// `1..=n-1`.
    pub fn full(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("no valid k for n = {n}")));
        }
        Self::new((1..n).collect())
    }

    pub fn values(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check(&self, n: usize) -> Result<()> {
        match self.0.iter().find(|&&k| k == 0 || k >= n) {
            Some(&k) => Err(Error::SubsetSize { n, k }),
            None => Ok(()),
        }
    }
}

impl fmt::Display for KRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // compress consecutive runs back into a..b
        let mut parts = Vec::new();
        let mut i = 0;
        while i < self.0.len() {
            let mut j = i;
            while j + 1 < self.0.len() && self.0[j + 1] == self.0[j] + 1 {
                j += 1;
            }
            if j > i {
                parts.push(format!("{}..{}", self.0[i], self.0[j]));
            } else {
                parts.push(self.0[i].to_string());
            }
            i = j + 1;
        }
        f.write_str(&parts.join(","))
    }
}

impl FromStr for KRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |part: &str| Error::Config(format!("bad k range element {part:?}"));
        let mut ks = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let range = part
                .split_once("..=")
                .or_else(|| part.split_once(".."))
                .or_else(|| part.split_once('-'));
            match range {
                Some((a, b)) => {
                    let a: usize = a.trim().parse().map_err(|_| bad(part))?;
                    let b: usize = b.trim().parse().map_err(|_| bad(part))?;
                    if a > b {
                        return Err(bad(part));
                    }
                    ks.extend(a..=b);
                }
                None => ks.push(part.parse().map_err(|_| bad(part))?),
            }
        }
        KRange::new(ks)
    }
}

impl TryFrom<String> for KRange {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KRange> for String {
    fn from(k: KRange) -> String {
        k.to_string()
    }
}

/// Search knobs shared by all runs of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchParams {
    pub budget_factor: f64,
    pub budget_cap: usize,
    pub budget_unit: BudgetUnit,
    pub initial_temperature: f64,
    /// Pick T0 per run from sampled transitions instead of using
    /// `initial_temperature`. The sampled scorings are not charged to the
    /// run's budget.
    pub calibrate_temperature: bool,
    pub alpha: f64,
    pub log_offset: u32,
    pub accept_quota: usize,
    pub max_steps_per_temp: usize,
    pub progress_threshold: Option<usize>,
    pub t_min: f64,
    pub acceptance: AcceptanceMode,
    pub beam_width: usize,
    pub full_expansion: bool,
}

impl Default for SearchParams {
    fn default() -> Self {
        let a = AnnealerConfig::default();
        SearchParams {
            budget_factor: DEFAULT_BUDGET_FACTOR,
            budget_cap: DEFAULT_BUDGET_CAP,
            budget_unit: a.budget_unit,
            initial_temperature: DEFAULT_INITIAL_TEMPERATURE,
            calibrate_temperature: false,
            alpha: DEFAULT_ALPHA,
            log_offset: DEFAULT_LOG_OFFSET,
            accept_quota: a.accept_quota,
            max_steps_per_temp: a.max_steps_per_temp,
            progress_threshold: a.progress_threshold,
            t_min: a.t_min,
            acceptance: a.acceptance,
            beam_width: DEFAULT_BEAM_WIDTH,
            full_expansion: false,
        }
    }
}

impl SearchParams {
    pub fn scheme(&self, schedule: Schedule, t0: f64) -> CoolingScheme {
        match schedule {
            Schedule::Geometric => CoolingScheme::geometric(t0, self.alpha),
            Schedule::Logarithmic => CoolingScheme::logarithmic(t0, self.log_offset),
            Schedule::Fast => CoolingScheme::fast(t0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Fold directory (`train.txt`, `vali.txt`, `test.txt`); for the
    /// synthetic ranker, the directory holding `landscape.json`.
    pub data: PathBuf,
    pub algorithm: Algorithm,
    pub setting: Setting,
    pub repeats: usize,
    /// Defaults to `1..=n-1`.
    pub k: Option<KRange>,
    pub seed: u64,
    pub evaluator: EvaluatorConfig,
    pub search: SearchParams,
    /// Results CSV; the run store and timing sidecar sit next to it.
    pub out: PathBuf,
    /// Worker threads; all cores when `None`.
    pub threads: Option<usize>,
    /// Skip runs already present in the run store.
    pub resume: bool,
}

impl SweepConfig {
    pub fn new(data: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        SweepConfig {
            data: data.into(),
            algorithm: Algorithm::Sa,
            setting: Setting::default(),
            repeats: 10,
            k: None,
            seed: 0,
            evaluator: EvaluatorConfig::default(),
            search: SearchParams::default(),
            out: out.into(),
            threads: None,
            resume: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        if !(self.search.budget_factor.is_finite() && self.search.budget_factor > 0.0)
            || self.search.budget_cap == 0
        {
            return Err(Error::Config(
                "budget factor and cap must be positive".into(),
            ));
        }
        if self.search.beam_width == 0 {
            return Err(Error::Config("beam width must be positive".into()));
        }
        self.evaluator.validate()
    }

    /// Label used in comparison grids: the setting for SA, `lbs-n1` style
    /// for beam search.
    pub fn label(&self) -> String {
        match self.algorithm {
            Algorithm::Sa => self.setting.to_string(),
            Algorithm::Lbs => format!("lbs-{}", self.setting.neighborhood.tag()),
        }
    }

    /// Hash of everything that influences a single run's outcome. Repeats,
    /// the k list, paths and thread count are excluded so that extending a
    /// sweep keeps earlier runs valid.
    pub fn run_fingerprint(&self) -> u64 {
        #[derive(Serialize)]
        struct Key<'a> {
            algorithm: Algorithm,
            setting: &'a Setting,
            seed: u64,
            evaluator: &'a EvaluatorConfig,
            search: &'a SearchParams,
        }
        let key = Key {
            algorithm: self.algorithm,
            setting: &self.setting,
            seed: self.seed,
            evaluator: &self.evaluator,
            search: &self.search,
        };
        stable_hash(&serde_json::to_vec(&key).expect("config serializes"))
    }

    pub fn store_path(&self) -> PathBuf {
        sibling(&self.out, "runs.jsonl")
    }

    pub fn timing_path(&self) -> PathBuf {
        sibling(&self.out, "timing.csv")
    }
}

/// `results.csv` -> `results.<suffix>`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "results".into());
    out.with_file_name(format!("{stem}.{suffix}"))
}

/// What a sweep searches over: a ranking dataset or a closed-form landscape.
pub enum SweepInput {
    Data(SplitData),
    Landscape(Landscape),
}

impl SweepInput {
    pub fn load(dir: &Path, ranker: RankerKind) -> Result<Self> {
        match ranker {
            RankerKind::CoordinateAscent => Ok(SweepInput::Data(load_split_dir(dir)?)),
            RankerKind::Synthetic => {
                let path = dir.join(LANDSCAPE_FILE);
                let text = fs::read_to_string(&path).map_err(|e| {
                    if e.kind() == std::io::ErrorKind::NotFound {
                        Error::MissingFile(path.clone())
                    } else {
                        Error::io(&path, e)
                    }
                })?;
                let raw: Landscape = serde_json::from_str(&text)?;
                Ok(SweepInput::Landscape(Landscape::new(
                    raw.utilities,
                    raw.redundancy,
                )?))
            }
        }
    }

    pub fn fingerprint(&self) -> u64 {
        match self {
            SweepInput::Data(d) => dataset_fingerprint(d),
            SweepInput::Landscape(l) => {
                stable_hash(&serde_json::to_vec(l).expect("landscape serializes"))
            }
        }
    }

    pub fn evaluator(&self, cfg: &EvaluatorConfig) -> Result<Evaluator> {
        match self {
            SweepInput::Data(d) => Evaluator::from_config(Some(d), None, cfg),
            SweepInput::Landscape(l) => Evaluator::from_config(None, Some(l.clone()), cfg),
        }
    }
}

/// One persisted run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRun {
    pub dataset: String,
    pub config: String,
    pub k: usize,
    pub repeat: usize,
    pub record: RunRecord,
}

/// Reads every well-formed run from a store. A torn final line (from an
/// interrupted write) is ignored; corruption elsewhere is an error.
pub fn load_runs(path: &Path) -> Result<Vec<StoredRun>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(path, e))?;
    let mut runs = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(run) => runs.push(run),
            Err(_) if i + 1 == lines.len() => break,
            Err(e) => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("{}: {e}", path.display()),
                })
            }
        }
    }
    Ok(runs)
}

/// Appends runs as they finish, one flushed line each.
struct RunStore {
    out: Mutex<BufWriter<File>>,
    path: PathBuf,
}

impl RunStore {
    fn open(path: &Path, truncate: bool) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .append(!truncate)
            .truncate(truncate)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(RunStore {
            out: Mutex::new(BufWriter::new(file)),
            path: path.to_path_buf(),
        })
    }

    fn append(&self, run: &StoredRun) -> Result<()> {
        let line = serde_json::to_string(run)?;
        let mut out = self.out.lock().expect("store lock poisoned");
        writeln!(out, "{line}")
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub algorithm: Algorithm,
    pub neighborhood: String,
    pub scheme: String,
    pub mean_guide: f64,
    pub stderr_guide: f64,
    pub mean_test_ndcg10: f64,
    pub mean_test_map: f64,
    pub best_subset_hex: String,
    pub mean_evaluations: f64,
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub k: usize,
    pub label: String,
    pub mean_wall_ms: f64,
    pub total_wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub timing: Vec<TimingRow>,
    /// Runs of this sweep, ordered by (k, repeat).
    pub runs: Vec<StoredRun>,
    pub dataset_hash: u64,
    /// Runs taken from the store instead of executed.
    pub resumed: usize,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation over `sqrt(len)`; 0 for a single sample.
pub fn standard_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

/// Per-k aggregates of `runs` (any order); the best subset is the run with
/// the highest guide score, earliest repeat on ties.
pub fn aggregate(cfg: &SweepConfig, runs: &[StoredRun]) -> Vec<SweepRow> {
    let mut by_k: BTreeMap<usize, Vec<&StoredRun>> = BTreeMap::new();
    for run in runs {
        by_k.entry(run.k).or_default().push(run);
    }
    let scheme = match cfg.algorithm {
        Algorithm::Sa => cfg.setting.schedule.to_string(),
        Algorithm::Lbs => "none".to_string(),
    };
    by_k.into_iter()
        .map(|(k, mut group)| {
            group.sort_by_key(|r| r.repeat);
            let col = |f: fn(&RunRecord) -> f64| -> Vec<f64> {
                group.iter().map(|r| f(&r.record)).collect()
            };
            let guide = col(|r| r.best_guide_score);
            let best = group
                .iter()
                .fold(None::<&StoredRun>, |acc, r| match acc {
                    Some(b) if b.record.best_guide_score >= r.record.best_guide_score => Some(b),
                    _ => Some(r),
                })
                .expect("non-empty group");
            SweepRow {
                k,
                algorithm: cfg.algorithm,
                neighborhood: cfg.setting.neighborhood.to_string(),
                scheme: scheme.clone(),
                mean_guide: mean(&guide),
                stderr_guide: standard_error(&guide),
                mean_test_ndcg10: mean(&col(|r| r.best_test_ndcg10)),
                mean_test_map: mean(&col(|r| r.best_test_map)),
                best_subset_hex: best.record.best_subset.to_hex(),
                mean_evaluations: mean(&col(|r| r.evaluations_used as f64)),
                repeats: group.len(),
            }
        })
        .collect()
}

fn timing(cfg: &SweepConfig, runs: &[StoredRun]) -> Vec<TimingRow> {
    let mut by_k: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for run in runs {
        by_k.entry(run.k).or_default().push(run.record.wall_ms);
    }
    by_k.into_iter()
        .map(|(k, walls)| TimingRow {
            k,
            label: cfg.label(),
            mean_wall_ms: mean(&walls),
            total_wall_ms: walls.iter().sum(),
        })
        .collect()
}

/// Builds the per-run search configuration for `(k, repeat)`.
fn run_one(cfg: &SweepConfig, evaluator: &Evaluator, k: usize, seed: u64) -> Result<RunRecord> {
    let n = evaluator.n_features();
    let p = &cfg.search;
    let budget = default_budget(n, k, p.budget_factor, p.budget_cap)?;
    match cfg.algorithm {
        Algorithm::Sa => {
            let t0 = if p.calibrate_temperature {
                calibrate_initial_temperature(
                    k,
                    evaluator,
                    cfg.setting.neighborhood,
                    20,
                    0.8,
                    derive_seed(seed, &[u64::MAX]),
                )?
            } else {
                p.initial_temperature
            };
            let acfg = AnnealerConfig {
                scheme: p.scheme(cfg.setting.schedule, t0),
                neighborhood: cfg.setting.neighborhood,
                budget,
                budget_unit: p.budget_unit,
                max_iterations: None,
                accept_quota: p.accept_quota,
                max_steps_per_temp: p.max_steps_per_temp,
                progress_threshold: p.progress_threshold,
                // a calibrated T0 may land below the configured floor
                t_min: if p.calibrate_temperature {
                    p.t_min.min(t0 / 2.0)
                } else {
                    p.t_min
                },
                acceptance: p.acceptance,
                seed,
            };
            anneal(k, evaluator, &acfg)
        }
        Algorithm::Lbs => {
            let mut bcfg =
                BeamConfig::matched(budget, p.beam_width, cfg.setting.neighborhood, seed);
            bcfg.full_expansion = p.full_expansion;
            beam_search(k, evaluator, &bcfg)
        }
    }
}

/// Runs (or resumes) a sweep over an already-loaded input and writes the
/// results CSV, timing sidecar and run store.
pub fn run_sweep_on(cfg: &SweepConfig, input: &SweepInput) -> Result<SweepOutput> {
    cfg.validate()?;
    let evaluator = input.evaluator(&cfg.evaluator)?;
    let n = evaluator.n_features();
    let ks = match &cfg.k {
        Some(k) => k.clone(),
        None => KRange::full(n)?,
    };
    ks.check(n)?;
    if cfg.algorithm == Algorithm::Lbs {
        for &k in ks.values() {
            if crate::beam::binomial(n, k) < cfg.search.beam_width as u128 {
                return Err(Error::Config(format!(
                    "beam width {} exceeds the number of size-{k} subsets",
                    cfg.search.beam_width
                )));
            }
        }
    }

    let dataset_hash = input.fingerprint();
    let dataset = format!("{dataset_hash:016x}");
    let config = format!("{:016x}", cfg.run_fingerprint());

    if let Some(parent) = cfg.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let store_path = cfg.store_path();
    let mut done: BTreeMap<(usize, usize), StoredRun> = BTreeMap::new();
    let mut kept_lines = Vec::new();
    if cfg.resume {
        for run in load_runs(&store_path)? {
            if run.dataset == dataset && run.config == config {
                done.insert((run.k, run.repeat), run.clone());
            }
            kept_lines.push(run);
        }
    }
    // rewrite the store without a torn tail, then append
    let store = RunStore::open(&store_path, true)?;
    for run in &kept_lines {
        store.append(run)?;
    }

    let wanted: Vec<(usize, usize)> = ks
        .values()
        .iter()
        .flat_map(|&k| (0..cfg.repeats).map(move |r| (k, r)))
        .collect();
    let todo: Vec<(usize, usize)> = wanted
        .iter()
        .copied()
        .filter(|key| !done.contains_key(key))
        .collect();
    let resumed = wanted.len() - todo.len();

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let fresh: Vec<StoredRun> = pool.install(|| {
        todo.par_iter()
            .map(|&(k, repeat)| {
                let seed = derive_seed(cfg.seed, &[k as u64, repeat as u64]);
                let record = run_one(cfg, &evaluator, k, seed)?;
                let run = StoredRun {
                    dataset: dataset.clone(),
                    config: config.clone(),
                    k,
                    repeat,
                    record,
                };
                store.append(&run)?;
                Ok(run)
            })
            .collect::<Result<_>>()
    })?;
    for run in fresh {
        done.insert((run.k, run.repeat), run);
    }

    let runs: Vec<StoredRun> = wanted
        .iter()
        .map(|key| done.remove(key).expect("every wanted run finished"))
        .collect();
    let rows = aggregate(cfg, &runs);
    let timing = timing(cfg, &runs);
    write_results_csv(&cfg.out, dataset_hash, &rows)?;
    write_timing_csv(&cfg.timing_path(), &timing)?;
    Ok(SweepOutput {
        rows,
        timing,
        runs,
        dataset_hash,
        resumed,
    })
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let input = SweepInput::load(&cfg.data, cfg.evaluator.ranker)?;
    run_sweep_on(cfg, &input)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// `# rank-anneal-sweep v1 dataset=<hash>` followed by the fixed columns.
pub fn write_results_csv(path: &Path, dataset_hash: u64, rows: &[SweepRow]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "# {RESULTS_FORMAT} dataset={dataset_hash:016x}")
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.algorithm.to_string(),
            r.neighborhood.clone(),
            r.scheme.clone(),
            r.mean_guide.to_string(),
            r.stderr_guide.to_string(),
            r.mean_test_ndcg10.to_string(),
            r.mean_test_map.to_string(),
            r.best_subset_hex.clone(),
            r.mean_evaluations.to_string(),
            r.repeats.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_timing_csv(path: &Path, rows: &[TimingRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// A results CSV read back: its dataset hash and rows.
#[derive(Debug, Clone)]
pub struct ResultsTable {
    pub dataset_hash: Option<u64>,
    pub rows: Vec<SweepRow>,
}

pub fn read_results_csv(path: &Path) -> Result<ResultsTable> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    let mut dataset_hash = None;
    if let Some(first) = text.lines().next().and_then(|l| l.strip_prefix('#')) {
        let mut words = first.split_whitespace();
        if words.next() != Some("rank-anneal-sweep") || words.next() != Some("v1") {
            return Err(Error::Parse {
                line: 1,
                message: format!("{}: unsupported results format {first:?}", path.display()),
            });
        }
        dataset_hash = words
            .find_map(|w| w.strip_prefix("dataset="))
            .and_then(|h| u64::from_str_radix(h, 16).ok());
    }
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != RESULT_COLUMNS {
        return Err(Error::Parse {
            line: 2,
            message: format!("{}: unexpected columns {header:?}", path.display()),
        });
    }
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<SweepRow>, _>>()?;
    Ok(ResultsTable { dataset_hash, rows })
}

pub fn read_timing_csv(path: &Path) -> Result<Vec<TimingRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
