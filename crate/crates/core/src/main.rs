use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use rank_anneal::compare::{compare_files, write_comparison};
use rank_anneal::evaluator::{EvaluatorConfig, RankerKind};
use rank_anneal::metrics::Metric;
use rank_anneal::subset::FeatureSubset;
use rank_anneal::sweep::{
    run_sweep, Algorithm, KRange, SearchParams, Setting, SweepConfig, SweepInput,
};
use rank_anneal::synth::make_synthetic_with;
use rank_anneal::{data::Split, Error, Result};

/// Feature selection for learning-to-rank by simulated annealing.
#[derive(Debug, Parser)]
#[command(name = "rank-anneal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every k in a range, several repeats each, and aggregate.
    Sweep(SweepArgs),
    /// Generate a synthetic corpus with a planted feature subset.
    Synth(SynthArgs),
    /// Score one feature subset.
    Eval(EvalArgs),
    /// Merge two or more sweep results into a comparison grid.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct EvaluatorArgs {
    /// Ranker: coordinate_ascent or synthetic (reads landscape.json).
    #[arg(long)]
    ranker: Option<RankerKind>,
    /// Guide metric, e.g. ndcg@10, map, map@10.
    #[arg(long)]
    metric: Option<Metric>,
    /// Split that steers the search: validation or test.
    #[arg(long)]
    guide_split: Option<Split>,
}

impl EvaluatorArgs {
    fn apply(&self, cfg: &mut EvaluatorConfig) {
        if let Some(r) = self.ranker {
            cfg.ranker = r;
        }
        if let Some(m) = self.metric {
            cfg.guide_metric = m;
        }
        if let Some(s) = self.guide_split {
            cfg.guide_split = s;
        }
    }
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// JSON or TOML file with sweep settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    algo: Option<Algorithm>,
    /// n1s1..n2s3 (n1 swap, n2 insertion; s1 geometric, s2 logarithmic, s3 fast).
    #[arg(long)]
    setting: Option<Setting>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Subset sizes, e.g. 1..45 or 4,8,16,32,45. Default 1..n-1.
    #[arg(long)]
    k: Option<KRange>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Ignore runs already in the run store.
    #[arg(long)]
    fresh: bool,
    #[command(flatten)]
    evaluator: EvaluatorArgs,
    /// Budget factor c in min(ceil(c*k*(n-k)), cap).
    #[arg(long)]
    budget_factor: Option<f64>,
    #[arg(long)]
    budget_cap: Option<usize>,
    /// Initial temperature.
    #[arg(long)]
    t0: Option<f64>,
    /// Calibrate T0 from sampled transitions.
    #[arg(long)]
    calibrate_t0: bool,
    /// Iterations without improvement before restarting from the best state.
    #[arg(long, conflicts_with = "no_progress")]
    progress: Option<usize>,
    #[arg(long)]
    no_progress: bool,
    #[arg(long)]
    beam_width: Option<usize>,
    /// Beam search expands every neighbor of every pool member.
    #[arg(long)]
    full_expansion: bool,
}

/// Sweep settings as read from a config file; every field optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SweepFile {
    data: Option<PathBuf>,
    algo: Option<Algorithm>,
    setting: Option<Setting>,
    repeats: Option<usize>,
    k: Option<KRange>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
    resume: Option<bool>,
    evaluator: Option<EvaluatorConfig>,
    search: Option<SearchParams>,
}

fn read_config_file(path: &Path) -> Result<SweepFile> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let is_toml = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let parsed = if is_toml {
        toml::from_str(&text).map_err(|e| e.to_string())
    } else {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

impl SweepArgs {
    fn into_config(self) -> Result<SweepConfig> {
        let file = match &self.config {
            Some(p) => read_config_file(p)?,
            None => SweepFile::default(),
        };
        let data = self
            .data
            .or(file.data)
            .ok_or_else(|| Error::Config("--data is required".into()))?;
        let out = self
            .out
            .or(file.out)
            .ok_or_else(|| Error::Config("--out is required".into()))?;
        let mut cfg = SweepConfig::new(data, out);
        cfg.algorithm = self.algo.or(file.algo).unwrap_or(cfg.algorithm);
        cfg.setting = self.setting.or(file.setting).unwrap_or(cfg.setting);
        cfg.repeats = self.repeats.or(file.repeats).unwrap_or(cfg.repeats);
        cfg.k = self.k.or(file.k);
        cfg.seed = self.seed.or(file.seed).unwrap_or(cfg.seed);
        cfg.threads = self.threads.or(file.threads);
        cfg.resume = !self.fresh && file.resume.unwrap_or(true);
        cfg.evaluator = file.evaluator.unwrap_or_default();
        self.evaluator.apply(&mut cfg.evaluator);

        let mut search = file.search.unwrap_or_default();
        if let Some(c) = self.budget_factor {
            search.budget_factor = c;
        }
        if let Some(c) = self.budget_cap {
            search.budget_cap = c;
        }
        if let Some(t) = self.t0 {
            search.initial_temperature = t;
        }
        if self.calibrate_t0 {
            search.calibrate_temperature = true;
        }
        if let Some(p) = self.progress {
            search.progress_threshold = Some(p);
        }
        if self.no_progress {
            search.progress_threshold = None;
        }
        if let Some(w) = self.beam_width {
            search.beam_width = w;
        }
        if self.full_expansion {
            search.full_expansion = true;
        }
        cfg.search = search;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    queries: usize,
    #[arg(long, default_value_t = rank_anneal::synth::DEFAULT_DOCS_PER_QUERY)]
    docs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    /// Subset as hex (first feature is the most significant bit) or `all`.
    #[arg(long)]
    subset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    evaluator: EvaluatorArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Results CSVs written by `sweep`.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn sweep(args: SweepArgs) -> Result<()> {
    let cfg = args.into_config()?;
    let output = run_sweep(&cfg)?;
    eprintln!(
        "{} rows, {} runs ({} resumed) -> {}",
        output.rows.len(),
        output.runs.len(),
        output.resumed,
        cfg.out.display()
    );
    for row in &output.rows {
        println!(
            "k={:<3} mean_guide={:.4} stderr={:.4} test_ndcg10={:.4} best={}",
            row.k, row.mean_guide, row.stderr_guide, row.mean_test_ndcg10, row.best_subset_hex
        );
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let corpus = make_synthetic_with(args.n, args.queries, args.docs, args.seed)?;
    corpus.write(&args.out)?;
    println!(
        "wrote {} queries with {} features to {} (planted subset {})",
        args.queries,
        args.n,
        args.out.display(),
        corpus.truth.planted_hex
    );
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let mut cfg = EvaluatorConfig {
        seed: args.seed,
        ..EvaluatorConfig::default()
    };
    args.evaluator.apply(&mut cfg);
    let input = SweepInput::load(&args.data, cfg.ranker)?;
    let evaluator = input.evaluator(&cfg)?;
    let n = evaluator.n_features();
    let subset = if args.subset.eq_ignore_ascii_case("all") {
        FeatureSubset::all(n)
    } else {
        FeatureSubset::from_hex(n, &args.subset)?
    };
    let card = evaluator.evaluate(&subset)?;
    println!(
        "subset       {} ({} of {n} features)",
        subset.to_hex(),
        subset.count()
    );
    println!(
        "guide        {} {} = {}",
        cfg.guide_split, cfg.guide_metric, card.guide_score
    );
    println!("test         {} = {}", cfg.guide_metric, card.test_score);
    println!("test ndcg@10 = {}", card.test_ndcg10);
    println!("test map     = {}", card.test_map);
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    let c = compare_files(&args.inputs)?;
    let [grid, long, wall] = write_comparison(&args.out, &c)?;
    for w in &c.wall {
        match w.total_wall_ms {
            Some(ms) => println!("{:<10} total wall {:.1} ms", w.setting, ms),
            None => println!("{:<10} total wall unknown", w.setting),
        }
    }
    eprintln!(
        "wrote {}, {}, {}",
        grid.display(),
        long.display(),
        wall.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Synth(a) => synth(a),
        Command::Eval(a) => eval(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
