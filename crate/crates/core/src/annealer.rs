//! Simulated annealing over fixed-size feature subsets.
//!
//! One candidate neighbor per iteration. Improving candidates are always
//! accepted; the rest pass with the Metropolis probability `exp(dE / T)`.
//! The temperature advances one step of the cooling scheme once enough moves
//! were accepted at the current temperature (or a step cap is hit), and a
//! stagnation counter ("progress") sends the search back to the best state
//! after too many iterations without a new best.

use std::collections::HashSet;
use std::fmt;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{Evaluator, ScoreCard};
use crate::record::{RunRecord, TraceRow};
use crate::rng::run_rng;
use crate::subset::{random_subset, FeatureSubset, NeighborhoodKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SchemeKind {
    /// `T_t = T0 * alpha^t`
    Geometric { alpha: f64 },
    /// `T_t = T0 / ln(t + t0)`
    Logarithmic { t0: u32 },
    /// `T_t = T0 / (1 + t)`
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoolingScheme {
    pub kind: SchemeKind,
    pub initial_temperature: f64,
}

pub const DEFAULT_INITIAL_TEMPERATURE: f64 = 0.05;
pub const DEFAULT_ALPHA: f64 = 0.9;
pub const DEFAULT_LOG_OFFSET: u32 = 10;

impl CoolingScheme {
    pub fn geometric(initial_temperature: f64, alpha: f64) -> Self {
        CoolingScheme {
            kind: SchemeKind::Geometric { alpha },
            initial_temperature,
        }
    }

    pub fn logarithmic(initial_temperature: f64, t0: u32) -> Self {
        CoolingScheme {
            kind: SchemeKind::Logarithmic { t0 },
            initial_temperature,
        }
    }

    pub fn fast(initial_temperature: f64) -> Self {
        CoolingScheme {
            kind: SchemeKind::Fast,
            initial_temperature,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial_temperature.is_finite() && self.initial_temperature > 0.0) {
            return Err(Error::Config("initial temperature must be positive".into()));
        }
        match self.kind {
            SchemeKind::Geometric { alpha } if !(alpha > 0.0 && alpha <= 1.0) => {
                Err(Error::Config(format!("alpha {alpha} outside (0, 1]")))
            }
            SchemeKind::Logarithmic { t0 } if t0 < 1 => {
                Err(Error::Config("logarithmic offset t0 must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Temperature after `t` updates.
    pub fn temperature_at(&self, t: u64) -> Result<f64> {
        let t0 = self.initial_temperature;
        match self.kind {
            SchemeKind::Geometric { alpha } => Ok(t0 * alpha.powf(t as f64)),
            SchemeKind::Logarithmic { t0: offset } => {
                let arg = t as f64 + offset as f64;
                if arg < 2.0 {
                    return Err(Error::Config(format!(
                        "logarithmic schedule undefined at t + t0 = {arg} < 2"
                    )));
                }
                Ok(t0 / arg.ln())
            }
            SchemeKind::Fast => Ok(t0 / (1.0 + t as f64)),
        }
    }

    /// `s1`, `s2`, `s3` for geometric, logarithmic, fast.
    pub fn tag(&self) -> &'static str {
        match self.kind {
            SchemeKind::Geometric { .. } => "s1",
            SchemeKind::Logarithmic { .. } => "s2",
            SchemeKind::Fast => "s3",
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            SchemeKind::Geometric { .. } => "geometric",
            SchemeKind::Logarithmic { .. } => "logarithmic",
            SchemeKind::Fast => "fast",
        }
    }
}

impl fmt::Display for CoolingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Acceptance probability of a non-improving move.
pub fn metropolis(delta_e: f64, temperature: f64) -> Result<f64> {
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(Error::Config(format!(
            "temperature {temperature} must be positive"
        )));
    }
    Ok((delta_e / temperature).exp().min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcceptanceMode {
    Metropolis,
    /// Non-improving moves are never accepted and no uniform is drawn:
    /// first-improvement hill climbing on the same random stream.
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetUnit {
    /// Each distinct subset scored within a run costs one unit; revisits are
    /// free (they are memo hits).
    DistinctStates,
    /// Every candidate scored costs one unit.
    EvaluatorCalls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealerConfig {
    pub scheme: CoolingScheme,
    pub neighborhood: NeighborhoodKind,
    /// Scoring budget, initial state included.
    pub budget: usize,
    pub budget_unit: BudgetUnit,
    /// Hard cap on iterations; defaults to `20 * budget`.
    pub max_iterations: Option<usize>,
    /// Accepted moves at one temperature that trigger a cooling step.
    pub accept_quota: usize,
    pub max_steps_per_temp: usize,
    /// Iterations without a new best before restarting from the best state.
    pub progress_threshold: Option<usize>,
    pub t_min: f64,
    pub acceptance: AcceptanceMode,
    pub seed: u64,
}

impl Default for AnnealerConfig {
    fn default() -> Self {
        AnnealerConfig {
            scheme: CoolingScheme::fast(DEFAULT_INITIAL_TEMPERATURE),
            neighborhood: NeighborhoodKind::Swap,
            budget: DEFAULT_BUDGET_CAP,
            budget_unit: BudgetUnit::DistinctStates,
            max_iterations: None,
            accept_quota: 10,
            max_steps_per_temp: 50,
            progress_threshold: Some(25),
            t_min: 1e-4,
            acceptance: AcceptanceMode::Metropolis,
            seed: 0,
        }
    }
}

impl AnnealerConfig {
    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        if self.budget == 0 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        if self.accept_quota == 0 || self.max_steps_per_temp == 0 {
            return Err(Error::Config(
                "temperature length parameters must be positive".into(),
            ));
        }
        if self.progress_threshold == Some(0) {
            return Err(Error::Config("progress threshold must be positive".into()));
        }
        if self.t_min.is_nan() || self.t_min <= 0.0 {
            return Err(Error::Config("t_min must be positive".into()));
        }
        if self.t_min >= self.scheme.initial_temperature {
            return Err(Error::Config(
                "t_min must be below the initial temperature".into(),
            ));
        }
        // surfaces an undefined logarithmic start early
        self.scheme.temperature_at(0)?;
        Ok(())
    }

    pub fn iteration_cap(&self) -> usize {
        self.max_iterations
            .unwrap_or_else(|| self.budget.saturating_mul(20))
    }
}

pub const DEFAULT_BUDGET_FACTOR: f64 = 2.0;
pub const DEFAULT_BUDGET_CAP: usize = 1000;

/// `min(ceil(c * k * (n - k)), cap)`: proportional to the swap-neighborhood
/// size of a state.
pub fn default_budget(n: usize, k: usize, c: f64, cap: usize) -> Result<usize> {
    if k == 0 || k >= n {
        return Err(Error::SubsetSize { n, k });
    }
    if c.is_nan() || c <= 0.0 {
        return Err(Error::Config("budget factor must be positive".into()));
    }
    let raw = (c * (k * (n - k)) as f64).ceil() as usize;
    Ok(raw.min(cap).max(1))
}

/// Picks an initial temperature at which the median worsening move among
/// `samples` random transitions is accepted with probability `target`.
/// Falls back to [`DEFAULT_INITIAL_TEMPERATURE`] when no sampled move worsens.
pub fn calibrate_initial_temperature(
    k: usize,
    evaluator: &Evaluator,
    neighborhood: NeighborhoodKind,
    samples: usize,
    target: f64,
    seed: u64,
) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Config("target acceptance must be in (0, 1)".into()));
    }
    let n = evaluator.n_features();
    let mut rng = run_rng(seed);
    let mut worse = Vec::new();
    for _ in 0..samples {
        let from = random_subset(n, k, &mut rng)?;
        let to = neighborhood.neighbor(&from, &mut rng);
        let delta = evaluator.guide_score(&to)? - evaluator.guide_score(&from)?;
        if delta < 0.0 {
            worse.push(-delta);
        }
    }
    if worse.is_empty() {
        return Ok(DEFAULT_INITIAL_TEMPERATURE);
    }
    worse.sort_by(f64::total_cmp);
    let mid = worse.len() / 2;
    let median = if worse.len() % 2 == 0 {
        (worse[mid - 1] + worse[mid]) / 2.0
    } else {
        worse[mid]
    };
    Ok(-median / target.ln())
}

struct Scored {
    subset: FeatureSubset,
    card: ScoreCard,
}

/// Runs one annealing search for subsets of size `k`.
pub fn anneal(k: usize, evaluator: &Evaluator, cfg: &AnnealerConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let started = Instant::now();
    let n = evaluator.n_features();
    let mut rng = run_rng(cfg.seed);
    let mut seen: HashSet<FeatureSubset> = HashSet::new();
    let mut used = 0usize;
    let mut calls = 0usize;
    let mut score = |subset: &FeatureSubset, used: &mut usize| -> Result<ScoreCard> {
        calls += 1;
        let fresh = seen.insert(subset.clone());
        if fresh || cfg.budget_unit == BudgetUnit::EvaluatorCalls {
            *used += 1;
        }
        evaluator.evaluate(subset)
    };

    let start = random_subset(n, k, &mut rng)?;
    let start_card = score(&start, &mut used)?;
    let initial_guide_score = start_card.guide_score;
    let mut current = Scored {
        subset: start.clone(),
        card: start_card.clone(),
    };
    let mut best = Scored {
        subset: start,
        card: start_card,
    };

    let mut updates = 0u64;
    let mut temperature = cfg.scheme.temperature_at(0)?;
    let mut accepted_here = 0usize;
    let mut steps_here = 0usize;
    let mut stagnation = 0usize;
    let mut trace = Vec::new();
    let cap = cfg.iteration_cap();

    for iteration in 0..cap {
        if used >= cfg.budget {
            break;
        }
        if cfg.acceptance == AcceptanceMode::Metropolis && temperature <= cfg.t_min {
            break;
        }
        let next = cfg.neighborhood.neighbor(&current.subset, &mut rng);
        let next_card = score(&next, &mut used)?;
        let delta = next_card.guide_score - current.card.guide_score;

        let (accepted, probability, draw) = if delta > 0.0 {
            (true, None, None)
        } else {
            match cfg.acceptance {
                AcceptanceMode::Metropolis => {
                    let p = metropolis(delta, temperature)?;
                    let u: f64 = rng.gen();
                    (p > u, Some(p), Some(u))
                }
                AcceptanceMode::Greedy => (false, None, None),
            }
        };

        let mut improved = false;
        if accepted {
            current = Scored {
                subset: next,
                card: next_card,
            };
            if current.card.guide_score > best.card.guide_score {
                best = Scored {
                    subset: current.subset.clone(),
                    card: current.card.clone(),
                };
                improved = true;
            }
        }

        let used_temperature = temperature;
        steps_here += 1;
        if accepted {
            accepted_here += 1;
        }
        if accepted_here >= cfg.accept_quota || steps_here >= cfg.max_steps_per_temp {
            updates += 1;
            temperature = cfg.scheme.temperature_at(updates)?;
            accepted_here = 0;
            steps_here = 0;
        }

        let mut restarted = false;
        if improved {
            stagnation = 0;
        } else {
            stagnation += 1;
            if cfg.progress_threshold.is_some_and(|th| stagnation >= th) {
                current = Scored {
                    subset: best.subset.clone(),
                    card: best.card.clone(),
                };
                stagnation = 0;
                restarted = true;
            }
        }

        trace.push(TraceRow {
            iteration,
            temperature: Some(used_temperature),
            current: current.card.guide_score,
            best: best.card.guide_score,
            accepted,
            restarted,
            acceptance_probability: probability,
            uniform_draw: draw,
        });
    }

    Ok(RunRecord {
        k,
        seed: cfg.seed,
        best_guide_score: best.card.guide_score,
        best_test_score: best.card.test_score,
        best_test_ndcg10: best.card.test_ndcg10,
        best_test_map: best.card.test_map,
        best_subset: best.subset,
        initial_guide_score,
        trace,
        evaluations_used: used,
        evaluator_calls: calls,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}
