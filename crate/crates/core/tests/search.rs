use std::collections::HashSet;

use rand::Rng;

use rank_anneal::annealer::{
    anneal, metropolis, AcceptanceMode, AnnealerConfig, BudgetUnit, CoolingScheme,
};
use rank_anneal::beam::{beam_search, binomial, BeamConfig};
use rank_anneal::evaluator::{Evaluator, Landscape};
use rank_anneal::rng::run_rng;
use rank_anneal::subset::{random_subset, FeatureSubset, NeighborhoodKind};

fn evaluator() -> Evaluator {
    Evaluator::synthetic(Landscape::plateau_trap())
}

/// First-improvement hill climbing written independently of the annealer:
/// same seed, same draw order, distinct-state budget.
fn greedy_oracle(
    landscape: &Landscape,
    k: usize,
    budget: usize,
    max_iterations: usize,
    neighborhood: NeighborhoodKind,
    seed: u64,
) -> (FeatureSubset, f64) {
    let mut rng = run_rng(seed);
    let mut current = random_subset(landscape.n_features(), k, &mut rng).unwrap();
    let mut current_score = landscape.score(&current);
    let mut seen = HashSet::from([current.clone()]);
    for _ in 0..max_iterations {
        if seen.len() >= budget {
            break;
        }
        let next = neighborhood.neighbor(&current, &mut rng);
        let s = landscape.score(&next);
        seen.insert(next.clone());
        if s > current_score {
            current = next;
            current_score = s;
        }
    }
    (current, current_score)
}

#[test]
fn hill_climbing_mode_matches_independent_oracle() {
    let landscape = Landscape::plateau_trap();
    let ev = Evaluator::synthetic(landscape.clone());
    for nb in [NeighborhoodKind::Swap, NeighborhoodKind::Insertion] {
        for seed in 0..50 {
            let cfg = AnnealerConfig {
                budget: 64,
                acceptance: AcceptanceMode::Greedy,
                neighborhood: nb,
                seed,
                ..Default::default()
            };
            let rec = anneal(4, &ev, &cfg).unwrap();
            let (subset, score) = greedy_oracle(&landscape, 4, 64, cfg.iteration_cap(), nb, seed);
            assert_eq!(rec.best_subset, subset, "seed {seed} {nb}");
            assert_eq!(rec.best_guide_score, score);
        }
    }
}

#[test]
fn beam_width_one_equals_hill_climbing() {
    let ev = evaluator();
    for nb in [NeighborhoodKind::Swap, NeighborhoodKind::Insertion] {
        for seed in 0..30 {
            let steps = 40;
            let beam = beam_search(
                4,
                &ev,
                &BeamConfig {
                    width: 1,
                    steps,
                    neighborhood: nb,
                    seed,
                    full_expansion: false,
                },
            )
            .unwrap();
            let hc = anneal(
                4,
                &ev,
                &AnnealerConfig {
                    budget: usize::MAX,
                    max_iterations: Some(steps),
                    acceptance: AcceptanceMode::Greedy,
                    neighborhood: nb,
                    seed,
                    ..Default::default()
                },
            )
            .unwrap();
            assert_eq!(beam.best_subset, hc.best_subset, "seed {seed}");
            assert_eq!(beam.best_guide_score, hc.best_guide_score);
            let beam_curve: Vec<f64> = beam.trace.iter().map(|t| t.best).collect();
            let hc_curve: Vec<f64> = hc.trace.iter().map(|t| t.best).collect();
            assert_eq!(beam_curve, hc_curve);
        }
    }
}

#[test]
fn beam_call_accounting() {
    for (q, steps) in [(1, 5), (3, 7), (10, 4)] {
        let ev = evaluator();
        let rec = beam_search(
            4,
            &ev,
            &BeamConfig {
                width: q,
                steps,
                neighborhood: NeighborhoodKind::Swap,
                seed: 9,
                full_expansion: false,
            },
        )
        .unwrap();
        assert_eq!(rec.evaluator_calls, q + q * steps);
        assert_eq!(ev.calls() as usize, q + q * steps);
        assert_eq!(rec.trace.len(), steps);
        assert!(rec
            .trace
            .iter()
            .all(|t| !t.restarted && t.temperature.is_none()));
        assert!(rec.trace.windows(2).all(|w| w[0].best <= w[1].best));
    }
}

#[test]
fn exhaustive_pool_holds_the_optimum() {
    let ev = Evaluator::synthetic(Landscape::two_basin());
    let (best, _) = Landscape::two_basin().exhaustive_optimum(4);
    let q = binomial(12, 4) as usize;
    let rec = beam_search(
        4,
        &ev,
        &BeamConfig {
            width: q,
            steps: 1,
            neighborhood: NeighborhoodKind::Swap,
            seed: 0,
            full_expansion: false,
        },
    )
    .unwrap();
    assert_eq!(rec.initial_guide_score, best);
    assert_eq!(rec.best_guide_score, best);
    let too_wide = BeamConfig {
        width: q + 1,
        ..BeamConfig::matched(10, 1, NeighborhoodKind::Swap, 0)
    };
    assert!(beam_search(4, &ev, &too_wide).is_err());
}

#[test]
fn full_expansion_scores_every_neighbor() {
    let ev = evaluator();
    let rec = beam_search(
        4,
        &ev,
        &BeamConfig {
            width: 2,
            steps: 1,
            neighborhood: NeighborhoodKind::Swap,
            seed: 1,
            full_expansion: true,
        },
    )
    .unwrap();
    assert_eq!(rec.evaluator_calls, 2 + 2 * 4 * 8);
}

#[test]
fn trace_invariants() {
    let ev = Evaluator::synthetic(Landscape::two_basin());
    for seed in 0..40 {
        for nb in [NeighborhoodKind::Swap, NeighborhoodKind::Insertion] {
            let rec = anneal(
                4,
                &ev,
                &AnnealerConfig {
                    budget: 200,
                    neighborhood: nb,
                    progress_threshold: Some(5),
                    scheme: CoolingScheme::geometric(0.2, 0.9),
                    seed,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(rec.best_guide_score >= rec.initial_guide_score);
            let mut prev_best = rec.initial_guide_score;
            for row in &rec.trace {
                assert!(row.best >= prev_best);
                prev_best = row.best;
                if row.restarted {
                    assert_eq!(row.current, row.best);
                }
                if let (Some(p), Some(u)) = (row.acceptance_probability, row.uniform_draw) {
                    assert_eq!(row.accepted, p > u);
                    if row.accepted {
                        assert!(p >= u);
                    }
                }
            }
            assert_eq!(rec.trace.last().unwrap().best, rec.best_guide_score);
            assert!(rec.evaluations_used <= 200);
        }
    }
}

#[test]
fn restarts_happen_and_return_to_best() {
    let ev = Evaluator::synthetic(Landscape::two_basin());
    let mut restarts = 0;
    for seed in 0..20 {
        let rec = anneal(
            4,
            &ev,
            &AnnealerConfig {
                budget: 300,
                progress_threshold: Some(3),
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        restarts += rec.trace.iter().filter(|t| t.restarted).count();
    }
    assert!(restarts > 0);
}

#[test]
fn unit_quota_cools_every_iteration() {
    let ev = evaluator();
    for scheme in [
        CoolingScheme::geometric(0.05, 0.9),
        CoolingScheme::logarithmic(0.05, 10),
        CoolingScheme::fast(0.05),
    ] {
        let rec = anneal(
            4,
            &ev,
            &AnnealerConfig {
                scheme,
                budget: 60,
                accept_quota: 1,
                max_steps_per_temp: 1,
                t_min: 1e-9,
                seed: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!rec.trace.is_empty());
        for row in &rec.trace {
            let expected = scheme.temperature_at(row.iteration as u64).unwrap();
            assert_eq!(row.temperature, Some(expected));
        }
    }
}

#[test]
fn evaluator_call_budget_is_exact() {
    let ev = evaluator();
    let rec = anneal(
        4,
        &ev,
        &AnnealerConfig {
            budget: 37,
            budget_unit: BudgetUnit::EvaluatorCalls,
            t_min: 1e-12,
            seed: 5,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(rec.evaluations_used, 37);
    assert_eq!(rec.evaluator_calls, 37);
    assert_eq!(rec.trace.len(), 36);
}

#[test]
fn distinct_state_budget_counts_new_subsets() {
    let ev = evaluator();
    let rec = anneal(
        4,
        &ev,
        &AnnealerConfig {
            budget: 64,
            seed: 11,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(rec.evaluations_used, 64);
    assert!(rec.evaluator_calls >= 64);
}

#[test]
fn metropolis_empirical_rate() {
    let mut rng = run_rng(2024);
    for (delta, t) in [(-0.1, 1.0), (-0.02, 0.05), (-0.5, 0.3)] {
        let p = metropolis(delta, t).unwrap();
        let trials = 100_000;
        let accepted = (0..trials).filter(|_| p > rng.gen::<f64>()).count();
        let rate = accepted as f64 / trials as f64;
        assert!(
            (rate - (delta / t).exp()).abs() < 0.02,
            "{delta}/{t}: {rate}"
        );
    }
    assert_eq!(metropolis(0.0, 0.7).unwrap(), 1.0);
    assert!(metropolis(-0.1, 0.001).unwrap() < 1e-40);
    assert!(metropolis(-0.1, 0.0).is_err());
}

#[test]
fn invalid_sizes_are_rejected() {
    let ev = evaluator();
    for k in [0, 12, 13] {
        assert!(anneal(k, &ev, &AnnealerConfig::default()).is_err());
        assert!(beam_search(
            k,
            &ev,
            &BeamConfig::matched(10, 2, NeighborhoodKind::Swap, 0)
        )
        .is_err());
    }
    let zero_budget = AnnealerConfig {
        budget: 0,
        ..Default::default()
    };
    assert!(anneal(4, &ev, &zero_budget).is_err());
}

#[test]
fn runs_are_reproducible() {
    let ev = evaluator();
    let cfg = AnnealerConfig {
        budget: 64,
        seed: 77,
        ..Default::default()
    };
    let a = anneal(4, &ev, &cfg).unwrap();
    let b = anneal(4, &ev, &cfg).unwrap();
    assert_eq!(a.best_subset, b.best_subset);
    assert_eq!(a.trace, b.trace);
}
