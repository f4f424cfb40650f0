mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use common::{bfs_len, blocks_problem, grid_problem};
use inverse_plan::domains::{generate_gridworld, load_bundle};
use inverse_plan::pddl::{parse_domain, parse_problem, GoalSpec, ProblemDef, State};
use inverse_plan::planner::{
    astar, h_add, probabilistic_astar, sample_frontier, selection_probabilities, Budget, Heuristic, HeuristicKind,
    PartialPlan,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EMPTY_5X5: &str = "
s....
.....
.....
.....
...A.
";

fn goal<'a>(p: &'a ProblemDef, label: &str) -> &'a GoalSpec {
    &p.goals[p.goal_index(label).unwrap()]
}

fn replays(problem: &ProblemDef, start: &State, plan: &PartialPlan) -> State {
    let mut s = start.clone();
    for step in &plan.steps {
        assert_eq!(step.state, s, "expected state drifted");
        s = problem.apply(&s, &step.action).expect("plan step applies");
    }
    s
}

#[test]
fn manhattan_distance_on_an_empty_grid() {
    let (_, p) = grid_problem(EMPTY_5X5);
    let h = Heuristic::build(HeuristicKind::Manhattan, &p).unwrap();
    assert_eq!(h.evaluate(&p, &p.init, goal(&p, "a")), 7.0);
}

#[test]
fn astar_finds_the_shortest_path_on_an_empty_grid() {
    let (map, p) = grid_problem(EMPTY_5X5);
    let h = Heuristic::build(HeuristicKind::Manhattan, &p).unwrap();
    let r = astar(&p, &p.init, 1, goal(&p, "a"), &h, Budget::Unlimited);
    assert!(r.stats.found_goal && r.plan.complete);
    assert_eq!(Some(r.plan.len()), bfs_len(&map, 'A'));
    assert_eq!(r.plan.len(), 7);
    let end = replays(&p, &p.init, &r.plan);
    assert!(p.satisfies(&end, goal(&p, "a")));
}

#[test]
fn astar_matches_bfs_on_random_gridworlds() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..40 {
        let (w, h) = (2 + i % 6, 2 + (i / 6) % 6);
        let Ok(map) = generate_gridworld(w, h, 0.25, 1, &mut rng) else { continue };
        let (map, p) = grid_problem(&map.to_ascii());
        let heur = Heuristic::build(HeuristicKind::Manhattan, &p).unwrap();
        let r = astar(&p, &p.init, 1, &p.goals[0], &heur, Budget::Unlimited);
        assert_eq!(Some(r.plan.len()), bfs_len(&map, 'A'), "map\n{}", map.to_ascii());
    }
}

#[test]
fn start_state_already_at_the_goal() {
    let (_, p) = grid_problem("sA");
    let heur = Heuristic::build(HeuristicKind::Manhattan, &p).unwrap();
    let at_goal = {
        let r = astar(&p, &p.init, 1, &p.goals[0], &heur, Budget::Unlimited);
        replays(&p, &p.init, &r.plan)
    };
    let r = astar(&p, &at_goal, 1, &p.goals[0], &heur, Budget::Unlimited);
    assert!(r.plan.is_empty() && r.plan.complete);
    assert!(r.stats.nodes_expanded <= 1);
}

#[test]
fn zero_budget_gives_an_incomplete_empty_plan() {
    let (_, p) = grid_problem(EMPTY_5X5);
    let heur = Heuristic::build(HeuristicKind::Manhattan, &p).unwrap();
    let r = astar(&p, &p.init, 1, &p.goals[0], &heur, Budget::Limited(0));
    assert!(r.plan.is_empty() && !r.plan.complete);
    assert_eq!(r.stats.nodes_expanded, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let r = probabilistic_astar(&p, &p.init, 1, &p.goals[0], &heur, Budget::Limited(0), 0.1, &mut rng);
    assert!(r.plan.is_empty() && !r.plan.complete);
}

#[test]
fn budgeted_search_never_overspends_and_replays() {
    let (_, p) = grid_problem(EMPTY_5X5);
    let heur = Heuristic::build(HeuristicKind::Manhattan, &p).unwrap();
    for seed in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let budget = seed % 12;
        let r = probabilistic_astar(&p, &p.init, 1, &p.goals[0], &heur, Budget::Limited(budget), 0.5, &mut rng);
        assert!(r.stats.nodes_expanded <= budget);
        let end = replays(&p, &p.init, &r.plan);
        assert_eq!(r.plan.complete, p.satisfies(&end, &p.goals[0]));
    }
}

#[test]
fn tiny_gamma_reproduces_deterministic_astar() {
    let (_, p) = grid_problem(EMPTY_5X5);
    let heur = Heuristic::build(HeuristicKind::Manhattan, &p).unwrap();
    let det = astar(&p, &p.init, 1, &p.goals[0], &heur, Budget::Unlimited);
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = probabilistic_astar(&p, &p.init, 1, &p.goals[0], &heur, Budget::Unlimited, 1e-9, &mut rng);
        assert_eq!(r.plan, det.plan);
        assert_eq!(r.stats, det.stats);
    }
}

#[test]
fn equal_f_frontier_nodes_are_chosen_evenly() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 4000;
    let hits = (0..n).filter(|_| sample_frontier(&[3.0, 3.0], 0.1, &mut rng) == 0).count() as f64;
    let expected = n as f64 / 2.0;
    let chi2 = 2.0 * (hits - expected).powi(2) / expected;
    // 99th percentile of chi-squared with one degree of freedom.
    assert!(chi2 < 6.635, "chi2 = {chi2}");
}

#[test]
fn softmax_selection_matches_closed_form() {
    let p = selection_probabilities(&[1.0, 2.0, 2.0], 0.5);
    let w = [1.0, (-2.0f64).exp(), (-2.0f64).exp()];
    let z: f64 = w.iter().sum();
    for (a, b) in p.iter().zip(w) {
        assert!((a - b / z).abs() < 1e-15);
    }
}

#[test]
fn noisy_search_is_mostly_optimal_on_the_empty_grid() {
    let (_, p) = grid_problem(EMPTY_5X5);
    let heur = Heuristic::build(HeuristicKind::Manhattan, &p).unwrap();
    let mut lengths = BTreeMap::new();
    for seed in 0..500 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = probabilistic_astar(&p, &p.init, 1, &p.goals[0], &heur, Budget::Unlimited, 0.1, &mut rng);
        assert!(r.plan.complete);
        *lengths.entry(r.plan.len()).or_insert(0usize) += 1;
    }
    // Manhattan is exact on an empty grid, so every frontier node off a
    // shortest path has f at least 2 above the minimum.
    assert_eq!(lengths.keys().next(), Some(&7));
    assert!(lengths[&7] >= 490, "{lengths:?}");
}

#[test]
fn noisy_search_stays_within_ten_times_deterministic_work() {
    let bundle = load_bundle("doors-keys-gems").unwrap();
    for (b, p) in bundle.problems.iter().filter(|(b, _)| b.benchmark) {
        let heur = Heuristic::build(HeuristicKind::Manhattan, p).unwrap();
        for g in &p.goals {
            let det = astar(p, &p.init, 1, g, &heur, Budget::Unlimited).stats.nodes_expanded.max(1);
            for seed in 0..100 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let r = probabilistic_astar(p, &p.init, 1, g, &heur, Budget::Unlimited, 0.1, &mut rng);
                assert!(r.plan.complete, "{} {}", b.name, g.label);
                assert!(
                    r.stats.nodes_expanded <= 10 * det,
                    "{} {}: {} vs {det}",
                    b.name,
                    g.label,
                    r.stats.nodes_expanded
                );
            }
        }
    }
}

#[test]
fn goal_count_counts_unsatisfied_literals() {
    let p = blocks_problem(
        "a b c d e",
        "(handempty) (ontable a) (on b a) (on c b) (clear c) (ontable d) (clear d) (ontable e) (clear e)",
        "(g (and (on b a) (on c b) (on d c) (on e d) (ontable a)))",
    );
    let h = Heuristic::build(HeuristicKind::GoalCount, &p).unwrap();
    assert_eq!(h.evaluate(&p, &p.init, &p.goals[0]), 2.0);
}

/// Delete-relaxation costs by a fixed point over hand-listed STRIPS
/// actions for blocks `a`, `b`, `c`.
fn hadd_oracle(init: &[&str], goal: &[&str]) -> f64 {
    let blocks = ["a", "b", "c"];
    let mut actions: Vec<(Vec<String>, Vec<String>)> = Vec::new();
    for x in blocks {
        actions.push((
            vec![format!("(clear {x})"), format!("(ontable {x})"), "(handempty)".into()],
            vec![format!("(holding {x})")],
        ));
        actions.push((
            vec![format!("(holding {x})")],
            vec![format!("(clear {x})"), "(handempty)".into(), format!("(ontable {x})")],
        ));
        for y in blocks.iter().filter(|&&y| y != x) {
            actions.push((
                vec![format!("(holding {x})"), format!("(clear {y})")],
                vec![format!("(clear {x})"), "(handempty)".into(), format!("(on {x} {y})")],
            ));
            actions.push((
                vec![format!("(on {x} {y})"), format!("(clear {x})"), "(handempty)".into()],
                vec![format!("(holding {x})"), format!("(clear {y})")],
            ));
        }
    }
    let mut cost: BTreeMap<String, f64> = init.iter().map(|a| (a.to_string(), 0.0)).collect();
    loop {
        let mut changed = false;
        for (pre, add) in &actions {
            let c: f64 = 1.0 + pre.iter().map(|p| cost.get(p).copied().unwrap_or(f64::INFINITY)).sum::<f64>();
            if !c.is_finite() {
                continue;
            }
            for a in add {
                if c < cost.get(a).copied().unwrap_or(f64::INFINITY) {
                    cost.insert(a.clone(), c);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    if goal.iter().all(|g| init.contains(g)) {
        return 0.0;
    }
    goal.iter().map(|g| cost.get(*g).copied().unwrap_or(f64::INFINITY)).sum()
}

#[test]
fn hadd_matches_relaxation_oracle_for_a_three_block_tower() {
    let init = ["(handempty)", "(ontable a)", "(ontable b)", "(ontable c)", "(clear a)", "(clear b)", "(clear c)"];
    let goal_atoms = ["(on a b)", "(on b c)", "(ontable c)"];
    let p = blocks_problem("a b c", &init.join(" "), &format!("(abc (and {}))", goal_atoms.join(" ")));
    let expected = hadd_oracle(&init, &goal_atoms);
    assert_eq!(h_add(&p, &p.init, &p.goals[0]), expected);
    assert_eq!(expected, 4.0);
}

#[test]
fn hadd_is_infinite_for_an_unreachable_goal() {
    let domain = "(define (domain chain) (:requirements :strips) (:predicates (p) (q) (r))
        (:action pq :parameters () :precondition (p) :effect (q))
        (:action rq :parameters () :precondition (r) :effect (and (p) (q))))";
    let domain = Arc::new(parse_domain(domain).unwrap());
    let text = "(define (problem c) (:domain chain) (:init (q)) (:goals (g (p)) (h (q))))";
    let p = parse_problem(text, domain).unwrap();
    assert!(h_add(&p, &p.init, &p.goals[0]).is_infinite());
    assert_eq!(h_add(&p, &p.init, &p.goals[1]), 0.0);
    let heur = Heuristic::build(HeuristicKind::HAdd, &p).unwrap();
    let r = astar(&p, &p.init, 1, &p.goals[0], &heur, Budget::Unlimited);
    assert!(!r.stats.found_goal && r.plan.is_empty());
    assert_eq!(r.stats.nodes_expanded, 0);
}

#[test]
fn heuristics_vanish_at_the_goal() {
    let bundle = load_bundle("doors-keys-gems").unwrap();
    let p = bundle.problem("dkg-1").unwrap();
    for kind in [HeuristicKind::Manhattan, HeuristicKind::Maze, HeuristicKind::GoalCount, HeuristicKind::HAdd] {
        let heur = Heuristic::build(kind, &p).unwrap();
        for g in &p.goals {
            let r =
                astar(&p, &p.init, 1, g, &Heuristic::build(HeuristicKind::Manhattan, &p).unwrap(), Budget::Unlimited);
            let end = replays(&p, &p.init, &r.plan);
            assert_eq!(heur.evaluate(&p, &end, g), 0.0, "{kind}");
            assert!(heur.evaluate(&p, &p.init, g) > 0.0, "{kind}");
        }
    }
}

#[test]
fn manhattan_needs_position_fluents() {
    let p = blocks_problem("a", "(handempty) (ontable a) (clear a)", "(g (holding a))");
    assert!(Heuristic::build(HeuristicKind::Manhattan, &p).is_err());
    assert!("astar".parse::<HeuristicKind>().is_err());
    assert_eq!("h_add".parse::<HeuristicKind>().unwrap(), HeuristicKind::HAdd);
}

#[test]
fn manhattan_is_admissible_on_doors_keys_gems() {
    let bundle = load_bundle("doors-keys-gems").unwrap();
    for p in bundle.benchmark_problems() {
        let heur = Heuristic::build(HeuristicKind::Manhattan, &p).unwrap();
        for g in &p.goals {
            let r = astar(&p, &p.init, 1, g, &heur, Budget::Unlimited);
            assert!(r.stats.found_goal);
            // Every state on an optimal plan has h no larger than the
            // remaining plan length.
            let mut s = p.init.clone();
            for (k, step) in r.plan.steps.iter().enumerate() {
                assert!(heur.evaluate(&p, &s, g) <= (r.plan.len() - k) as f64);
                s = p.apply_unchecked(&s, &step.action);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn selection_is_shift_invariant(
        fvals in prop::collection::vec(0.0f64..50.0, 1..12),
        shift in -1e3f64..1e3,
        gamma in 0.05f64..5.0,
    ) {
        let shifted: Vec<f64> = fvals.iter().map(|f| f + shift).collect();
        let a = selection_probabilities(&fvals, gamma);
        let b = selection_probabilities(&shifted, gamma);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn random_walks_from_search_stay_sound(seed in 0u64..10_000, budget in 0u64..30) {
        let (_, p) = grid_problem(EMPTY_5X5);
        let heur = Heuristic::build(HeuristicKind::Manhattan, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = probabilistic_astar(&p, &p.init, 1, &p.goals[0], &heur, Budget::Limited(budget), 1.0, &mut rng);
        prop_assert!(r.stats.nodes_expanded <= budget);
        let states: BTreeSet<_> = r.plan.steps.iter().map(|s| format!("{:?}", s.state)).collect();
        prop_assert_eq!(states.len(), r.plan.len(), "plans never revisit a state");
        replays(&p, &p.init, &r.plan);
    }
}
