//! End-to-end acceptance checks. Runs as a plain binary (no libtest
//! harness) and prints one PASS/FAIL line per criterion.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{agent_cell, bfs_len, grid_problem, grid_prp_oracle};
use inverse_plan::agent::{sample_budget, simulate, AgentModel, AgentParams, AgentTrace, BudgetPrior};
use inverse_plan::baselines::{birl_posteriors, prp_posteriors, PrpCache, QFunction};
use inverse_plan::bench::{
    quartile_indices, run_experiment, DatasetSpec, ExperimentConfig, ExperimentResult, MethodSpec, OutputPaths, Split,
};
use inverse_plan::domains::{generate_gridworld, load_bundle, GridMap};
use inverse_plan::observation::{corrupt, log_likelihood, NoiseModel, Observation};
use inverse_plan::pddl::{GoalSpec, GroundAction, ProblemDef, State};
use inverse_plan::planner::{astar, log_sum_exp, selection_probabilities, softmin, Budget, Heuristic, HeuristicKind};
use inverse_plan::sips::{ess, systematic_resample, PosteriorSnapshot, Rejuvenation, Sips, SipsConfig};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("negative-binomial budget mean", Duration::from_secs(1), budget_mean),
        ("astar matches BFS on random gridworlds", Duration::from_secs(10), astar_vs_bfs),
        ("SIPS matches exact enumeration", Duration::from_secs(120), sips_vs_enumeration),
        ("PRP matches direct Bayes", Duration::from_secs(30), prp_exactness),
        ("unconverged BIRL-unbiased is uniform", Duration::from_secs(60), birl_flat),
        ("benchmark accuracy bands", Duration::from_secs(30 * 60), accuracy_bands),
        ("myopic unlock scenario", Duration::from_secs(120), myopic_unlock),
        ("CLI determinism", Duration::from_secs(300), cli_determinism),
        ("property tests", Duration::from_secs(300), properties),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let pass = outcome.pass && elapsed < *limit;
        failed += !pass as usize;
        println!(
            "criterion {}: {} {name}: {} [{:.2}s, limit {}s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn budget_mean() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 10_000;
    let mean = (0..n).map(|_| sample_budget(2, 0.95, &mut rng) as f64).sum::<f64>() / n as f64;
    check((mean - 38.0).abs() <= 2.0, format!("mean {mean:.3} over {n} draws (target 38 ± 2)"))
}

fn astar_vs_bfs() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let (mut checked, mut mismatches) = (0, 0);
    while checked < 25 {
        let (w, h) = (3 + checked % 5, 3 + (checked / 5) % 5);
        let Ok(map) = generate_gridworld(w, h, 0.25, 2, &mut rng) else { continue };
        let (map, p) = grid_problem(&map.to_ascii());
        let heur = Heuristic::build(HeuristicKind::Manhattan, &p).unwrap();
        for (letter, goal) in map.gems.keys().zip(&p.goals) {
            let r = astar(&p, &p.init, 1, goal, &heur, Budget::Unlimited);
            let found = r.plan.complete.then_some(r.plan.len());
            mismatches += (found != bfs_len(&map, *letter)) as usize;
        }
        checked += 1;
    }
    check(mismatches == 0, format!("{checked} maps up to 7x7, {mismatches} length mismatches"))
}

// ---------------------------------------------------------------------------
// Exact enumeration of the agent model on a toy gridworld.

/// Branches lighter than this are dropped; their mass is reported.
const PRUNE: f64 = 1e-10;

/// A weighted plan suffix: probability and the (state, action) pairs it visits.
type Branch = (f64, Vec<(State, GroundAction)>);

struct Enumerator<'a> {
    problem: &'a ProblemDef,
    map: &'a GridMap,
    budget: BudgetPrior,
    gamma: f64,
    tail: Vec<f64>,
    cache: HashMap<(usize, State), Vec<Branch>>,
    lost: f64,
}

#[derive(Clone)]
struct Frontier {
    nodes: Vec<(State, Option<usize>, GroundAction, u32)>,
    best: HashMap<State, usize>,
    /// `(node, f)` pairs; selection depends only on the f-values.
    open: Vec<(usize, f64)>,
}

impl Frontier {
    fn path(&self, mut id: usize) -> Vec<(State, GroundAction)> {
        let mut out = Vec::new();
        while let Some(parent) = self.nodes[id].1 {
            out.push((self.nodes[parent].0.clone(), self.nodes[id].2.clone()));
            id = parent;
        }
        out.reverse();
        out
    }
}

impl<'a> Enumerator<'a> {
    fn new(problem: &'a ProblemDef, map: &'a GridMap, params: AgentParams) -> Self {
        // tail[k] = P(B >= k)
        let mut tail = vec![1.0];
        for k in 0..2000 {
            let last = *tail.last().unwrap();
            tail.push((last - params.budget.pmf(k)).max(0.0));
        }
        Enumerator { problem, map, budget: params.budget, gamma: params.gamma, tail, cache: HashMap::new(), lost: 0.0 }
    }

    fn at_least(&self, k: u64) -> f64 {
        self.tail.get(k as usize).copied().unwrap_or(0.0)
    }

    fn manhattan(&self, s: &State, goal: usize) -> f64 {
        let letter = self.problem.goals[goal].label.to_ascii_uppercase().chars().next().unwrap();
        let (gx, gy) = self.map.gems[&letter];
        let (x, y) = agent_cell(self.problem, s);
        (x.abs_diff(gx) + y.abs_diff(gy)) as f64
    }

    /// Distribution over the plans a single search call from `start` returns.
    fn search(&mut self, start: &State, goal: usize) -> Vec<(f64, Vec<(State, GroundAction)>)> {
        let key = (goal, start.clone());
        if let Some(hit) = self.cache.get(&key) {
            return hit.clone();
        }
        let mut fr = Frontier { nodes: Vec::new(), best: HashMap::new(), open: Vec::new() };
        fr.nodes.push((start.clone(), None, GroundAction::noop(), 0));
        fr.best.insert(start.clone(), 0);
        fr.open.push((0, self.manhattan(start, goal)));
        let mut out = Vec::new();
        self.expand(fr, 0, 1.0, goal, &mut out);
        self.cache.insert(key, out.clone());
        out
    }

    fn expand(&mut self, fr: Frontier, k: u64, w: f64, goal: usize, out: &mut Vec<(f64, Vec<(State, GroundAction)>)>) {
        let fvals: Vec<f64> = fr.open.iter().map(|&(_, f)| f).collect();
        let fmin = fvals.iter().copied().fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = fvals.iter().map(|f| (-(f - fmin) / self.gamma).exp()).collect();
        let total: f64 = weights.iter().sum();
        for (j, wt) in weights.iter().enumerate() {
            let wj = w * wt / total;
            if wj < PRUNE {
                self.lost += wj;
                continue;
            }
            let mut next = fr.clone();
            let (id, _) = next.open.remove(j);
            let goal_spec: &GoalSpec = &self.problem.goals[goal];
            if self.problem.satisfies(&next.nodes[id].0, goal_spec) {
                out.push((wj * self.at_least(k), next.path(id)));
                continue;
            }
            out.push((wj * self.budget.pmf(k), next.path(id)));
            let (state, g) = (next.nodes[id].0.clone(), next.nodes[id].3 + 1);
            for a in self.problem.available_actions(&state) {
                let child = self.problem.apply_unchecked(&state, &a);
                if next.best.get(&child).is_some_and(|&old| next.nodes[old].3 <= g) {
                    continue;
                }
                let h = self.manhattan(&child, goal);
                let new_id = next.nodes.len();
                if let Some(old) = next.best.insert(child.clone(), new_id) {
                    next.open.retain(|&(n, _)| n != old);
                }
                next.nodes.push((child, Some(id), a, g));
                next.open.push((new_id, g as f64 + h));
            }
            if next.open.is_empty() {
                out.push((wj * self.at_least(k + 1), next.path(id)));
            } else {
                self.expand(next, k + 1, wj, goal, out);
            }
        }
    }

    /// `P(s_1..s_horizon | goal)` over every state sequence.
    fn traces(&mut self, goal: usize, horizon: usize) -> HashMap<Vec<State>, f64> {
        let mut out = HashMap::new();
        let init = self.problem.init.clone();
        self.walk(goal, horizon, vec![init], Vec::new(), 1.0, &mut out);
        out
    }

    fn walk(
        &mut self,
        goal: usize,
        horizon: usize,
        states: Vec<State>,
        plan: Vec<(State, GroundAction)>,
        w: f64,
        out: &mut HashMap<Vec<State>, f64>,
    ) {
        if states.len() == horizon {
            *out.entry(states).or_insert(0.0) += w;
            return;
        }
        let s = states.last().unwrap().clone();
        let options = if plan.is_empty() {
            self.search(&s, goal)
                .into_iter()
                .map(
                    |(p, steps)| {
                        if steps.is_empty() {
                            (p, vec![(s.clone(), GroundAction::noop())])
                        } else {
                            (p, steps)
                        }
                    },
                )
                .collect()
        } else {
            vec![(1.0, plan)]
        };
        for (p, steps) in options {
            if w * p < PRUNE {
                self.lost += w * p;
                continue;
            }
            assert_eq!(steps[0].0, s);
            let next = self.problem.apply_unchecked(&s, &steps[0].1);
            let mut states = states.clone();
            states.push(next);
            self.walk(goal, horizon, states, steps[1..].to_vec(), w * p, out);
        }
    }
}

fn sips_vs_enumeration() -> Outcome {
    let (map, p) = grid_problem("A...B\n..s..");
    let params = AgentParams::new(2, 0.95, 0.1, HeuristicKind::Manhattan).unwrap();
    let noise = NoiseModel::new(0.05, 0.25).unwrap();
    let horizon = 4;
    let mut en = Enumerator::new(&p, &map, params);
    let traces: Vec<HashMap<Vec<State>, f64>> = (0..p.goals.len()).map(|g| en.traces(g, horizon)).collect();
    let mass: Vec<f64> = traces.iter().map(|t| t.values().sum()).collect();
    if mass.iter().any(|m| (m - 1.0).abs() > 1e-6) {
        return check(false, format!("enumerated trace mass {mass:?}"));
    }
    let model = AgentModel::new(p.clone(), params).unwrap();
    // The enumerated trace law should also match forward simulation.
    let draws = 20_000;
    let mut sim_tv: f64 = 0.0;
    for (g, law) in traces.iter().enumerate() {
        let mut counts: HashMap<Vec<State>, f64> = HashMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(500 + g as u64);
        for _ in 0..draws {
            let mut trace = AgentTrace::start(g, p.init.clone());
            while trace.t() < horizon {
                trace.extend(&model, &mut rng);
            }
            *counts.entry(trace.states).or_insert(0.0) += 1.0 / draws as f64;
        }
        let tv = 0.5
            * law
                .keys()
                .chain(counts.keys().filter(|k| !law.contains_key(*k)))
                .map(|k| (law.get(k).copied().unwrap_or(0.0) - counts.get(k).copied().unwrap_or(0.0)).abs())
                .sum::<f64>();
        sim_tv = sim_tv.max(tv);
    }
    let cfg = SipsConfig {
        particles_per_goal: 1000,
        ess_threshold: 0.25,
        agent: params,
        noise,
        rejuvenation: Rejuvenation::OFF,
    };
    let sips = Sips::new(p.clone(), cfg).unwrap();
    let seeds = 20;
    let (mut final_tv, mut worst_tv) = (0.0, 0.0);
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut trace = AgentTrace::start((seed % 2) as usize, p.init.clone());
        while trace.t() < horizon {
            trace.extend(&model, &mut rng);
        }
        let obs: Vec<Observation> = trace.states.iter().map(|s| corrupt(s, &noise, &mut rng)).collect();
        let snaps = sips.run(&obs, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let mut seed_worst: f64 = 0.0;
        for t in 1..=horizon {
            let exact = exact_posterior(&p, &traces, &obs[..t], &noise);
            let tv =
                0.5 * p.goal_labels().iter().zip(&exact).map(|(l, e)| (snaps[t - 1].prob(l) - e).abs()).sum::<f64>();
            seed_worst = seed_worst.max(tv);
            if t == horizon {
                final_tv += tv;
            }
        }
        worst_tv += seed_worst;
    }
    let (final_tv, worst_tv) = (final_tv / seeds as f64, worst_tv / seeds as f64);
    check(
        worst_tv <= 0.05 && sim_tv <= 0.02,
        format!(
            "mean over {seeds} seeds of max-over-t TV {worst_tv:.4}, final-step TV {final_tv:.4}; \
             trace law vs {draws} simulations TV {sim_tv:.4}; pruned mass {:.1e}",
            en.lost
        ),
    )
}

fn exact_posterior(
    p: &ProblemDef,
    traces: &[HashMap<Vec<State>, f64>],
    obs: &[Observation],
    noise: &NoiseModel,
) -> Vec<f64> {
    let scores: Vec<f64> = traces
        .iter()
        .map(|tr| {
            let terms: Vec<f64> = tr
                .iter()
                .map(|(seq, w)| w.ln() + obs.iter().zip(seq).map(|(o, s)| log_likelihood(o, s, noise)).sum::<f64>())
                .collect();
            log_sum_exp(&terms)
        })
        .collect();
    let z = log_sum_exp(&scores);
    debug_assert_eq!(scores.len(), p.goals.len());
    scores.iter().map(|s| (s - z).exp()).collect()
}

// ---------------------------------------------------------------------------

fn prp_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut problems, mut steps, mut worst) = (0, 0, 0.0f64);
    while problems < 10 {
        let (w, h) = (3 + problems % 3, 3 + (problems / 3) % 3);
        let Ok(map) = generate_gridworld(w, h, 0.2, 3, &mut rng) else { continue };
        let (map, p) = grid_problem(&map.to_ascii());
        let model = AgentModel::new(p.clone(), AgentParams::bounded(HeuristicKind::Manhattan)).unwrap();
        let trace = simulate(&model, problems % p.goals.len(), 30, &mut rng);
        let h = Heuristic::build(HeuristicKind::Manhattan, &p).unwrap();
        let mut cache = PrpCache::new(&p, &h);
        let snaps = prp_posteriors(&p, &trace.states, 1.0, &h, &mut cache);
        let cells: Vec<_> = trace.states.iter().map(|s| agent_cell(&p, s)).collect();
        for (snap, expected) in snaps.iter().zip(grid_prp_oracle(&map, &cells, 1.0)) {
            for (got, want) in snap.probs.values().zip(&expected) {
                worst = worst.max((got - want).abs());
            }
            steps += 1;
        }
        problems += 1;
    }
    check(worst <= 1e-9, format!("{problems} grids up to 5x5, {steps} timesteps, max deviation {worst:.2e}"))
}

fn dkg_experiment(methods: Vec<MethodSpec>, domain: &str) -> ExperimentResult {
    let cfg = ExperimentConfig {
        seed: 7,
        domain: domain.into(),
        dataset: DatasetSpec::new(30, Split::Suboptimal, 11),
        noise: NoiseModel::default(),
        corrupt_observations: false,
        methods,
        output: OutputPaths::default(),
    };
    run_experiment(&cfg).unwrap()
}

fn birl_flat() -> Outcome {
    let birl = MethodSpec::BirlUnbiased { alpha: 1.0, discount: 0.9, iterations: 1000, sync: false };
    let result = dkg_experiment(vec![birl], "doors-keys-gems");
    let uniform = 1.0 / 3.0;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (run, traj) in result.logs[0].runs.iter().zip(&result.dataset.trajectories) {
        let Ok(run) = run else { return check(false, "a run failed") };
        for q in quartile_indices(traj.len()) {
            for p in run.snapshots[q - 1].probs.values() {
                worst = worst.max((p - uniform).abs());
            }
            checked += 1;
        }
    }
    let row = &result.rows[0];
    let pass = worst <= 1e-12 && [row.p_q1, row.p_q2, row.p_q3].iter().all(|p| (p - uniform).abs() <= 1e-12);
    check(
        pass,
        format!(
            "{checked} quartile snapshots, max |P - 1/3| {worst:.1e}; P(g_true) {:.4}/{:.4}/{:.4}; Top-1 Q3 {:.3}",
            row.p_q1, row.p_q2, row.p_q3, row.top1_q3
        ),
    )
}

fn accuracy_bands() -> Outcome {
    let dkg = dkg_experiment(vec![MethodSpec::sips()], "doors-keys-gems");
    let bw = dkg_experiment(
        vec![
            MethodSpec::sips(),
            MethodSpec::BirlUnbiased { alpha: 1.0, discount: 0.9, iterations: 50_000, sync: false },
        ],
        "block-words",
    );
    let id = dkg_experiment(vec![MethodSpec::sips()], "intrusion-detection");
    let (d, b, i) = (dkg.rows[0].top1_q3, bw.rows[0].top1_q3, id.rows[0].top1_q3);
    let (sips_n, birl_n) = (bw.rows[0].n, bw.rows[1].n);
    let ratio = birl_n / sips_n;
    let failures: usize = [&dkg, &bw, &id].iter().flat_map(|r| &r.rows).map(|r| r.failures).sum();
    check(
        d >= 0.60 && b >= 0.75 && i >= 0.75 && ratio >= 10.0,
        format!(
            "Top-1 Q3 DKG {d:.3} (>= 0.60), BW {b:.3} (>= 0.75), ID {i:.3} (>= 0.75); BW nodes SIPS {sips_n:.0} vs BIRL-U {birl_n:.0} ({ratio:.1}x); {failures} failed runs"
        ),
    )
}

fn myopic_unlock() -> Outcome {
    let bundle = load_bundle("doors-keys-gems").unwrap();
    let p = bundle.problem("figure-1b").unwrap();
    // Pick up the near key, walk past the red door, and spend the key on
    // the first of the two doors guarding the blue gem.
    let script = ["left", "pickup", "right", "right", "unlock-right", "right", "right"];
    let mut states = vec![p.init.clone()];
    for name in script {
        let s = states.last().unwrap();
        let a = p
            .available_actions(s)
            .into_iter()
            .find(|a| a.display(&p).to_string().starts_with(&format!("({name} ")))
            .unwrap_or_else(|| panic!("`{name}` not available"));
        states.push(p.apply(s, &a).unwrap());
    }
    let unlocked = 6; // s_6 is the first state after the unlock
    let obs: Vec<Observation> = states.iter().map(Observation::exact).collect();
    let cfg = SipsConfig {
        particles_per_goal: 30,
        agent: AgentParams::bounded(HeuristicKind::Maze),
        rejuvenation: Rejuvenation::with_goal_moves(0.25),
        ..SipsConfig::new(HeuristicKind::Maze)
    };
    let sips = Sips::new(p.clone(), cfg).unwrap();
    let seeds = 5u64;
    let mut blue_top = 0u64;
    for seed in 0..seeds {
        let snaps = sips.run(&obs, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        blue_top += snaps[unlocked - 1..].iter().all(|s| s.argmax() == ["gem-blue"]) as u64;
    }

    let h = Heuristic::build(HeuristicKind::Maze, &p).unwrap();
    let prp = prp_posteriors(&p, &states, 1.0, &h, &mut PrpCache::new(&p, &h));
    let max_p = |s: &PosteriorSnapshot| s.probs.values().copied().fold(0.0, f64::max);
    let before = max_p(&prp[unlocked - 2]);
    let after = max_p(&prp[unlocked - 1]);
    let flattened = after < before && (after - 1.0 / 3.0).abs() < 1e-9;
    check(
        blue_top == seeds && flattened,
        format!(
            "SIPS argmax is blue from the unlock on in {blue_top}/{seeds} seeds; PRP max posterior {before:.3} before unlock, {after:.3} after"
        ),
    )
}

// ---------------------------------------------------------------------------

fn invplan(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_invplan")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

/// Every file under `dir` whose name passes `keep`, relative path to bytes.
fn collect(dir: &Path, keep: &dyn Fn(&Path) -> bool) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if keep(&path) {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism_round(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let d = |name: &str| dir.join(name).display().to_string();
    let traj = d("traj.jsonl");
    invplan(&["simulate", "--domain", "doors-keys-gems", "--goal-index", "2", "--seed", "5", "--out", &traj])?;
    let mut logs = Vec::new();
    let infer: [&[&str]; 5] = [
        &["--method", "sips"],
        &["--method", "sips", "--rejuvenation", "--corrupt", "--particles-per-goal", "5"],
        &["--method", "prp"],
        &["--method", "birl-unbiased", "--vi-iters", "2000"],
        &["--method", "birl-oracle", "--vi-iters", "2000", "--oracle-trajectories", &d("dataset")],
    ];
    invplan(&["generate-dataset", "--domain", "doors-keys-gems", "--n", "4", "--seed", "9", "--out", &d("dataset")])?;
    for (i, extra) in infer.iter().enumerate() {
        let out = d(&format!("infer-{i}.jsonl"));
        let mut args = vec!["infer", "--trajectory", &traj, "--seed", "3", "--out", &out];
        args.extend_from_slice(extra);
        invplan(&args)?;
    }
    let config = d("bench.toml");
    std::fs::write(
        &config,
        r#"seed = 4
domain = "block-words"
corrupt_observations = true

[dataset]
n = 3
split = "suboptimal"
seed = 8

[[methods]]
method = "sips"

[[methods]]
method = "prp"
"#,
    )
    .map_err(|e| e.to_string())?;
    invplan(&["bench", "--config", &config, "--out", &d("bench")])?;
    let robust = d("robust.toml");
    std::fs::write(
        &robust,
        r#"seed = 2
domain = "doors-keys-gems"
n = 2

[[true]]
gamma = 0.1
heuristic = "manhattan"
budget = { neg_binomial = { r = 2, q = 0.95 } }

[[assumed]]
gamma = 0.5
heuristic = "goal_count"
budget = "unlimited"
"#,
    )
    .map_err(|e| e.to_string())?;
    logs.push(("robustness.csv".into(), invplan(&["robustness", "--config", &robust])?));
    // Wall-clock columns live only in the CSV summaries.
    logs.extend(collect(dir, &|p: &Path| p.extension().is_some_and(|x| x == "jsonl" || x == "json")));
    Ok(logs)
}

fn cli_determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = match determinism_round(a.path()) {
        Ok(x) => x,
        Err(e) => return check(false, e),
    };
    let second = match determinism_round(b.path()) {
        Ok(x) => x,
        Err(e) => return check(false, e),
    };
    let names: Vec<&str> = first.iter().map(|(n, _)| n.as_str()).collect();
    let snapshot_logs = names.iter().filter(|n| n.contains("snapshots") || n.starts_with("infer-")).count();
    let differing: Vec<&str> = first.iter().zip(&second).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
    let pass = first.len() == second.len() && differing.is_empty() && snapshot_logs >= 8;
    check(
        pass,
        format!(
            "{} output files ({snapshot_logs} snapshot logs) compared across two runs, {} differ {differing:?}",
            first.len(),
            differing.len()
        ),
    )
}

// ---------------------------------------------------------------------------

fn prop<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

fn properties() -> Outcome {
    let labels: Vec<String> = (0..8).map(|i| format!("g{i}")).collect();
    let dkg = load_bundle("doors-keys-gems").unwrap();
    let dkg_problem: Arc<ProblemDef> = dkg.problem("dkg-1").unwrap();
    let model = AgentModel::new(dkg_problem.clone(), AgentParams::bounded(HeuristicKind::Manhattan)).unwrap();
    let results = [
        prop("posterior normalization", prop::collection::vec(-500.0f64..50.0, 1..8), |xs| {
            let snap = PosteriorSnapshot::from_log_scores(1, &labels[..xs.len()], &xs, None, 0);
            let total: f64 = snap.probs.values().sum();
            prop_assert!((total - 1.0).abs() <= 1e-9, "sum {total}");
            let sm: f64 = softmin(&xs, 0.7).iter().sum();
            prop_assert!((sm - 1.0).abs() <= 1e-9);
            let sel: f64 = selection_probabilities(&xs, 0.1).iter().sum();
            prop_assert!((sel - 1.0).abs() <= 1e-9);
            Ok(())
        }),
        prop("ESS closed forms", (1usize..200, -50.0f64..50.0, 0.0f64..1.0), |(n, c, w)| {
            prop_assert!((ess(&vec![c; n]) - n as f64).abs() <= 1e-9 * n as f64);
            let mut one = vec![f64::NEG_INFINITY; n];
            one[n / 2] = c;
            prop_assert!((ess(&one) - 1.0).abs() <= 1e-12);
            let pair = [w.ln() + c, (1.0 - w).ln() + c];
            if w > 0.0 && w < 1.0 {
                let want = 1.0 / (w * w + (1.0 - w) * (1.0 - w));
                prop_assert!((ess(&pair) - want).abs() <= 1e-9 * want);
            }
            Ok(())
        }),
        prop(
            "systematic resampling counts",
            (prop::collection::vec(-5.0f64..5.0, 1..30), 1usize..100, 0.0f64..1.0),
            |(lw, n, u)| {
                let z = log_sum_exp(&lw);
                let idx = systematic_resample(&lw, n, u);
                prop_assert_eq!(idx.len(), n);
                for (i, l) in lw.iter().enumerate() {
                    let expected = n as f64 * (l - z).exp();
                    let count = idx.iter().filter(|&&j| j == i).count() as f64;
                    prop_assert!(
                        count >= (expected - 1e-9).floor() && count <= (expected + 1e-9).ceil(),
                        "particle {} got {} offspring, expected {}",
                        i,
                        count,
                        expected
                    );
                }
                Ok(())
            },
        ),
        prop("replay soundness", (any::<u64>(), 0usize..3), |(seed, goal)| {
            let trace = simulate(&model, goal, 25, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(trace.states.len(), trace.actions.len() + 1);
            for (k, a) in trace.actions.iter().enumerate() {
                let next = dkg_problem.apply(&trace.states[k], a);
                prop_assert_eq!(next.ok(), Some(trace.states[k + 1].clone()));
            }
            Ok(())
        }),
        prop(
            "softmax shift invariance",
            (prop::collection::vec(-20.0f64..20.0, 2..8), -100.0f64..100.0, 0.05f64..5.0),
            |(xs, c, temp)| {
                let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
                for (a, b) in softmin(&xs, temp).iter().zip(softmin(&shifted, temp)) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
                for (a, b) in selection_probabilities(&xs, temp).iter().zip(selection_probabilities(&shifted, temp)) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
                Ok(())
            },
        ),
        prop("BIRL shift invariance", (-30.0f64..30.0, 0.1f64..5.0, any::<u64>()), |(c, alpha, seed)| {
            let p = &dkg_problem;
            let trace = simulate(&model, (seed % 3) as usize, 6, &mut ChaCha8Rng::seed_from_u64(seed));
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
            let base: Vec<HashMap<State, Vec<f64>>> = (0..3)
                .map(|_| {
                    trace
                        .states
                        .iter()
                        .map(|s| {
                            let n = p.available_actions(s).len();
                            (s.clone(), (0..n).map(|_| rng.random::<f64>()).collect())
                        })
                        .collect()
                })
                .collect();
            // A different constant for every (goal, state) row.
            let moved: Vec<HashMap<State, Vec<f64>>> = base
                .iter()
                .enumerate()
                .map(|(g, t)| {
                    t.iter()
                        .enumerate()
                        .map(|(i, (s, row))| (s.clone(), row.iter().map(|q| q + c * (1 + g + i) as f64).collect()))
                        .collect()
                })
                .collect();
            let qfns = |tables: &[HashMap<State, Vec<f64>>]| -> Vec<QFunction> {
                tables.iter().enumerate().map(|(g, t)| QFunction::from_table(g, 0.9, t.clone())).collect()
            };
            let a = birl_posteriors(p, &trace.states, &trace.actions, &qfns(&base), alpha).unwrap();
            let b = birl_posteriors(p, &trace.states, &trace.actions, &qfns(&moved), alpha).unwrap();
            for (x, y) in a.iter().zip(&b) {
                for (px, py) in x.probs.values().zip(y.probs.values()) {
                    prop_assert!((px - py).abs() <= 1e-12);
                }
            }
            Ok(())
        }),
    ];
    let errors: Vec<String> = results.into_iter().filter_map(Result::err).collect();
    check(
        errors.is_empty(),
        if errors.is_empty() { "6 properties x 1000 cases".to_string() } else { errors.join("; ") },
    )
}
