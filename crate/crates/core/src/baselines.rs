//! Baseline goal-inference methods: Bayesian inverse reinforcement learning
//! over value-iteration Q-functions, and plan recognition as planning.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domains::StateSampler;
use crate::pddl::{GroundAction, ProblemDef, State};
use crate::planner::{astar, log_sum_exp, Budget, Heuristic};
use crate::sips::PosteriorSnapshot;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("value iteration needs at least one iteration")]
    NoIterations,
    #[error("discount must lie in (0, 1), got {0}")]
    BadDiscount(f64),
    #[error("state space exceeds {limit} states; use an asynchronous mode")]
    StateSpaceTooLarge { limit: usize },
    #[error("asynchronous uniform mode needs a state sampler")]
    MissingSampler,
    #[error("oracle mode needs at least one oracle state")]
    MissingOracleStates,
    #[error("action `{action}` at t = {t} is not applicable")]
    InvalidAction { t: usize, action: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViMode {
    /// Jacobi sweeps over the enumerated reachable state space.
    Sync,
    /// One update per iteration at a state from the domain sampler.
    AsyncUniform,
    /// One update per iteration at a state drawn from oracle trajectories.
    AsyncOracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViConfig {
    pub discount: f64,
    /// Sweeps in sync mode, single-state updates otherwise.
    pub iterations: usize,
    pub mode: ViMode,
    /// Upper bound on enumerated states in sync mode.
    pub max_states: usize,
}

impl ViConfig {
    pub fn new(mode: ViMode, iterations: usize) -> Self {
        ViConfig { discount: 0.9, iterations, mode, max_states: 1_000_000 }
    }
}

/// Tabular Q-values for one goal. States never updated have all-zero Q.
#[derive(Clone, Debug)]
pub struct QFunction {
    pub goal: usize,
    pub discount: f64,
    pub iterations: usize,
    pub mode: ViMode,
    /// Q-values aligned with `available_actions(s)`.
    table: HashMap<State, Vec<f64>>,
    /// State updates performed.
    pub states_visited: u64,
    /// Max-norm change per sweep (sync mode only).
    pub residuals: Vec<f64>,
}

impl QFunction {
    /// Q-values over `problem.available_actions(s)`.
    pub fn q_values(&self, problem: &ProblemDef, s: &State) -> Vec<f64> {
        match self.table.get(s) {
            Some(q) => q.clone(),
            None => vec![0.0; problem.available_actions(s).len()],
        }
    }

    pub fn value(&self, s: &State) -> f64 {
        self.table.get(s).map_or(0.0, |q| q.iter().copied().fold(0.0, f64::max))
    }

    /// Build directly from a table, for tests and hand-specified models.
    pub fn from_table(goal: usize, discount: f64, table: HashMap<State, Vec<f64>>) -> Self {
        QFunction { goal, discount, iterations: 0, mode: ViMode::Sync, table, states_visited: 0, residuals: Vec::new() }
    }

    pub fn visited_states(&self) -> usize {
        self.table.len()
    }
}

/// Breadth-first enumeration of states reachable from the initial state.
pub fn enumerate_states(problem: &ProblemDef, limit: usize) -> Result<Vec<State>, BaselineError> {
    let mut index: HashMap<State, usize> = HashMap::from([(problem.init.clone(), 0)]);
    let mut order = vec![problem.init.clone()];
    let mut queue = VecDeque::from([0]);
    while let Some(i) = queue.pop_front() {
        let s = order[i].clone();
        for a in problem.available_actions(&s) {
            let n = problem.apply_unchecked(&s, &a);
            if !index.contains_key(&n) {
                if order.len() >= limit {
                    return Err(BaselineError::StateSpaceTooLarge { limit });
                }
                index.insert(n.clone(), order.len());
                queue.push_back(order.len());
                order.push(n);
            }
        }
    }
    Ok(order)
}

/// Value iteration under the indicator reward: 1 on entering a state that
/// satisfies the goal, which is absorbing; 0 otherwise.
pub fn value_iteration<R: Rng + ?Sized>(
    problem: &ProblemDef,
    goal: usize,
    cfg: &ViConfig,
    sampler: Option<&StateSampler>,
    oracle_states: &[State],
    rng: &mut R,
) -> Result<QFunction, BaselineError> {
    if cfg.iterations == 0 {
        return Err(BaselineError::NoIterations);
    }
    if !(cfg.discount > 0.0 && cfg.discount < 1.0) {
        return Err(BaselineError::BadDiscount(cfg.discount));
    }
    let g = &problem.goals[goal];
    let mut q = QFunction {
        goal,
        discount: cfg.discount,
        iterations: cfg.iterations,
        mode: cfg.mode,
        table: HashMap::new(),
        states_visited: 0,
        residuals: Vec::new(),
    };
    match cfg.mode {
        ViMode::Sync => {
            let states = enumerate_states(problem, cfg.max_states)?;
            let index: HashMap<&State, usize> = states.iter().enumerate().map(|(i, s)| (s, i)).collect();
            let is_goal: Vec<bool> = states.iter().map(|s| problem.satisfies(s, g)).collect();
            // (successor, reward) per action per state.
            let succ: Vec<Vec<(usize, f64)>> = states
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    if is_goal[i] {
                        return Vec::new();
                    }
                    problem
                        .available_actions(s)
                        .iter()
                        .map(|a| {
                            let j = index[&problem.apply_unchecked(s, a)];
                            (j, if is_goal[j] { 1.0 } else { 0.0 })
                        })
                        .collect()
                })
                .collect();
            let mut qs: Vec<Vec<f64>> = succ.iter().map(|a| vec![0.0; a.len()]).collect();
            let mut v = vec![0.0; states.len()];
            for _ in 0..cfg.iterations {
                let mut delta: f64 = 0.0;
                let mut next = qs.clone();
                for (i, acts) in succ.iter().enumerate() {
                    for (k, &(j, r)) in acts.iter().enumerate() {
                        let cont = if is_goal[j] { 0.0 } else { v[j] };
                        let new = r + cfg.discount * cont;
                        delta = delta.max((new - qs[i][k]).abs());
                        next[i][k] = new;
                    }
                }
                qs = next;
                for (i, row) in qs.iter().enumerate() {
                    v[i] = row.iter().copied().fold(0.0, f64::max);
                }
                q.residuals.push(delta);
                q.states_visited += states.len() as u64;
            }
            q.table = states.into_iter().zip(qs).collect();
        }
        ViMode::AsyncUniform | ViMode::AsyncOracle => {
            if cfg.mode == ViMode::AsyncUniform && sampler.is_none() {
                return Err(BaselineError::MissingSampler);
            }
            if cfg.mode == ViMode::AsyncOracle && oracle_states.is_empty() {
                return Err(BaselineError::MissingOracleStates);
            }
            for _ in 0..cfg.iterations {
                let s = match cfg.mode {
                    ViMode::AsyncUniform => sampler.unwrap().sample(problem, rng),
                    _ => oracle_states[rng.random_range(0..oracle_states.len())].clone(),
                };
                q.states_visited += 1;
                if problem.satisfies(&s, g) {
                    continue;
                }
                let row: Vec<f64> = problem
                    .available_actions(&s)
                    .iter()
                    .map(|a| {
                        let n = problem.apply_unchecked(&s, a);
                        if problem.satisfies(&n, g) {
                            1.0
                        } else {
                            cfg.discount * q.value(&n)
                        }
                    })
                    .collect();
                q.table.insert(s, row);
            }
        }
    }
    Ok(q)
}

/// `log softmax(alpha * Q(s, ·))[a]`, or `None` if `a` is not applicable
/// in `s`.
pub fn boltzmann_log_prob(problem: &ProblemDef, q: &QFunction, s: &State, a: &GroundAction, alpha: f64) -> Option<f64> {
    let k = problem.available_actions(s).iter().position(|x| x == a)?;
    let scaled: Vec<f64> = q.q_values(problem, s).iter().map(|v| alpha * v).collect();
    Some(scaled[k] - log_sum_exp(&scaled))
}

/// Exact goal posteriors under Boltzmann-rational action likelihoods and a
/// uniform goal prior. The snapshot at `t` conditions on `a_1..a_{t-1}`.
pub fn birl_posteriors(
    problem: &ProblemDef,
    states: &[State],
    actions: &[GroundAction],
    qfns: &[QFunction],
    alpha: f64,
) -> Result<Vec<PosteriorSnapshot>, BaselineError> {
    let labels = problem.goal_labels();
    let visited: u64 = qfns.iter().map(|q| q.states_visited).sum();
    let mut scores = vec![0.0; qfns.len()];
    let mut out = Vec::with_capacity(states.len());
    for t in 1..=states.len() {
        if t > 1 {
            let (s, a) = (&states[t - 2], &actions[t - 2]);
            if !a.is_noop() {
                for (g, q) in qfns.iter().enumerate() {
                    scores[g] += boltzmann_log_prob(problem, q, s, a, alpha).ok_or_else(|| {
                        BaselineError::InvalidAction { t: t - 1, action: a.display(problem).to_string() }
                    })?;
                }
            }
        }
        out.push(PosteriorSnapshot::from_log_scores(t, &labels, &scores, None, visited));
    }
    Ok(out)
}

/// Optimal costs used by plan recognition as planning.
#[derive(Clone, Debug, Default)]
pub struct PrpCache {
    /// `|p*^g|` from the initial state, `None` if unreachable.
    pub optimal_costs: Vec<Option<u32>>,
    completions: HashMap<(State, usize), Option<u32>>,
    pub nodes_expanded: u64,
}

impl PrpCache {
    /// Precompute optimal costs from the initial state for every goal.
    pub fn new(problem: &ProblemDef, heuristic: &Heuristic) -> Self {
        let mut cache = PrpCache::default();
        cache.optimal_costs =
            (0..problem.goals.len()).map(|g| cache.completion(problem, heuristic, &problem.init, g)).collect();
        cache
    }

    /// Optimal cost from `s` to goal `g`, memoized.
    pub fn completion(&mut self, problem: &ProblemDef, heuristic: &Heuristic, s: &State, g: usize) -> Option<u32> {
        if let Some(&c) = self.completions.get(&(s.clone(), g)) {
            return c;
        }
        let r = astar(problem, s, 1, &problem.goals[g], heuristic, Budget::Unlimited);
        self.nodes_expanded += r.stats.nodes_expanded;
        let c = r.stats.found_goal.then_some(r.plan.len() as u32);
        self.completions.insert((s.clone(), g), c);
        c
    }
}

/// Goal posteriors with likelihood `exp(-beta (|p_t^g| - |p*^g|))`, where
/// `|p_t^g| = (t - 1) + ` the optimal completion cost from `s_t`. Goals
/// without a completion get zero likelihood; if none has one the
/// posterior is uniform.
pub fn prp_posteriors(
    problem: &Arc<ProblemDef>,
    states: &[State],
    beta: f64,
    heuristic: &Heuristic,
    cache: &mut PrpCache,
) -> Vec<PosteriorSnapshot> {
    let labels = problem.goal_labels();
    let mut out = Vec::with_capacity(states.len());
    for (i, s) in states.iter().enumerate() {
        let t = i + 1;
        let scores: Vec<f64> = (0..problem.goals.len())
            .map(|g| match (cache.completion(problem, heuristic, s, g), cache.optimal_costs[g]) {
                (Some(c), Some(opt)) => -beta * ((t - 1) as f64 + c as f64 - opt as f64),
                _ => f64::NEG_INFINITY,
            })
            .collect();
        out.push(PosteriorSnapshot::from_log_scores(t, &labels, &scores, None, cache.nodes_expanded));
    }
    out
}
