use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::heuristic::Heuristic;
use crate::pddl::{GoalSpec, GroundAction, ProblemDef, State};

/// Cap on node expansions for one search call.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Limited(u64),
    Unlimited,
}

impl Budget {
    fn exhausted(self, expanded: u64) -> bool {
        matches!(self, Budget::Limited(n) if expanded >= n)
    }
}

/// One executed transition: the action taken from `state`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanStep {
    pub state: State,
    pub action: GroundAction,
}

/// A plan covering timesteps `start_time..start_time + steps.len()`.
/// `steps[k].state` is the state at `start_time + k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialPlan {
    pub start_time: usize,
    pub steps: Vec<PlanStep>,
    /// Whether executing every step reaches the goal.
    pub complete: bool,
}

impl PartialPlan {
    pub fn empty(start_time: usize) -> Self {
        PartialPlan { start_time, steps: Vec::new(), complete: false }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// First timestep not covered by this plan.
    pub fn end_time(&self) -> usize {
        self.start_time + self.steps.len()
    }

    pub fn covers(&self, t: usize) -> bool {
        t >= self.start_time && t < self.end_time()
    }

    pub fn step_at(&self, t: usize) -> Option<&PlanStep> {
        t.checked_sub(self.start_time).and_then(|k| self.steps.get(k))
    }

    pub fn actions(&self) -> impl Iterator<Item = &GroundAction> {
        self.steps.iter().map(|s| &s.action)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub nodes_expanded: u64,
    pub budget: Budget,
    pub found_goal: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchResult {
    pub plan: PartialPlan,
    pub stats: SearchStats,
}

struct Node {
    state: State,
    parent: Option<usize>,
    action: GroundAction,
    g: u32,
    f: f64,
    closed: bool,
    /// Position in the probabilistic open list, if queued there.
    slot: Option<usize>,
}

/// Search graph shared by both frontier disciplines.
struct Graph<'a> {
    problem: &'a ProblemDef,
    goal: &'a GoalSpec,
    heuristic: &'a Heuristic,
    nodes: Vec<Node>,
    best: HashMap<State, usize>,
    h_cache: HashMap<State, f64>,
}

impl<'a> Graph<'a> {
    fn new(problem: &'a ProblemDef, goal: &'a GoalSpec, heuristic: &'a Heuristic) -> Self {
        Graph { problem, goal, heuristic, nodes: Vec::new(), best: HashMap::new(), h_cache: HashMap::new() }
    }

    fn h(&mut self, s: &State) -> f64 {
        if let Some(&h) = self.h_cache.get(s) {
            return h;
        }
        let h = self.heuristic.evaluate(self.problem, s, self.goal);
        self.h_cache.insert(s.clone(), h);
        h
    }

    /// Add a node unless a node for the same state with `g <= new g`
    /// exists. Returns `(new id, superseded id)`.
    fn offer(
        &mut self,
        state: State,
        parent: Option<usize>,
        action: GroundAction,
        g: u32,
    ) -> Option<(usize, Option<usize>)> {
        let old = self.best.get(&state).copied();
        if let Some(id) = old {
            if self.nodes[id].g <= g {
                return None;
            }
        }
        let h = self.h(&state);
        if !h.is_finite() {
            return None;
        }
        let id = self.nodes.len();
        self.best.insert(state.clone(), id);
        self.nodes.push(Node { state, parent, action, g, f: g as f64 + h, closed: false, slot: None });
        Some((id, old))
    }

    fn successors(&self, id: usize) -> Vec<(State, GroundAction)> {
        let s = &self.nodes[id].state;
        self.problem.available_actions(s).into_iter().map(|a| (self.problem.apply_unchecked(s, &a), a)).collect()
    }

    fn is_goal(&self, id: usize) -> bool {
        self.problem.satisfies(&self.nodes[id].state, self.goal)
    }

    fn plan_to(&self, id: usize, start_time: usize, complete: bool) -> PartialPlan {
        let mut chain = Vec::new();
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            chain.push(PlanStep { state: self.nodes[p].state.clone(), action: self.nodes[cur].action.clone() });
            cur = p;
        }
        chain.reverse();
        PartialPlan { start_time, steps: chain, complete }
    }
}

#[derive(PartialEq)]
struct Entry {
    f: f64,
    id: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // Min-heap on (f, insertion order).
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A* with unit action costs and first-in-first-out tie-breaking.
///
/// Each loop pops the lowest-`f` node, returns a complete plan if it
/// satisfies `goal`, returns the path to it as a partial plan once
/// `budget` expansions have been spent, and otherwise expands it. Nodes
/// with infinite `h` are pruned. An exhausted frontier also yields the
/// path to the last node popped.
pub fn astar(
    problem: &ProblemDef,
    start: &State,
    start_time: usize,
    goal: &GoalSpec,
    heuristic: &Heuristic,
    budget: Budget,
) -> SearchResult {
    let mut graph = Graph::new(problem, goal, heuristic);
    let mut open = BinaryHeap::new();
    let mut expanded = 0u64;
    let mut last = 0;
    if let Some((id, _)) = graph.offer(start.clone(), None, GroundAction::noop(), 0) {
        open.push(Entry { f: graph.nodes[id].f, id });
    } else {
        return unreachable_start(start_time, budget);
    }
    while let Some(Entry { id, .. }) = open.pop() {
        if graph.nodes[id].closed || graph.best.get(&graph.nodes[id].state) != Some(&id) {
            continue;
        }
        last = id;
        if graph.is_goal(id) {
            return finish(&graph, id, start_time, expanded, budget, true);
        }
        if budget.exhausted(expanded) {
            return finish(&graph, id, start_time, expanded, budget, false);
        }
        expanded += 1;
        graph.nodes[id].closed = true;
        let g = graph.nodes[id].g + 1;
        for (s, a) in graph.successors(id) {
            if let Some((child, _)) = graph.offer(s, Some(id), a, g) {
                open.push(Entry { f: graph.nodes[child].f, id: child });
            }
        }
    }
    finish(&graph, last, start_time, expanded, budget, false)
}

/// A* where the node to expand is sampled with probability proportional to
/// `exp(-(f - f_min) / gamma)` over the whole frontier. For
/// `gamma < 1e-8` selection is the deterministic argmin, and the search is
/// identical to [`astar`].
#[allow(clippy::too_many_arguments)]
pub fn probabilistic_astar<R: Rng + ?Sized>(
    problem: &ProblemDef,
    start: &State,
    start_time: usize,
    goal: &GoalSpec,
    heuristic: &Heuristic,
    budget: Budget,
    gamma: f64,
    rng: &mut R,
) -> SearchResult {
    let mut graph = Graph::new(problem, goal, heuristic);
    let mut open: Vec<usize> = Vec::new();
    let mut fvals: Vec<f64> = Vec::new();
    let mut expanded = 0u64;
    match graph.offer(start.clone(), None, GroundAction::noop(), 0) {
        Some((id, _)) => {
            graph.nodes[id].slot = Some(0);
            open.push(id);
            fvals.push(graph.nodes[id].f);
        }
        None => return unreachable_start(start_time, budget),
    }
    let mut last = 0;
    while !open.is_empty() {
        let k = if gamma < GREEDY_GAMMA { argmin_fifo(&open, &fvals) } else { sample_frontier(&fvals, gamma, rng) };
        let id = remove_slot(&mut graph.nodes, &mut open, &mut fvals, k);
        last = id;
        if graph.is_goal(id) {
            return finish(&graph, id, start_time, expanded, budget, true);
        }
        if budget.exhausted(expanded) {
            return finish(&graph, id, start_time, expanded, budget, false);
        }
        expanded += 1;
        graph.nodes[id].closed = true;
        let g = graph.nodes[id].g + 1;
        for (s, a) in graph.successors(id) {
            if let Some((child, old)) = graph.offer(s, Some(id), a, g) {
                if let Some(slot) = old.and_then(|o| graph.nodes[o].slot) {
                    remove_slot(&mut graph.nodes, &mut open, &mut fvals, slot);
                }
                graph.nodes[child].slot = Some(open.len());
                open.push(child);
                fvals.push(graph.nodes[child].f);
            }
        }
    }
    finish(&graph, last, start_time, expanded, budget, false)
}

/// Below this temperature frontier selection is the argmin.
pub const GREEDY_GAMMA: f64 = 1e-8;

fn argmin_fifo(open: &[usize], fvals: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..open.len() {
        match fvals[k].total_cmp(&fvals[best]) {
            Ordering::Less => best = k,
            Ordering::Equal if open[k] < open[best] => best = k,
            _ => {}
        }
    }
    best
}

fn remove_slot(nodes: &mut [Node], open: &mut Vec<usize>, fvals: &mut Vec<f64>, k: usize) -> usize {
    let id = open.swap_remove(k);
    fvals.swap_remove(k);
    nodes[id].slot = None;
    if k < open.len() {
        nodes[open[k]].slot = Some(k);
    }
    id
}

/// Probabilities `∝ exp(-(f - f_min) / gamma)` over frontier `f` values.
pub fn selection_probabilities(fvals: &[f64], gamma: f64) -> Vec<f64> {
    let fmin = fvals.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = fvals.iter().map(|&f| (-(f - fmin) / gamma).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Sample a frontier index with [`selection_probabilities`].
pub fn sample_frontier<R: Rng + ?Sized>(fvals: &[f64], gamma: f64, rng: &mut R) -> usize {
    let fmin = fvals.iter().copied().fold(f64::INFINITY, f64::min);
    let total: f64 = fvals.iter().map(|&f| (-(f - fmin) / gamma).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    for (k, &f) in fvals.iter().enumerate() {
        u -= (-(f - fmin) / gamma).exp();
        if u < 0.0 {
            return k;
        }
    }
    fvals.len() - 1
}

fn finish(graph: &Graph<'_>, id: usize, start_time: usize, expanded: u64, budget: Budget, found: bool) -> SearchResult {
    SearchResult {
        plan: graph.plan_to(id, start_time, found),
        stats: SearchStats { nodes_expanded: expanded, budget, found_goal: found },
    }
}

fn unreachable_start(start_time: usize, budget: Budget) -> SearchResult {
    SearchResult {
        plan: PartialPlan::empty(start_time),
        stats: SearchStats { nodes_expanded: 0, budget, found_goal: false },
    }
}
