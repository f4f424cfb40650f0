//! Heuristic search: deterministic and sampled-frontier A* over ground
//! states, with grid, maze, goal-count and additive heuristics.

mod heuristic;
mod search;

pub use heuristic::{h_add, relaxed_costs, GridSpec, Heuristic, HeuristicError, HeuristicKind, MazeTable};
pub use search::{
    astar, probabilistic_astar, sample_frontier, selection_probabilities, Budget, PartialPlan, PlanStep, SearchResult,
    SearchStats, GREEDY_GAMMA,
};

/// Numerically stable `softmax(-x / temperature)`.
pub fn softmin(xs: &[f64], temperature: f64) -> Vec<f64> {
    let m = xs.iter().copied().fold(f64::INFINITY, f64::min);
    if !m.is_finite() {
        let n = xs.iter().filter(|x| **x == m).count().max(1) as f64;
        return xs.iter().map(|&x| if x == m { 1.0 / n } else { 0.0 }).collect();
    }
    let w: Vec<f64> = xs.iter().map(|&x| (-(x - m) / temperature).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// `log(Σ exp(x))`, `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}
