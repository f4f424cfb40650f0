//! Boundedly-rational agent: uniform goal prior, negative-binomial search
//! budgets, lazy replanning with noisy A*, and trajectory simulation.
//!
//! Time is 1-based: `s_1` is the initial state and the action at `t` moves
//! `s_t` to `s_{t+1}`. Action selection is a deterministic lookup of the
//! current plan; all randomness enters through budgets and search.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::pddl::{GoalSpec, GroundAction, ProblemDef, State};
use crate::planner::{
    probabilistic_astar, Budget, Heuristic, HeuristicError, HeuristicKind, PartialPlan, PlanStep, SearchStats,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("invalid agent parameter: {0}")]
    InvalidParams(String),
    #[error("plan does not cover timestep {t} with the observed state")]
    Inconsistent { t: usize },
    #[error(transparent)]
    Heuristic(#[from] HeuristicError),
}

/// Distribution of the node budget for each planner call.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetPrior {
    /// Successes before the `r`-th failure, success probability `q`.
    NegBinomial {
        r: u32,
        q: f64,
    },
    Unlimited,
}

impl BudgetPrior {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Budget {
        match *self {
            BudgetPrior::NegBinomial { r, q } => Budget::Limited(sample_budget(r, q, rng)),
            BudgetPrior::Unlimited => Budget::Unlimited,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            BudgetPrior::NegBinomial { r, q } => r as f64 * q / (1.0 - q),
            BudgetPrior::Unlimited => f64::INFINITY,
        }
    }

    /// Probability mass of budget `n`.
    pub fn pmf(&self, n: u64) -> f64 {
        match *self {
            BudgetPrior::NegBinomial { r, q } => {
                let (r, n) = (r as f64, n as f64);
                let log_binom = ln_gamma(n + r) - ln_gamma(r) - ln_gamma(n + 1.0);
                (log_binom + n * q.ln() + r * (1.0 - q).ln()).exp()
            }
            BudgetPrior::Unlimited => 0.0,
        }
    }
}

/// Number of successes before the `r`-th failure with success probability
/// `q`: a sum of `r` geometric draws. Mean `r q / (1 - q)`.
pub fn sample_budget<R: Rng + ?Sized>(r: u32, q: f64, rng: &mut R) -> u64 {
    if q <= 0.0 {
        return 0;
    }
    let geo = Geometric::new(1.0 - q).expect("0 < q < 1");
    (0..r).map(|_| geo.sample(rng)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub budget: BudgetPrior,
    /// Frontier softmax temperature.
    pub gamma: f64,
    pub heuristic: HeuristicKind,
}

impl AgentParams {
    pub fn new(r: u32, q: f64, gamma: f64, heuristic: HeuristicKind) -> Result<Self, AgentError> {
        let p = AgentParams { budget: BudgetPrior::NegBinomial { r, q }, gamma, heuristic };
        p.validate()?;
        Ok(p)
    }

    /// `r = 2`, `q = 0.95`, `gamma = 0.1`.
    pub fn bounded(heuristic: HeuristicKind) -> Self {
        AgentParams { budget: BudgetPrior::NegBinomial { r: 2, q: 0.95 }, gamma: 0.1, heuristic }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if let BudgetPrior::NegBinomial { r, q } = self.budget {
            if r < 1 {
                return Err(AgentError::InvalidParams(format!("r must be at least 1, got {r}")));
            }
            if !(q > 0.0 && q < 1.0) {
                return Err(AgentError::InvalidParams(format!("q must lie in (0, 1), got {q}")));
            }
        }
        if self.gamma.is_nan() || self.gamma <= 0.0 {
            return Err(AgentError::InvalidParams(format!("gamma must be positive, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Agent parameters bound to a problem, with the heuristic built once.
#[derive(Clone, Debug)]
pub struct AgentModel {
    pub problem: Arc<ProblemDef>,
    pub params: AgentParams,
    pub heuristic: Heuristic,
}

impl AgentModel {
    pub fn new(problem: Arc<ProblemDef>, params: AgentParams) -> Result<Self, AgentError> {
        params.validate()?;
        let heuristic = Heuristic::build(params.heuristic, &problem)?;
        Ok(AgentModel { problem, params, heuristic })
    }
}

/// Uniform draw of a goal index.
pub fn sample_goal<R: Rng + ?Sized>(problem: &ProblemDef, rng: &mut R) -> usize {
    rng.random_range(0..problem.goals.len())
}

/// Whether the plan already predicts `s_t` at `t`.
pub fn plan_predicts(plan: &PartialPlan, t: usize, s_t: &State) -> bool {
    plan.step_at(t).is_some_and(|step| step.state == *s_t)
}

/// Keep `p_prev` if it predicts `s_t` at `t`; otherwise sample a budget,
/// search from `s_t`, and splice the result after `p_prev`'s first `t - 1`
/// timesteps. An empty search result becomes a single no-op step.
pub fn update_plan<R: Rng + ?Sized>(
    model: &AgentModel,
    t: usize,
    s_t: &State,
    p_prev: &Arc<PartialPlan>,
    goal: &GoalSpec,
    rng: &mut R,
) -> (Arc<PartialPlan>, Option<SearchStats>) {
    if plan_predicts(p_prev, t, s_t) {
        return (p_prev.clone(), None);
    }
    let budget = model.params.budget.sample(rng);
    let result = probabilistic_astar(&model.problem, s_t, t, goal, &model.heuristic, budget, model.params.gamma, rng);
    let keep = t.saturating_sub(p_prev.start_time).min(p_prev.len());
    let mut steps: Vec<PlanStep> = p_prev.steps[..keep].to_vec();
    let start_time = if keep == 0 { t } else { p_prev.start_time };
    if result.plan.is_empty() {
        steps.push(PlanStep { state: s_t.clone(), action: GroundAction::noop() });
    } else {
        steps.extend(result.plan.steps);
    }
    (Arc::new(PartialPlan { start_time, steps, complete: result.plan.complete }), Some(result.stats))
}

/// The action the plan prescribes at `t` for `s_t`.
pub fn select_action(t: usize, s_t: &State, plan: &PartialPlan) -> Result<GroundAction, AgentError> {
    match plan.step_at(t) {
        Some(step) if step.state == *s_t => Ok(step.action.clone()),
        _ => Err(AgentError::Inconsistent { t }),
    }
}

/// A (partial) simulated run: `states[k]` is `s_{k+1}`, and `actions[k]` /
/// `plans[k]` were used at time `k + 1`, so `states.len() == actions.len() + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentTrace {
    pub goal: usize,
    pub states: Vec<State>,
    pub actions: Vec<GroundAction>,
    pub plans: Vec<Arc<PartialPlan>>,
    /// `(t, budget)` for every planner call.
    pub budgets: Vec<(usize, Budget)>,
    pub nodes_expanded: u64,
}

impl AgentTrace {
    pub fn start(goal: usize, init: State) -> Self {
        AgentTrace {
            goal,
            states: vec![init],
            actions: Vec::new(),
            plans: Vec::new(),
            budgets: Vec::new(),
            nodes_expanded: 0,
        }
    }

    /// Latest timestep with a state.
    pub fn t(&self) -> usize {
        self.states.len()
    }

    pub fn last_state(&self) -> &State {
        self.states.last().expect("trace has an initial state")
    }

    pub fn planner_calls(&self) -> usize {
        self.budgets.len()
    }

    /// Extend by one timestep under the agent model.
    pub fn extend<R: Rng + ?Sized>(&mut self, model: &AgentModel, rng: &mut R) {
        let t = self.t();
        let goal = &model.problem.goals[self.goal];
        let s_t = self.last_state();
        let empty = Arc::new(PartialPlan::empty(t));
        let prev = self.plans.last().unwrap_or(&empty);
        let (plan, stats) = update_plan(model, t, s_t, prev, goal, rng);
        let action = select_action(t, s_t, &plan).expect("update_plan covers the current state");
        let next = model.problem.apply_unchecked(s_t, &action);
        if let Some(stats) = stats {
            self.budgets.push((t, stats.budget));
            self.nodes_expanded += stats.nodes_expanded;
        }
        self.actions.push(action);
        self.plans.push(plan);
        self.states.push(next);
    }

    /// Drop everything after timestep `t`.
    pub fn truncate(&mut self, t: usize) {
        self.states.truncate(t);
        self.actions.truncate(t - 1);
        self.plans.truncate(t - 1);
        self.budgets.retain(|&(bt, _)| bt < t);
    }
}

/// Sample a run of at most `t_max` actions toward `goal`, stopping as soon
/// as the goal holds.
pub fn simulate<R: Rng + ?Sized>(model: &AgentModel, goal: usize, t_max: usize, rng: &mut R) -> AgentTrace {
    let mut trace = AgentTrace::start(goal, model.problem.init.clone());
    let g = &model.problem.goals[goal];
    while trace.actions.len() < t_max && !model.problem.satisfies(trace.last_state(), g) {
        trace.extend(model, rng);
    }
    trace
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pmf_sums_to_one() {
        let prior = BudgetPrior::NegBinomial { r: 2, q: 0.95 };
        let total: f64 = (0..5000).map(|n| prior.pmf(n)).sum();
        assert!((total - 1.0).abs() < 1e-9);
        let mean: f64 = (0..5000).map(|n| n as f64 * prior.pmf(n)).sum();
        assert!((mean - 38.0).abs() < 1e-6);
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(AgentParams::new(0, 0.5, 0.1, HeuristicKind::GoalCount).is_err());
        assert!(AgentParams::new(1, 1.0, 0.1, HeuristicKind::GoalCount).is_err());
        assert!(AgentParams::new(1, 0.5, 0.0, HeuristicKind::GoalCount).is_err());
        assert!(AgentParams::new(1, 0.5, 0.1, HeuristicKind::GoalCount).is_ok());
    }
}
