//! Goal inference over boundedly-rational planning agents.
//!
//! The crate models an agent that interleaves budget-limited, noisy A* search
//! with execution, and inverts that model online with a particle filter over
//! (goal, plan) hypotheses. Bayesian IRL and plan-recognition-as-planning
//! baselines share the same posterior snapshot format so the benchmark
//! harness can compare them directly.

pub mod agent;
pub mod baselines;
pub mod bench;
pub mod domains;
pub mod observation;
pub mod pddl;
pub mod planner;
pub mod sips;
