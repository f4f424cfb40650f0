//! Sequential inverse plan search: a particle filter over (goal, agent
//! trace) hypotheses with lazily extended partial plans, ESS-triggered
//! systematic resampling and two Metropolis-Hastings rejuvenation moves.

use std::sync::Arc;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentError, AgentModel, AgentParams, AgentTrace};
use crate::observation::{log_likelihood, NoiseModel, Observation};
use crate::pddl::ProblemDef;
use crate::planner::{log_sum_exp, softmin, HeuristicKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SipsError {
    #[error("every particle has zero likelihood at t = {t}")]
    AllParticlesDead { t: usize },
    #[error("invalid inference config: {0}")]
    InvalidConfig(String),
    #[error("no observations")]
    NoObservations,
    #[error(transparent)]
    Agent(#[from] AgentError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejuvenation {
    pub enabled: bool,
    /// Probability of a goal move rather than a replanning move.
    pub goal_move_prob: f64,
    /// Temperature of the goal proposal `softmax(-h / temperature)`.
    pub temperature: f64,
}

impl Rejuvenation {
    pub const OFF: Rejuvenation = Rejuvenation { enabled: false, goal_move_prob: 0.25, temperature: 1.0 };

    pub fn with_goal_moves(goal_move_prob: f64) -> Self {
        Rejuvenation { enabled: true, goal_move_prob, temperature: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SipsConfig {
    pub particles_per_goal: usize,
    /// Resample when `ESS / k` falls below this fraction.
    pub ess_threshold: f64,
    pub agent: AgentParams,
    pub noise: NoiseModel,
    pub rejuvenation: Rejuvenation,
}

impl SipsConfig {
    /// 10 particles per goal, threshold 1/4, bounded agent, default noise,
    /// no rejuvenation.
    pub fn new(heuristic: HeuristicKind) -> Self {
        SipsConfig {
            particles_per_goal: 10,
            ess_threshold: 0.25,
            agent: AgentParams::bounded(heuristic),
            noise: NoiseModel::default(),
            rejuvenation: Rejuvenation::OFF,
        }
    }

    pub fn validate(&self) -> Result<(), SipsError> {
        if self.particles_per_goal == 0 {
            return Err(SipsError::InvalidConfig("particles_per_goal must be at least 1".into()));
        }
        if !(self.ess_threshold > 0.0 && self.ess_threshold <= 1.0) {
            return Err(SipsError::InvalidConfig(format!(
                "ess_threshold must lie in (0, 1], got {}",
                self.ess_threshold
            )));
        }
        let r = &self.rejuvenation;
        if r.enabled && !((0.0..=1.0).contains(&r.goal_move_prob) && r.temperature > 0.0) {
            return Err(SipsError::InvalidConfig(
                "goal_move_prob must lie in [0, 1] and temperature be positive".into(),
            ));
        }
        self.noise.validate().map_err(|e| SipsError::InvalidConfig(e.to_string()))?;
        self.agent.validate()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Particle {
    pub trace: AgentTrace,
    pub log_weight: f64,
    /// `log P(o_t | s_t)` for every timestep of the trace.
    pub obs_ll: Vec<f64>,
    rng: ChaCha8Rng,
}

impl Particle {
    pub fn goal(&self) -> usize {
        self.trace.goal
    }

    fn total_ll(&self) -> f64 {
        self.obs_ll.iter().sum()
    }
}

#[derive(Clone, Debug)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
    /// Latest observed timestep (0 before the first observation).
    pub t: usize,
    pub nodes_expanded: u64,
    pub planner_calls: u64,
    pub resamples: usize,
    pub rejuvenations_accepted: usize,
}

impl ParticleSet {
    pub fn log_weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.log_weight).collect()
    }
}

/// Goal posterior at one timestep. Shared by every inference method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSnapshot {
    pub t: usize,
    pub probs: IndexMap<String, f64>,
    /// Effective sample size, for particle methods.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ess: Option<f64>,
    /// Cumulative planner or value-iteration state visits.
    pub nodes_expanded: u64,
}

impl PosteriorSnapshot {
    /// Normalize per-goal log scores; all `-inf` gives the uniform
    /// distribution.
    pub fn from_log_scores(
        t: usize,
        labels: &[String],
        log_scores: &[f64],
        ess: Option<f64>,
        nodes_expanded: u64,
    ) -> Self {
        let z = log_sum_exp(log_scores);
        let n = labels.len() as f64;
        let probs = labels
            .iter()
            .zip(log_scores)
            .map(|(l, &s)| (l.clone(), if z == f64::NEG_INFINITY { 1.0 / n } else { (s - z).exp() }))
            .collect();
        PosteriorSnapshot { t, probs, ess, nodes_expanded }
    }

    pub fn prob(&self, label: &str) -> f64 {
        self.probs.get(label).copied().unwrap_or(0.0)
    }

    /// Labels attaining the maximum probability.
    pub fn argmax(&self) -> Vec<&str> {
        let best = self.probs.values().copied().fold(f64::NEG_INFINITY, f64::max);
        self.probs.iter().filter(|(_, &p)| p == best).map(|(l, _)| l.as_str()).collect()
    }
}

/// `(Σw)² / Σw²` from log weights; `-inf` entries count as zero weight.
pub fn ess(log_weights: &[f64]) -> f64 {
    let m = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return 0.0;
    }
    let (mut s1, mut s2) = (0.0, 0.0);
    for &lw in log_weights {
        let w = (lw - m).exp();
        s1 += w;
        s2 += w * w;
    }
    s1 * s1 / s2
}

/// Systematic resampling: ancestor indices for `n` offspring with the
/// single offset `u` in `[0, 1)`.
pub fn systematic_resample(log_weights: &[f64], n: usize, u: f64) -> Vec<usize> {
    let z = log_sum_exp(log_weights);
    let w: Vec<f64> = log_weights.iter().map(|&lw| (lw - z).exp()).collect();
    let last_live = w.iter().rposition(|&x| x > 0.0).expect("at least one live particle");
    let mut out = Vec::with_capacity(n);
    let (mut i, mut cum) = (0, w[0]);
    for j in 0..n {
        let target = (j as f64 + u) / n as f64;
        while cum <= target && i < last_live {
            i += 1;
            cum += w[i];
        }
        out.push(i);
    }
    out
}

/// Per-goal sums of normalized weights.
pub fn goal_posterior(problem: &ProblemDef, ps: &ParticleSet) -> PosteriorSnapshot {
    let labels = problem.goal_labels();
    let mut per_goal = vec![Vec::new(); labels.len()];
    for p in &ps.particles {
        per_goal[p.goal()].push(p.log_weight);
    }
    let scores: Vec<f64> = per_goal.iter().map(|w| log_sum_exp(w)).collect();
    PosteriorSnapshot::from_log_scores(ps.t, &labels, &scores, Some(ess(&ps.log_weights())), ps.nodes_expanded)
}

/// A configured particle filter for one problem.
#[derive(Clone, Debug)]
pub struct Sips {
    pub model: AgentModel,
    pub cfg: SipsConfig,
}

impl Sips {
    pub fn new(problem: Arc<ProblemDef>, cfg: SipsConfig) -> Result<Self, SipsError> {
        cfg.validate()?;
        Ok(Sips { model: AgentModel::new(problem, cfg.agent)?, cfg })
    }

    pub fn problem(&self) -> &ProblemDef {
        &self.model.problem
    }

    /// `particles_per_goal` particles for each goal, uniform weights.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParticleSet {
        let init = &self.problem().init;
        let particles = (0..self.problem().goals.len())
            .flat_map(|g| (0..self.cfg.particles_per_goal).map(move |_| g))
            .map(|g| Particle {
                trace: AgentTrace::start(g, init.clone()),
                log_weight: 0.0,
                obs_ll: Vec::new(),
                rng: ChaCha8Rng::seed_from_u64(rng.random()),
            })
            .collect();
        ParticleSet { particles, t: 0, nodes_expanded: 0, planner_calls: 0, resamples: 0, rejuvenations_accepted: 0 }
    }

    /// Incorporate `observations[t - 1]` where `t = ps.t + 1`. Earlier
    /// entries are the history used by rejuvenation.
    pub fn step<R: Rng + ?Sized>(
        &self,
        ps: &mut ParticleSet,
        observations: &[Observation],
        rng: &mut R,
    ) -> Result<(), SipsError> {
        let t = ps.t + 1;
        assert_eq!(observations.len(), t, "step expects observations o_1..o_t");
        if t > 1 {
            let k = ps.particles.len() as f64;
            if ess(&ps.log_weights()) / k < self.cfg.ess_threshold {
                self.resample(ps, rng);
                if self.cfg.rejuvenation.enabled {
                    self.rejuvenate_all(ps, &observations[..t - 1]);
                }
            }
            let model = &self.model;
            let work: Vec<(u64, u64)> = ps
                .particles
                .par_iter_mut()
                .map(|p| {
                    let (n0, c0) = (p.trace.nodes_expanded, p.trace.planner_calls());
                    p.trace.extend(model, &mut p.rng);
                    (p.trace.nodes_expanded - n0, (p.trace.planner_calls() - c0) as u64)
                })
                .collect();
            for (n, c) in work {
                ps.nodes_expanded += n;
                ps.planner_calls += c;
            }
        }
        let o = &observations[t - 1];
        let noise = &self.cfg.noise;
        ps.particles.par_iter_mut().for_each(|p| {
            let ll = log_likelihood(o, p.trace.last_state(), noise);
            p.obs_ll.push(ll);
            p.log_weight += ll;
        });
        ps.t = t;
        if ps.particles.iter().all(|p| p.log_weight == f64::NEG_INFINITY) {
            return Err(SipsError::AllParticlesDead { t });
        }
        Ok(())
    }

    fn resample<R: Rng + ?Sized>(&self, ps: &mut ParticleSet, rng: &mut R) {
        let lw = ps.log_weights();
        let ancestors = systematic_resample(&lw, lw.len(), rng.random());
        ps.particles = ancestors
            .into_iter()
            .map(|a| {
                let mut child = ps.particles[a].clone();
                child.log_weight = 0.0;
                child.rng = ChaCha8Rng::seed_from_u64(rng.random());
                child
            })
            .collect();
        ps.resamples += 1;
    }

    fn rejuvenate_all(&self, ps: &mut ParticleSet, history: &[Observation]) {
        let proposal = self.goal_proposal(history.last().expect("non-empty history"));
        let results: Vec<(bool, u64)> =
            ps.particles.par_iter_mut().map(|p| self.rejuvenate(p, history, &proposal)).collect();
        for (accepted, nodes) in results {
            ps.rejuvenations_accepted += accepted as usize;
            ps.nodes_expanded += nodes;
        }
    }

    /// `softmax(-h(o, g) / temperature)` over goals.
    pub fn goal_proposal(&self, o: &Observation) -> Vec<f64> {
        let s = o.to_state(self.problem());
        let h: Vec<f64> =
            self.problem().goals.iter().map(|g| self.model.heuristic.evaluate(self.problem(), &s, g)).collect();
        softmin(&h, self.cfg.rejuvenation.temperature)
    }

    /// One Metropolis-Hastings move on a particle whose trace spans the
    /// history. Returns whether the proposal was accepted and the planner
    /// work it cost.
    pub fn rejuvenate(&self, p: &mut Particle, history: &[Observation], goal_proposal: &[f64]) -> (bool, u64) {
        let tau = history.len();
        debug_assert_eq!(p.trace.t(), tau);
        let old_ll = p.total_ll();
        let (trace, obs_ll, log_q_ratio, nodes) = if p.rng.random::<f64>() < self.cfg.rejuvenation.goal_move_prob {
            let g_new = sample_index(goal_proposal, &mut p.rng);
            let mut trace = AgentTrace::start(g_new, self.problem().init.clone());
            while trace.t() < tau {
                trace.extend(&self.model, &mut p.rng);
            }
            let obs_ll = self.score(&trace, history, 0, Vec::new());
            let q = goal_proposal[p.goal()].ln() - goal_proposal[g_new].ln();
            let nodes = trace.nodes_expanded;
            (trace, obs_ll, q, nodes)
        } else {
            let q_old = self.divergence_proposal(&p.trace, history);
            let t_star = sample_index(&q_old, &mut p.rng) + 1;
            let mut trace = p.trace.clone();
            trace.truncate(t_star);
            let n0 = trace.nodes_expanded;
            while trace.t() < tau {
                trace.extend(&self.model, &mut p.rng);
            }
            let obs_ll = self.score(&trace, history, t_star, p.obs_ll[..t_star].to_vec());
            let q_new = self.divergence_proposal(&trace, history);
            let nodes = trace.nodes_expanded - n0;
            (trace, obs_ll, q_new[t_star - 1].ln() - q_old[t_star - 1].ln(), nodes)
        };
        let new_ll: f64 = obs_ll.iter().sum();
        let log_alpha = if new_ll == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else if old_ll == f64::NEG_INFINITY {
            0.0
        } else {
            new_ll - old_ll + log_q_ratio
        };
        let accept = log_alpha >= 0.0 || p.rng.random::<f64>().ln() < log_alpha;
        if accept {
            p.trace = trace;
            p.obs_ll = obs_ll;
        }
        (accept, nodes)
    }

    fn score(&self, trace: &AgentTrace, history: &[Observation], from: usize, mut prefix: Vec<f64>) -> Vec<f64> {
        for (o, s) in history.iter().zip(&trace.states).skip(from) {
            prefix.push(log_likelihood(o, s, &self.cfg.noise));
        }
        prefix
    }

    /// `Q(t* | s, o)` over `1..=tau`: `softmax(-|t - t_div| / 2)` around the
    /// first divergence, uniform when there is none.
    pub fn divergence_proposal(&self, trace: &AgentTrace, history: &[Observation]) -> Vec<f64> {
        let tau = history.len();
        let t_div =
            history.iter().zip(&trace.states).position(|(o, s)| o.diverges_from(s, &self.cfg.noise)).map(|i| i + 1);
        match t_div {
            Some(d) => {
                let dist: Vec<f64> = (1..=tau).map(|t| (t as f64 - d as f64).abs()).collect();
                softmin(&dist, 2.0)
            }
            None => vec![1.0 / tau as f64; tau],
        }
    }

    /// Filter over every observation, returning one snapshot per timestep.
    pub fn run<R: Rng + ?Sized>(
        &self,
        observations: &[Observation],
        rng: &mut R,
    ) -> Result<Vec<PosteriorSnapshot>, SipsError> {
        if observations.is_empty() {
            return Err(SipsError::NoObservations);
        }
        let mut ps = self.init(rng);
        let mut out = Vec::with_capacity(observations.len());
        for t in 1..=observations.len() {
            self.step(&mut ps, &observations[..t], rng)?;
            out.push(goal_posterior(self.problem(), &ps));
        }
        Ok(out)
    }
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let mut u = rng.random::<f64>() * probs.iter().sum::<f64>();
    for (i, &p) in probs.iter().enumerate() {
        if u < p {
            return i;
        }
        u -= p;
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ess_closed_forms() {
        assert!((ess(&[0.0; 30]) - 30.0).abs() < 1e-12);
        assert!((ess(&[0.0, f64::NEG_INFINITY, f64::NEG_INFINITY]) - 1.0).abs() < 1e-12);
        let w = [2f64.ln(), 0.0, 0.0];
        assert!((ess(&w) - 16.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn systematic_resampling_offspring() {
        let lw: Vec<f64> = [0.7f64, 0.2, 0.1].iter().map(|w| w.ln()).collect();
        for k in 0..100 {
            let a = systematic_resample(&lw, 10, k as f64 / 100.0);
            let counts: Vec<usize> = (0..3).map(|i| a.iter().filter(|&&x| x == i).count()).collect();
            assert_eq!(counts, vec![7, 2, 1]);
        }
        let equal = systematic_resample(&[0.0; 8], 8, 0.37);
        assert_eq!(equal, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn zero_weight_ancestors_never_drawn() {
        let lw = [0.5f64.ln(), 0.5f64.ln(), f64::NEG_INFINITY, f64::NEG_INFINITY];
        for k in 0..50 {
            let a = systematic_resample(&lw, 4, k as f64 / 50.0);
            assert!(a.iter().all(|&i| i < 2));
        }
    }

    #[test]
    fn snapshot_from_scores() {
        let labels = vec!["a".to_string(), "b".to_string()];
        let s = PosteriorSnapshot::from_log_scores(1, &labels, &[0.75f64.ln(), 0.25f64.ln()], None, 0);
        assert!((s.prob("a") - 0.75).abs() < 1e-12);
        let flat = PosteriorSnapshot::from_log_scores(1, &labels, &[f64::NEG_INFINITY; 2], None, 0);
        assert_eq!(flat.prob("b"), 0.5);
    }
}
