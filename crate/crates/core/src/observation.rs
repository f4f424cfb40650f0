//! Observation channel: symmetric bit flips over the full ground-atom
//! vocabulary and Gaussian noise on fluents.

use fixedbitset::FixedBitSet;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{ProblemDef, State};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid noise model: {0}")]
pub struct NoiseError(String);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Probability that any one atom is observed with the wrong value.
    pub flip_prob: f64,
    /// Standard deviation of the additive noise on each fluent.
    pub sigma: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel { flip_prob: 0.05, sigma: 0.25 }
    }
}

impl NoiseModel {
    pub const EXACT: NoiseModel = NoiseModel { flip_prob: 0.0, sigma: 0.0 };

    pub fn new(flip_prob: f64, sigma: f64) -> Result<Self, NoiseError> {
        let nm = NoiseModel { flip_prob, sigma };
        nm.validate()?;
        Ok(nm)
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        if !(0.0..0.5).contains(&self.flip_prob) {
            return Err(NoiseError(format!("flip_prob must lie in [0, 0.5), got {}", self.flip_prob)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(NoiseError(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// An observed state: atoms as a bit set over the problem vocabulary and
/// real-valued fluents.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub facts: FixedBitSet,
    pub fluents: Vec<f64>,
}

impl Observation {
    pub fn exact(s: &State) -> Self {
        Observation { facts: s.facts().clone(), fluents: s.fluents().iter().map(|&v| v as f64).collect() }
    }

    /// Nearest state: fluents rounded, static atoms and fluents restored
    /// from the initial state.
    pub fn to_state(&self, problem: &ProblemDef) -> State {
        let mut s = problem.empty_state();
        for a in self.facts.ones() {
            if !problem.is_static_atom(a) {
                s.set_atom(a, true);
            }
        }
        for a in problem.init.true_atoms() {
            if problem.is_static_atom(a) {
                s.set_atom(a, true);
            }
        }
        for (f, &v) in self.fluents.iter().enumerate() {
            let v = if problem.is_static_fluent(f) { problem.init.fluent(f) } else { v.round() as i64 };
            s.set_fluent(f, v);
        }
        s
    }

    /// Number of atoms whose observed value differs from `s`.
    pub fn mismatches(&self, s: &State) -> usize {
        self.facts.as_slice().iter().zip(s.facts().as_slice()).map(|(a, b)| (a ^ b).count_ones() as usize).sum()
    }

    /// Whether `s` differs from this observation by more than noise would
    /// plausibly explain: any mismatched atom or a fluent off by more than
    /// two standard deviations.
    pub fn diverges_from(&self, s: &State, nm: &NoiseModel) -> bool {
        self.mismatches(s) > 0
            || self.fluents.iter().zip(s.fluents()).any(|(&o, &v)| (o - v as f64).abs() > 2.0 * nm.sigma)
    }
}

/// Flip each atom independently with `flip_prob` and add `Normal(0, sigma)`
/// to each fluent.
pub fn corrupt<R: Rng + ?Sized>(s: &State, nm: &NoiseModel, rng: &mut R) -> Observation {
    let mut o = Observation::exact(s);
    if nm.flip_prob > 0.0 {
        for a in 0..o.facts.len() {
            if rng.random_bool(nm.flip_prob) {
                o.facts.toggle(a);
            }
        }
    }
    if nm.sigma > 0.0 {
        let normal = Normal::new(0.0, nm.sigma).expect("sigma is finite");
        for v in &mut o.fluents {
            *v += normal.sample(rng);
        }
    }
    o
}

/// `log P(o | s)`. Zero-noise channels score exact matches 0 and anything
/// else `-inf`.
pub fn log_likelihood(o: &Observation, s: &State, nm: &NoiseModel) -> f64 {
    let n = o.facts.len();
    let k = o.mismatches(s);
    let mut ll = if nm.flip_prob > 0.0 {
        k as f64 * nm.flip_prob.ln() + (n - k) as f64 * (1.0 - nm.flip_prob).ln()
    } else if k > 0 {
        return f64::NEG_INFINITY;
    } else {
        0.0
    };
    if nm.sigma > 0.0 {
        let norm = -0.5 * (2.0 * std::f64::consts::PI).ln() - nm.sigma.ln();
        let inv = 1.0 / (2.0 * nm.sigma * nm.sigma);
        for (&ov, &sv) in o.fluents.iter().zip(s.fluents()) {
            let d = ov - sv as f64;
            ll += norm - d * d * inv;
        }
    } else if o.fluents.iter().zip(s.fluents()).any(|(&ov, &sv)| ov != sv as f64) {
        return f64::NEG_INFINITY;
    }
    ll
}
