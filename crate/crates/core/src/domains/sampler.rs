use rand::Rng;
use serde::{Deserialize, Serialize};

use super::text::random_towers;
use crate::pddl::{ObjectId, ProblemDef, State};

/// Draws states for asynchronous value iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSampler {
    /// End point of a uniform random walk of uniform length in
    /// `0..=max_steps` from the initial state. Only reachable states.
    RandomWalk { max_steps: usize },
    /// Uniformly shuffled block towers, holding a random clear block with
    /// probability `1 / (blocks + 1)`.
    Towers,
    /// Grid configurations: the agent on a uniform open cell, each initial
    /// door kept locked with probability 1/2, and each item either held or
    /// lying on a uniform open cell with equal odds.
    GridItems,
}

impl StateSampler {
    pub fn sample<R: Rng + ?Sized>(&self, problem: &ProblemDef, rng: &mut R) -> State {
        match *self {
            StateSampler::RandomWalk { max_steps } => {
                let steps = rng.random_range(0..=max_steps);
                let mut s = problem.init.clone();
                for _ in 0..steps {
                    let acts = problem.available_actions(&s);
                    if acts.is_empty() {
                        break;
                    }
                    let a = &acts[rng.random_range(0..acts.len())];
                    s = problem.apply_unchecked(&s, a);
                }
                s
            }
            StateSampler::Towers => sample_towers(problem, rng),
            StateSampler::GridItems => sample_grid_items(problem, rng),
        }
    }
}

fn sample_towers<R: Rng + ?Sized>(problem: &ProblemDef, rng: &mut R) -> State {
    let dom = &problem.domain;
    let block_ty = dom.type_id("block").expect("block type");
    let blocks: Vec<String> =
        problem.objects_of_type(block_ty).iter().map(|&o| problem.object_name(o).to_string()).collect();
    let mut towers = random_towers(&blocks, rng);
    let mut s = problem.empty_state();
    let mut set = |text: String| {
        let atom = problem.atom_by_name(&text).unwrap_or_else(|| panic!("unknown atom {text}"));
        s.set_atom(atom, true);
    };
    if rng.random_range(0..=blocks.len()) == 0 && !towers.is_empty() {
        let k = rng.random_range(0..towers.len());
        let held = towers[k].pop().unwrap();
        if towers[k].is_empty() {
            towers.remove(k);
        }
        set(format!("(holding {held})"));
    } else {
        set("(handempty)".to_string());
    }
    for t in &towers {
        set(format!("(ontable {})", t[0]));
        for w in t.windows(2) {
            set(format!("(on {} {})", w[1], w[0]));
        }
        set(format!("(clear {})", t[t.len() - 1]));
    }
    s
}

fn sample_grid_items<R: Rng + ?Sized>(problem: &ProblemDef, rng: &mut R) -> State {
    let dom = &problem.domain;
    let coords = problem.objects_of_type(dom.type_id("coord").expect("coord type"));
    let items = problem.objects_of_type(dom.type_id("item").expect("item type"));
    let name = |o: ObjectId| problem.object_name(o);
    let atom = |text: String| problem.atom_by_name(&text).unwrap_or_else(|| panic!("unknown atom {text}"));
    let val =
        |c: ObjectId| problem.init.fluent(problem.fluent_by_name(&format!("(val {})", name(c))).expect("val fluent"));

    let mut s = problem.empty_state();
    for a in problem.init.true_atoms() {
        if problem.is_static_atom(a) {
            s.set_atom(a, true);
        }
    }
    for f in 0..problem.num_fluents() {
        s.set_fluent(f, problem.init.fluent(f));
    }
    for a in problem.init.true_atoms() {
        if problem.atom_name(a).starts_with("(door ") && rng.random_bool(0.5) {
            s.set_atom(a, true);
        }
    }
    let open: Vec<(ObjectId, ObjectId)> = coords
        .iter()
        .flat_map(|&x| coords.iter().map(move |&y| (x, y)))
        .filter(|&(x, y)| {
            let cell = format!("{} {})", name(x), name(y));
            !s.holds(atom(format!("(wall {cell}"))) && !s.holds(atom(format!("(door {cell}")))
        })
        .collect();
    for &i in items {
        if rng.random_bool(0.5) {
            s.set_atom(atom(format!("(has {})", name(i))), true);
        } else {
            let (x, y) = open[rng.random_range(0..open.len())];
            s.set_atom(atom(format!("(at {} {} {})", name(i), name(x), name(y))), true);
        }
    }
    let (x, y) = open[rng.random_range(0..open.len())];
    s.set_fluent(problem.fluent_by_name("(xpos)").expect("xpos"), val(x));
    s.set_fluent(problem.fluent_by_name("(ypos)").expect("ypos"), val(y));
    s
}
