#![allow(dead_code)]

use std::sync::Arc;

use inverse_plan::domains::{doors_keys_gems_domain, gridworld_domain, GridMap};
use inverse_plan::pddl::{parse_domain, parse_problem, ProblemDef, State};

pub fn grid_problem(ascii: &str) -> (GridMap, Arc<ProblemDef>) {
    let map = GridMap::parse(ascii).unwrap();
    let text = map.gridworld_problem("test-grid");
    (map, Arc::new(parse_problem(&text, gridworld_domain()).unwrap()))
}

/// Shortest path length from the map start to a target letter.
pub fn bfs_len(map: &GridMap, letter: char) -> Option<usize> {
    map.bfs(map.start, true).get(&map.gems[&letter]).copied()
}

pub const BLOCKS: &str = include_str!("../../data/v1/block-words/domain.pddl");

pub fn blocks_problem(objects: &str, init: &str, goals: &str) -> Arc<ProblemDef> {
    let domain = Arc::new(parse_domain(BLOCKS).unwrap());
    let text = format!(
        "(define (problem t) (:domain block-words) (:objects {objects} - block) (:init {init}) (:goals {goals}))"
    );
    Arc::new(parse_problem(&text, domain).unwrap())
}

/// Three actions in a row with two goals that diverge at the first step:
/// `a` is reached by going right, `b` by going left.
pub const LINE_5: &str = "B.s.A";

pub fn dkg_problem(ascii: &str) -> (GridMap, Arc<ProblemDef>) {
    let map = GridMap::parse(ascii).unwrap();
    let text = map.dkg_problem("test-dkg");
    (map, Arc::new(parse_problem(&text, doors_keys_gems_domain()).unwrap()))
}

/// Agent cell from the `xpos` and `ypos` fluents.
pub fn agent_cell(problem: &ProblemDef, s: &State) -> (usize, usize) {
    let x = problem.fluent_by_name("(xpos)").unwrap();
    let y = problem.fluent_by_name("(ypos)").unwrap();
    (s.fluent(x) as usize, s.fluent(y) as usize)
}

/// Plan recognition posteriors on a gridworld computed directly from BFS
/// distances: `P(g | s_1..s_t) ∝ exp(-beta ((t - 1) + d(s_t, g) - d(s_1, g)))`.
pub fn grid_prp_oracle(map: &GridMap, cells: &[(usize, usize)], beta: f64) -> Vec<Vec<f64>> {
    let targets: Vec<(usize, usize)> = map.gems.values().copied().collect();
    let dist = |from, to| map.bfs(from, true).get(&to).map(|&d| d as f64);
    cells
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let scores: Vec<f64> = targets
                .iter()
                .map(|&g| match (dist(c, g), dist(cells[0], g)) {
                    (Some(d), Some(d0)) => (-beta * (i as f64 + d - d0)).exp(),
                    _ => 0.0,
                })
                .collect();
            let z: f64 = scores.iter().sum();
            scores.iter().map(|x| x / z).collect()
        })
        .collect()
}
