use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::pddl::{GroundAction, ProblemDef, State};
use crate::planner::HeuristicKind;

/// How a trajectory was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Optimal,
    Agent { r: u32, q: f64, gamma: f64, heuristic: HeuristicKind },
    External,
}

/// First line of a trajectory file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub domain: String,
    pub problem: String,
    pub goal: String,
    pub provenance: Provenance,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct StepLine {
    t: usize,
    facts: Vec<String>,
    fluents: BTreeMap<String, i64>,
    action: Option<String>,
}

/// An observed state sequence `s_1..s_T` with the `T - 1` actions between.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub manifest: TrajectoryManifest,
    pub states: Vec<State>,
    pub actions: Vec<GroundAction>,
}

impl Trajectory {
    /// Number of observed timesteps.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Check that every action applies and produces the next state.
    pub fn replay(&self, problem: &ProblemDef) -> Result<(), BenchError> {
        if self.states.len() != self.actions.len() + 1 {
            return Err(BenchError::Trajectory(format!(
                "{} states but {} actions",
                self.states.len(),
                self.actions.len()
            )));
        }
        for (t, (s, a)) in self.states.iter().zip(&self.actions).enumerate() {
            let next = problem.apply(s, a).map_err(|e| BenchError::Trajectory(format!("t = {}: {e}", t + 1)))?;
            if next != self.states[t + 1] {
                return Err(BenchError::Trajectory(format!("t = {}: state does not follow from the action", t + 2)));
            }
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, problem: &ProblemDef, mut w: W) -> Result<(), BenchError> {
        serde_json::to_writer(&mut w, &self.manifest)?;
        w.write_all(b"\n")?;
        for (i, s) in self.states.iter().enumerate() {
            let (facts, fluents) = problem.describe_state(s);
            let line = StepLine {
                t: i + 1,
                facts,
                fluents: fluents.into_iter().collect(),
                action: self.actions.get(i).map(|a| a.display(problem).to_string()),
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self, problem: &ProblemDef) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(problem, &mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    /// Read only the manifest line.
    pub fn read_manifest<R: BufRead>(r: R) -> Result<TrajectoryManifest, BenchError> {
        let first = r.lines().next().ok_or_else(|| BenchError::Trajectory("empty trajectory file".into()))??;
        Ok(serde_json::from_str(&first)?)
    }

    pub fn read_jsonl<R: BufRead>(problem: &ProblemDef, r: R) -> Result<Trajectory, BenchError> {
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| BenchError::Trajectory("empty trajectory file".into()))??;
        let manifest: TrajectoryManifest = serde_json::from_str(&first)?;
        if problem.goal_index(&manifest.goal).is_none() {
            return Err(BenchError::Trajectory(format!(
                "goal `{}` is not in problem `{}`",
                manifest.goal, problem.name
            )));
        }
        let (mut states, mut actions) = (Vec::new(), Vec::new());
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let step: StepLine = serde_json::from_str(&line)?;
            if step.t != states.len() + 1 {
                return Err(BenchError::Trajectory(format!("expected t = {}, found {}", states.len() + 1, step.t)));
            }
            let s = problem
                .state_from_description(
                    step.facts.iter().map(String::as_str),
                    step.fluents.iter().map(|(k, v)| (k.as_str(), *v)),
                )
                .map_err(|e| BenchError::Trajectory(format!("t = {}: {e}", step.t)))?;
            states.push(s);
            if let Some(a) = step.action {
                let act = problem
                    .parse_action(&a)
                    .ok_or_else(|| BenchError::Trajectory(format!("t = {}: unknown action {a}", step.t)))?;
                actions.push(act);
            }
        }
        let traj = Trajectory { manifest, states, actions };
        traj.replay(problem)?;
        Ok(traj)
    }
}
