use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::trajectory::{Provenance, Trajectory, TrajectoryManifest};
use super::BenchError;
use crate::agent::{simulate, AgentModel, AgentParams, BudgetPrior};
use crate::domains::DomainBundle;
use crate::pddl::{GroundAction, ProblemDef, State};
use crate::planner::{astar, Budget, Heuristic, HeuristicKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// Shortest plans from A*.
    Optimal,
    /// Runs of the bounded replanning agent.
    Suboptimal,
}

fn default_t_max() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub n: usize,
    pub split: Split,
    pub seed: u64,
    /// Agent for the suboptimal split; the bundle's bounded agent if absent.
    #[serde(default)]
    pub agent: Option<AgentParams>,
    /// Heuristic for the optimal split; the bundle default if absent.
    #[serde(default)]
    pub heuristic: Option<HeuristicKind>,
    /// Give up on an agent run after this many actions.
    #[serde(default = "default_t_max")]
    pub t_max: usize,
}

impl DatasetSpec {
    pub fn new(n: usize, split: Split, seed: u64) -> Self {
        DatasetSpec { n, split, seed, agent: None, heuristic: None, t_max: default_t_max() }
    }

    pub fn agent_params(&self, bundle: &DomainBundle) -> AgentParams {
        self.agent.unwrap_or_else(|| AgentParams::bounded(bundle.default_heuristic()))
    }
}

/// Written as `manifest.json` next to the trajectory files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub domain: String,
    pub spec: DatasetSpec,
    pub files: Vec<String>,
    /// Slots skipped because the instance could not be solved.
    pub skipped: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub trajectories: Vec<Trajectory>,
}

/// `(problem, goal)` for slot `i`: goals cycle fastest, then problems.
pub fn slot(i: usize, problems: usize, goals: usize) -> (usize, usize) {
    ((i / goals) % problems, i % goals)
}

/// Generate `spec.n` trajectories balanced over the bundle's benchmark
/// problems and their goals. Unsolvable slots are skipped with a warning.
pub fn generate_dataset(bundle: &DomainBundle, spec: &DatasetSpec) -> Result<Dataset, BenchError> {
    let problems = bundle.benchmark_problems();
    if problems.is_empty() && spec.n > 0 {
        return Err(BenchError::Config(format!("bundle `{}` has no benchmark problems", bundle.name())));
    }
    let mut master = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut trajectories = Vec::with_capacity(spec.n);
    let mut skipped = Vec::new();
    let mut models = Vec::new();
    if spec.split == Split::Suboptimal {
        let params = spec.agent_params(bundle);
        for p in &problems {
            models.push(AgentModel::new(p.clone(), params)?);
        }
    }
    let heuristics: Vec<Heuristic> = match spec.split {
        Split::Optimal => problems
            .iter()
            .map(|p| Heuristic::build(spec.heuristic.unwrap_or(bundle.default_heuristic()), p))
            .collect::<Result<_, _>>()?,
        Split::Suboptimal => Vec::new(),
    };
    for i in 0..spec.n {
        let seed: u64 = master.random();
        let (pi, g) = slot(i, problems.len(), bundle.goal_count());
        let problem = &problems[pi];
        let label = problem.goals[g].label.clone();
        let run = match spec.split {
            Split::Optimal => optimal_run(problem, g, &heuristics[pi]),
            Split::Suboptimal => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let trace = simulate(&models[pi], g, spec.t_max, &mut rng);
                problem.satisfies(trace.last_state(), &problem.goals[g]).then_some((trace.states, trace.actions))
            }
        };
        let Some((states, actions)) = run else {
            let what = format!("{}/{} goal {label} (slot {i})", bundle.name(), problem.name);
            log::warn!("skipping unsolved {what}");
            skipped.push(what);
            continue;
        };
        let provenance = match spec.split {
            Split::Optimal => Provenance::Optimal,
            Split::Suboptimal => {
                let p = spec.agent_params(bundle);
                let (r, q) = match p.budget {
                    BudgetPrior::NegBinomial { r, q } => (r, q),
                    BudgetPrior::Unlimited => (0, 1.0),
                };
                Provenance::Agent { r, q, gamma: p.gamma, heuristic: p.heuristic }
            }
        };
        trajectories.push(Trajectory {
            manifest: TrajectoryManifest {
                domain: bundle.name().to_string(),
                problem: problem.name.clone(),
                goal: label,
                provenance,
                seed,
            },
            states,
            actions,
        });
    }
    let files = (0..trajectories.len()).map(trajectory_file_name).collect();
    Ok(Dataset {
        manifest: DatasetManifest { domain: bundle.name().to_string(), spec: spec.clone(), files, skipped },
        trajectories,
    })
}

fn optimal_run(problem: &Arc<ProblemDef>, g: usize, h: &Heuristic) -> Option<(Vec<State>, Vec<GroundAction>)> {
    let result = astar(problem, &problem.init, 1, &problem.goals[g], h, Budget::Unlimited);
    if !result.stats.found_goal {
        return None;
    }
    let mut states: Vec<State> = result.plan.steps.iter().map(|s| s.state.clone()).collect();
    let actions: Vec<GroundAction> = result.plan.actions().cloned().collect();
    let last = match (states.last(), actions.last()) {
        (Some(s), Some(a)) => problem.apply_unchecked(s, a),
        _ => problem.init.clone(),
    };
    states.push(last);
    Some((states, actions))
}

pub fn trajectory_file_name(i: usize) -> String {
    format!("traj-{i:03}.jsonl")
}

impl Dataset {
    pub fn write(&self, bundle: &DomainBundle, dir: &Path) -> Result<(), BenchError> {
        fs::create_dir_all(dir)?;
        for (file, traj) in self.manifest.files.iter().zip(&self.trajectories) {
            let problem = bundle.problem(&traj.manifest.problem)?;
            fs::write(dir.join(file), traj.to_jsonl(&problem))?;
        }
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&self.manifest)? + "\n")?;
        Ok(())
    }

    pub fn read(bundle: &DomainBundle, dir: &Path) -> Result<Dataset, BenchError> {
        let manifest: DatasetManifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
        if manifest.domain != bundle.name() {
            return Err(BenchError::Config(format!("dataset is for `{}`, not `{}`", manifest.domain, bundle.name())));
        }
        let mut trajectories = Vec::with_capacity(manifest.files.len());
        for file in &manifest.files {
            let path = dir.join(file);
            let head = Trajectory::read_manifest(BufReader::new(fs::File::open(&path)?))?;
            let problem = bundle.problem(&head.problem)?;
            trajectories.push(Trajectory::read_jsonl(&problem, BufReader::new(fs::File::open(&path)?))?);
        }
        Ok(Dataset { manifest, trajectories })
    }
}
