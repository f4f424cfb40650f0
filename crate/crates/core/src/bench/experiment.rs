use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{generate_dataset, Dataset, DatasetSpec};
use super::metrics::{quartile_metrics, write_metrics_csv, MetricsRow, QuartileMetrics, RunCost};
use super::trajectory::Trajectory;
use super::BenchError;
use crate::agent::AgentParams;
use crate::baselines::{birl_posteriors, prp_posteriors, value_iteration, PrpCache, QFunction, ViConfig, ViMode};
use crate::domains::{load_bundle, DomainBundle};
use crate::observation::{corrupt, NoiseModel, Observation};
use crate::pddl::{ProblemDef, State};
use crate::planner::{Heuristic, HeuristicKind};
use crate::sips::{goal_posterior, PosteriorSnapshot, Rejuvenation, Sips, SipsConfig};

fn default_particles() -> usize {
    10
}
fn default_ess() -> f64 {
    0.25
}
fn one() -> f64 {
    1.0
}
fn default_discount() -> f64 {
    0.9
}

/// A goal-inference method and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum MethodSpec {
    Sips {
        #[serde(default = "default_particles")]
        particles_per_goal: usize,
        #[serde(default = "default_ess")]
        ess_threshold: f64,
        /// The bundle's bounded agent if absent.
        #[serde(default)]
        agent: Option<AgentParams>,
        #[serde(default)]
        rejuvenation: Option<Rejuvenation>,
    },
    BirlUnbiased {
        #[serde(default = "one")]
        alpha: f64,
        #[serde(default = "default_discount")]
        discount: f64,
        /// Per goal: sweeps when `sync`, single-state updates otherwise.
        iterations: usize,
        #[serde(default)]
        sync: bool,
    },
    BirlOracle {
        #[serde(default = "one")]
        alpha: f64,
        #[serde(default = "default_discount")]
        discount: f64,
        iterations: usize,
    },
    Prp {
        #[serde(default = "one")]
        beta: f64,
        /// The bundle default if absent.
        #[serde(default)]
        heuristic: Option<HeuristicKind>,
    },
}

impl MethodSpec {
    /// Ten particles per goal, threshold 1/4, no rejuvenation.
    pub fn sips() -> Self {
        MethodSpec::Sips { particles_per_goal: 10, ess_threshold: 0.25, agent: None, rejuvenation: None }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::Sips { .. } => "sips",
            MethodSpec::BirlUnbiased { .. } => "birl-unbiased",
            MethodSpec::BirlOracle { .. } => "birl-oracle",
            MethodSpec::Prp { .. } => "prp",
        }
    }

    pub fn sips_config(&self, bundle: &DomainBundle, noise: NoiseModel) -> Option<SipsConfig> {
        match *self {
            MethodSpec::Sips { particles_per_goal, ess_threshold, agent, rejuvenation } => Some(SipsConfig {
                particles_per_goal,
                ess_threshold,
                agent: agent.unwrap_or_else(|| AgentParams::bounded(bundle.default_heuristic())),
                noise,
                rejuvenation: rejuvenation.unwrap_or(Rejuvenation::OFF),
            }),
            _ => None,
        }
    }

    fn validate(&self, bundle: &DomainBundle, noise: NoiseModel) -> Result<(), BenchError> {
        match self {
            MethodSpec::Sips { .. } => self.sips_config(bundle, noise).expect("sips").validate()?,
            MethodSpec::BirlUnbiased { alpha, discount, iterations, .. }
            | MethodSpec::BirlOracle { alpha, discount, iterations } => {
                if !alpha.is_finite() || *alpha < 0.0 {
                    return Err(BenchError::Config(format!("alpha must be non-negative, got {alpha}")));
                }
                if !(*discount > 0.0 && *discount < 1.0) {
                    return Err(BenchError::Config(format!("discount must lie in (0, 1), got {discount}")));
                }
                if *iterations == 0 {
                    return Err(BenchError::Config("iterations must be at least 1".into()));
                }
            }
            MethodSpec::Prp { beta, .. } => {
                if !beta.is_finite() || *beta < 0.0 {
                    return Err(BenchError::Config(format!("beta must be non-negative, got {beta}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    /// Metrics, snapshot logs and the generated dataset go here.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Read trajectories from this dataset directory instead of generating.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
}

/// One experiment: a dataset for one bundle and the methods to run on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub domain: String,
    pub dataset: DatasetSpec,
    /// Observation model assumed by SIPS.
    #[serde(default)]
    pub noise: NoiseModel,
    /// Feed SIPS observations corrupted under `noise` instead of exact states.
    #[serde(default)]
    pub corrupt_observations: bool,
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub output: OutputPaths,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text =
            fs::read_to_string(path).map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Check the bundle exists and every method is well formed.
    pub fn validate(&self) -> Result<DomainBundle, BenchError> {
        let bundle = load_bundle(&self.domain)?;
        self.noise.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        if self.methods.is_empty() {
            return Err(BenchError::Config("no methods".into()));
        }
        for m in &self.methods {
            m.validate(&bundle, self.noise)?;
        }
        self.dataset.agent_params(&bundle).validate()?;
        Ok(bundle)
    }
}

/// One method's output on one trajectory.
#[derive(Clone, Debug)]
pub struct MethodRun {
    pub snapshots: Vec<PosteriorSnapshot>,
    pub cost: RunCost,
}

/// Per-trajectory record kept alongside the snapshot logs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub trajectory: String,
    pub problem: String,
    pub goal: String,
    pub timesteps: usize,
    pub c0: f64,
    pub mc: f64,
    pub ac: f64,
    pub nodes: u64,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct MethodLog {
    pub method: String,
    /// Aligned with the dataset's trajectories.
    pub runs: Vec<Result<MethodRun, String>>,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub dataset: Dataset,
    pub rows: Vec<MetricsRow>,
    pub logs: Vec<MethodLog>,
}

/// Setup shared by all trajectories of one problem.
type CachedQ = (Arc<Vec<QFunction>>, f64);

#[derive(Default)]
pub struct ProblemCache {
    /// `(problem, method index)` to Q-functions and their setup seconds.
    qfns: HashMap<(String, usize), CachedQ>,
    /// States of every dataset trajectory, by problem.
    oracle_states: HashMap<String, Vec<State>>,
}

impl ProblemCache {
    pub fn new(dataset: &Dataset) -> Self {
        let mut oracle_states: HashMap<String, Vec<State>> = HashMap::new();
        for t in &dataset.trajectories {
            oracle_states.entry(t.manifest.problem.clone()).or_default().extend(t.states.iter().cloned());
        }
        ProblemCache { qfns: HashMap::new(), oracle_states }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Observations for trajectory `index`: exact states, or corrupted under
/// `noise` with a per-trajectory stream.
pub fn observations_for(cfg: &ExperimentConfig, traj: &Trajectory, index: usize) -> Vec<Observation> {
    if cfg.corrupt_observations {
        let mut rng = stream_rng(cfg.seed, 2 * index as u64 + 1);
        traj.states.iter().map(|s| corrupt(s, &cfg.noise, &mut rng)).collect()
    } else {
        traj.states.iter().map(Observation::exact).collect()
    }
}

/// Run one method on trajectory `index` of the dataset.
pub fn run_method(
    cfg: &ExperimentConfig,
    bundle: &DomainBundle,
    method_index: usize,
    traj: &Trajectory,
    index: usize,
    cache: &mut ProblemCache,
) -> Result<MethodRun, BenchError> {
    let method = &cfg.methods[method_index];
    let problem = bundle.problem(&traj.manifest.problem)?;
    let t_total = traj.len();
    match method {
        MethodSpec::Sips { .. } => {
            let sips = Sips::new(problem.clone(), method.sips_config(bundle, cfg.noise).expect("sips"))?;
            let observations = observations_for(cfg, traj, index);
            let mut rng = stream_rng(cfg.seed, 2 * index as u64);
            let start = Instant::now();
            let mut ps = sips.init(&mut rng);
            let c0 = start.elapsed().as_secs_f64();
            let mut snapshots = Vec::with_capacity(t_total);
            let mut steps = 0.0;
            for t in 1..=t_total {
                let start = Instant::now();
                sips.step(&mut ps, &observations[..t], &mut rng)?;
                let snap = goal_posterior(&problem, &ps);
                steps += start.elapsed().as_secs_f64();
                snapshots.push(snap);
            }
            Ok(MethodRun { snapshots, cost: RunCost::new(c0, steps, t_total, ps.nodes_expanded) })
        }
        MethodSpec::BirlUnbiased { alpha, discount, iterations, sync } => {
            let mode = if *sync { ViMode::Sync } else { ViMode::AsyncUniform };
            let vi =
                ViConfig { discount: *discount, iterations: *iterations, mode, ..ViConfig::new(mode, *iterations) };
            birl_run(cfg, bundle, method_index, &problem, traj, vi, *alpha, cache)
        }
        MethodSpec::BirlOracle { alpha, discount, iterations } => {
            let vi = ViConfig { discount: *discount, ..ViConfig::new(ViMode::AsyncOracle, *iterations) };
            birl_run(cfg, bundle, method_index, &problem, traj, vi, *alpha, cache)
        }
        MethodSpec::Prp { beta, heuristic } => {
            let h = Heuristic::build(heuristic.unwrap_or(bundle.default_heuristic()), &problem)?;
            let start = Instant::now();
            let mut prp = PrpCache::new(&problem, &h);
            let c0 = start.elapsed().as_secs_f64();
            let start = Instant::now();
            let snapshots = prp_posteriors(&problem, &traj.states, *beta, &h, &mut prp);
            let steps = start.elapsed().as_secs_f64();
            Ok(MethodRun { snapshots, cost: RunCost::new(c0, steps, t_total, prp.nodes_expanded) })
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn birl_run(
    cfg: &ExperimentConfig,
    bundle: &DomainBundle,
    method_index: usize,
    problem: &Arc<ProblemDef>,
    traj: &Trajectory,
    vi: ViConfig,
    alpha: f64,
    cache: &mut ProblemCache,
) -> Result<MethodRun, BenchError> {
    let key = (problem.name.clone(), method_index);
    if !cache.qfns.contains_key(&key) {
        let sampler = bundle.sampler();
        let oracle = cache.oracle_states.get(&problem.name).cloned().unwrap_or_default();
        let problem_index = bundle.problems.iter().position(|(b, _)| b.name == problem.name).unwrap_or(0) as u64;
        let start = Instant::now();
        let qfns = (0..problem.goals.len())
            .into_par_iter()
            .map(|g| {
                let stream = (1 << 40) + ((method_index as u64) << 24) + (problem_index << 12) + g as u64;
                let mut rng = stream_rng(cfg.seed, stream);
                value_iteration(problem, g, &vi, Some(&sampler), &oracle, &mut rng)
            })
            .collect::<Result<Vec<_>, _>>()?;
        cache.qfns.insert(key.clone(), (Arc::new(qfns), start.elapsed().as_secs_f64()));
    }
    let (qfns, c0) = cache.qfns[&key].clone();
    let start = Instant::now();
    let snapshots = birl_posteriors(problem, &traj.states, &traj.actions, &qfns, alpha)?;
    let steps = start.elapsed().as_secs_f64();
    let visits = qfns.iter().map(|q| q.states_visited).sum();
    Ok(MethodRun { snapshots, cost: RunCost::new(c0, steps, traj.len(), visits) })
}

/// Read the dataset named in the config, or generate it (and write it to
/// `output.dir/dataset` if an output directory is set).
pub fn load_or_generate_dataset(cfg: &ExperimentConfig, bundle: &DomainBundle) -> Result<Dataset, BenchError> {
    if let Some(dir) = &cfg.output.dataset {
        return Dataset::read(bundle, dir);
    }
    let ds = generate_dataset(bundle, &cfg.dataset)?;
    if let Some(dir) = &cfg.output.dir {
        ds.write(bundle, &dir.join("dataset"))?;
    }
    Ok(ds)
}

pub fn write_snapshot_log<W: Write>(snapshots: &[PosteriorSnapshot], mut w: W) -> Result<(), BenchError> {
    for s in snapshots {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_snapshot_log<R: BufRead>(r: R) -> Result<Vec<PosteriorSnapshot>, BenchError> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Run every configured method over every trajectory, in dataset order,
/// and aggregate one metrics row per method. Failed runs are excluded
/// from the averages and counted.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, BenchError> {
    let bundle = cfg.validate()?;
    let dataset = load_or_generate_dataset(cfg, &bundle)?;
    let mut cache = ProblemCache::new(&dataset);
    let mut rows = Vec::new();
    let mut logs = Vec::new();
    for (mi, method) in cfg.methods.iter().enumerate() {
        let mut runs = Vec::with_capacity(dataset.trajectories.len());
        let mut scored = Vec::new();
        for (i, traj) in dataset.trajectories.iter().enumerate() {
            match run_method(cfg, &bundle, mi, traj, i, &mut cache) {
                Ok(run) => {
                    let m: QuartileMetrics = quartile_metrics(&run.snapshots, &traj.manifest.goal, traj.len());
                    scored.push((m, run.cost));
                    runs.push(Ok(run));
                }
                Err(e) => {
                    log::warn!("{} failed on trajectory {i}: {e}", method.name());
                    runs.push(Err(e.to_string()));
                }
            }
        }
        let failures = runs.iter().filter(|r| r.is_err()).count();
        rows.push(MetricsRow::aggregate(bundle.name(), method.name(), &scored, failures));
        logs.push(MethodLog { method: method.name().to_string(), runs });
    }
    let result = ExperimentResult { dataset, rows, logs };
    if let Some(dir) = &cfg.output.dir {
        result.write(dir)?;
    }
    Ok(result)
}

impl ExperimentResult {
    /// `metrics.csv`, and per method `snapshots/<method>/traj-NNN.jsonl`
    /// plus `runs.csv`.
    pub fn write(&self, dir: &Path) -> Result<(), BenchError> {
        fs::create_dir_all(dir)?;
        write_metrics_csv(&self.rows, fs::File::create(dir.join("metrics.csv"))?)?;
        for (mi, log) in self.logs.iter().enumerate() {
            let sub = dir.join("snapshots").join(format!("{mi}-{}", log.method));
            fs::create_dir_all(&sub)?;
            let mut records = csv::Writer::from_path(sub.join("runs.csv"))?;
            for ((run, traj), file) in log.runs.iter().zip(&self.dataset.trajectories).zip(&self.dataset.manifest.files)
            {
                let (cost, error) = match run {
                    Ok(r) => {
                        write_snapshot_log(&r.snapshots, std::io::BufWriter::new(fs::File::create(sub.join(file))?))?;
                        (r.cost, None)
                    }
                    Err(e) => (RunCost::default(), Some(e.clone())),
                };
                records.serialize(RunRecord {
                    trajectory: file.clone(),
                    problem: traj.manifest.problem.clone(),
                    goal: traj.manifest.goal.clone(),
                    timesteps: traj.len(),
                    c0: cost.c0,
                    mc: cost.mc,
                    ac: cost.ac,
                    nodes: cost.nodes,
                    error,
                })?;
            }
            records.flush()?;
        }
        Ok(())
    }
}
