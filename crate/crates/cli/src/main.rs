use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use inverse_plan::agent::{simulate, AgentModel, AgentParams};
use inverse_plan::bench::{
    generate_dataset, run_experiment, run_method, run_robustness, trajectory_file_name, write_metrics_csv,
    write_robustness_csv, write_snapshot_log, BenchError, Dataset, DatasetManifest, DatasetSpec, ExperimentConfig,
    MethodSpec, OutputPaths, ProblemCache, Provenance, RobustnessConfig, Split, Trajectory, TrajectoryManifest,
};
use inverse_plan::domains::{bundle_names, load_bundle, DomainBundle};
use inverse_plan::observation::NoiseModel;
use inverse_plan::pddl::{parse_domain, parse_problem, ProblemDef};
use inverse_plan::planner::{probabilistic_astar, Budget, Heuristic, HeuristicKind};
use inverse_plan::sips::Rejuvenation;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

/// Simulate bounded planning agents and infer their goals online.
#[derive(Parser, Debug)]
#[command(name = "invplan", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse domain and problem files and report the first error in each.
    Validate {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        problem: Vec<PathBuf>,
    },
    /// Search for a plan and print its actions.
    Plan {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        heuristic: Option<HeuristicKind>,
        /// Frontier temperature; 0 gives plain A*.
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        /// Node expansion cap.
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write search stats here instead of standard error.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Run the bounded replanning agent and write its trajectory.
    Simulate {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value_t = 2)]
        r: u32,
        #[arg(long, default_value_t = 0.95)]
        q: f64,
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
        #[arg(long)]
        heuristic: Option<HeuristicKind>,
        #[arg(long, default_value_t = 100)]
        t_max: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a dataset of trajectories for a bundled domain.
    GenerateDataset {
        #[arg(long)]
        domain: String,
        #[arg(long, default_value_t = 30)]
        n: usize,
        #[arg(long, value_enum, default_value_t = SplitArg::Suboptimal)]
        split: SplitArg,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        t_max: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Infer goal posteriors for one trajectory file.
    Infer(InferArgs),
    /// Run an experiment config and print its metrics as CSV.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for metrics, snapshot logs and the dataset.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Read this dataset directory instead of generating one.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Run a robustness grid config and print its cells as CSV.
    Robustness {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the bundled domains as JSON.
    ListDomains,
}

/// A bundle name with an optional problem name, or a domain file with a
/// problem file.
#[derive(clap::Args, Debug)]
struct Target {
    #[arg(long)]
    domain: String,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long, default_value_t = 0)]
    goal_index: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitArg {
    Optimal,
    Suboptimal,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum MethodArg {
    Sips,
    BirlUnbiased,
    BirlOracle,
    Prp,
}

#[derive(clap::Args, Debug)]
struct InferArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Sips)]
    method: MethodArg,
    #[arg(long)]
    trajectory: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Snapshot log path; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    particles_per_goal: usize,
    #[arg(long, default_value_t = 0.25)]
    ess_threshold: f64,
    #[arg(long)]
    rejuvenation: bool,
    #[arg(long, default_value_t = 0.25)]
    p_goal_move: f64,
    /// Assumed agent; the bundle's bounded agent if absent.
    #[arg(long)]
    r: Option<u32>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    heuristic: Option<HeuristicKind>,
    /// Treat observations as exact states.
    #[arg(long)]
    no_noise: bool,
    /// Corrupt the trajectory states under the noise model before inference.
    #[arg(long)]
    corrupt: bool,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.9)]
    discount: f64,
    #[arg(long, default_value_t = 10_000)]
    vi_iters: usize,
    /// Directory of trajectory files whose states seed oracle VI.
    #[arg(long)]
    oracle_trajectories: Option<PathBuf>,
}

/// Bad input from the user, as opposed to a failed run.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| c.is::<ConfigError>() || c.downcast_ref::<BenchError>().is_some_and(BenchError::is_config_error))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_config_error(&e) { 1 } else { 2 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Validate { domain, problem } => validate(&domain, &problem),
        Command::Plan { target, heuristic, gamma, budget, seed, stats } => {
            let (bundle, problem) = resolve(&target)?;
            let goal = goal_spec(&problem, target.goal_index)?;
            let kind =
                heuristic.or(bundle.as_ref().map(DomainBundle::default_heuristic)).unwrap_or(HeuristicKind::GoalCount);
            let h = Heuristic::build(kind, &problem).map_err(|e| config_err(e.to_string()))?;
            if gamma.is_nan() || gamma < 0.0 {
                return Err(config_err(format!("gamma must be non-negative, got {gamma}")));
            }
            let budget = budget.map_or(Budget::Unlimited, Budget::Limited);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let result = probabilistic_astar(&problem, &problem.init, 1, goal, &h, budget, gamma, &mut rng);
            let mut out = io::stdout().lock();
            for a in result.plan.actions() {
                writeln!(out, "{}", a.display(&problem))?;
            }
            let stats_json = serde_json::to_string(&json!({
                "plan_length": result.plan.len(),
                "complete": result.plan.complete,
                "stats": result.stats,
            }))?;
            match stats {
                Some(path) => fs::write(path, stats_json + "\n")?,
                None => eprintln!("{stats_json}"),
            }
            Ok(())
        }
        Command::Simulate { target, r, q, gamma, heuristic, t_max, seed, out } => {
            let (bundle, problem) = resolve(&target)?;
            goal_spec(&problem, target.goal_index)?;
            let kind =
                heuristic.or(bundle.as_ref().map(DomainBundle::default_heuristic)).unwrap_or(HeuristicKind::GoalCount);
            let params = AgentParams::new(r, q, gamma, kind).map_err(|e| config_err(e.to_string()))?;
            let model = AgentModel::new(problem.clone(), params).map_err(|e| config_err(e.to_string()))?;
            let trace = simulate(&model, target.goal_index, t_max, &mut ChaCha8Rng::seed_from_u64(seed));
            let traj = Trajectory {
                manifest: TrajectoryManifest {
                    domain: bundle.as_ref().map_or_else(|| problem.domain.name.clone(), |b| b.name().to_string()),
                    problem: problem.name.clone(),
                    goal: problem.goals[target.goal_index].label.clone(),
                    provenance: Provenance::Agent { r, q, gamma, heuristic: kind },
                    seed,
                },
                states: trace.states,
                actions: trace.actions,
            };
            emit(out.as_deref(), traj.to_jsonl(&problem).as_bytes())
        }
        Command::GenerateDataset { domain, n, split, seed, t_max, out } => {
            let bundle = load_bundle(&domain).map_err(|e| config_err(e.to_string()))?;
            let split = match split {
                SplitArg::Optimal => Split::Optimal,
                SplitArg::Suboptimal => Split::Suboptimal,
            };
            let spec = DatasetSpec { t_max, ..DatasetSpec::new(n, split, seed) };
            let ds = generate_dataset(&bundle, &spec)?;
            ds.write(&bundle, &out)?;
            println!("{}", serde_json::to_string(&ds.manifest)?);
            Ok(())
        }
        Command::Infer(args) => infer(args),
        Command::Bench { config, seed, out, dataset } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if out.is_some() {
                cfg.output.dir = out;
            }
            if dataset.is_some() {
                cfg.output.dataset = dataset;
            }
            let result = run_experiment(&cfg)?;
            write_metrics_csv(&result.rows, io::stdout().lock()).map_err(BenchError::from)?;
            Ok(())
        }
        Command::Robustness { config, seed, out } => {
            let mut cfg = RobustnessConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if out.is_some() {
                cfg.output = out;
            }
            let cells = run_robustness(&cfg)?;
            write_robustness_csv(&cells, io::stdout().lock())?;
            Ok(())
        }
        Command::ListDomains => {
            let mut list = Vec::new();
            for name in bundle_names() {
                let b = load_bundle(name)?;
                list.push(json!({
                    "name": b.name(),
                    "goals": b.goal_count(),
                    "default_heuristic": b.default_heuristic(),
                    "problems": b.problems.iter().map(|(p, _)| p.name).collect::<Vec<_>>(),
                    "benchmark_problems": b.problems.iter().filter(|(p, _)| p.benchmark).map(|(p, _)| p.name).collect::<Vec<_>>(),
                }));
            }
            println!("{}", serde_json::to_string_pretty(&list)?);
            Ok(())
        }
    }
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))
        }
        None => Ok(io::stdout().lock().write_all(bytes)?),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))
}

fn validate(domain: &Path, problems: &[PathBuf]) -> Result<()> {
    let dom = parse_domain(&read_text(domain)?).map_err(|e| config_err(format!("{}:{e}", domain.display())))?;
    let dom = Arc::new(dom);
    println!("ok {} ({} operators)", domain.display(), dom.operators.len());
    for path in problems {
        let p =
            parse_problem(&read_text(path)?, dom.clone()).map_err(|e| config_err(format!("{}:{e}", path.display())))?;
        println!("ok {} ({} goals)", path.display(), p.goals.len());
    }
    Ok(())
}

/// Load a bundled problem, or parse a domain and problem file pair.
fn resolve(target: &Target) -> Result<(Option<DomainBundle>, Arc<ProblemDef>)> {
    if let Ok(bundle) = load_bundle(&target.domain) {
        let problem = match &target.problem {
            Some(name) => bundle.problem(name).map_err(|e| config_err(e.to_string()))?,
            None => bundle.benchmark_problems()[0].clone(),
        };
        return Ok((Some(bundle), problem));
    }
    let domain_path = Path::new(&target.domain);
    if !domain_path.exists() {
        return Err(config_err(format!("`{}` is neither a bundled domain nor a file", target.domain)));
    }
    let problem_path =
        target.problem.as_deref().ok_or_else(|| config_err("--problem is required with a domain file"))?;
    let dom =
        parse_domain(&read_text(domain_path)?).map_err(|e| config_err(format!("{}:{e}", domain_path.display())))?;
    let problem = parse_problem(&read_text(Path::new(problem_path))?, Arc::new(dom))
        .map_err(|e| config_err(format!("{problem_path}:{e}")))?;
    Ok((None, Arc::new(problem)))
}

fn goal_spec(problem: &ProblemDef, index: usize) -> Result<&inverse_plan::pddl::GoalSpec> {
    problem
        .goals
        .get(index)
        .ok_or_else(|| config_err(format!("goal index {index} out of range ({} goals)", problem.goals.len())))
}

fn read_trajectory(path: &Path) -> Result<(DomainBundle, Trajectory)> {
    let open = || {
        fs::File::open(path).map(BufReader::new).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))
    };
    let head = Trajectory::read_manifest(open()?)?;
    let bundle = load_bundle(&head.domain).map_err(|e| config_err(e.to_string()))?;
    let problem = bundle.problem(&head.problem).map_err(|e| config_err(e.to_string()))?;
    let traj = Trajectory::read_jsonl(&problem, open()?)?;
    Ok((bundle, traj))
}

fn infer(args: InferArgs) -> Result<()> {
    let (bundle, traj) = read_trajectory(&args.trajectory)?;
    let method = match args.method {
        MethodArg::Sips => {
            let base = AgentParams::bounded(bundle.default_heuristic());
            let agent = match (args.r, args.q) {
                (None, None) => base.budget,
                (r, q) => inverse_plan::agent::BudgetPrior::NegBinomial { r: r.unwrap_or(2), q: q.unwrap_or(0.95) },
            };
            let agent = AgentParams {
                budget: agent,
                gamma: args.gamma.unwrap_or(base.gamma),
                heuristic: args.heuristic.unwrap_or(base.heuristic),
            };
            MethodSpec::Sips {
                particles_per_goal: args.particles_per_goal,
                ess_threshold: args.ess_threshold,
                agent: Some(agent),
                rejuvenation: args.rejuvenation.then(|| Rejuvenation::with_goal_moves(args.p_goal_move)),
            }
        }
        MethodArg::BirlUnbiased => MethodSpec::BirlUnbiased {
            alpha: args.alpha,
            discount: args.discount,
            iterations: args.vi_iters,
            sync: false,
        },
        MethodArg::BirlOracle => {
            MethodSpec::BirlOracle { alpha: args.alpha, discount: args.discount, iterations: args.vi_iters }
        }
        MethodArg::Prp => MethodSpec::Prp { beta: args.beta, heuristic: args.heuristic },
    };
    let cfg = ExperimentConfig {
        seed: args.seed,
        domain: bundle.name().to_string(),
        dataset: DatasetSpec::new(1, Split::Suboptimal, args.seed),
        noise: if args.no_noise { NoiseModel::EXACT } else { NoiseModel::default() },
        corrupt_observations: args.corrupt,
        methods: vec![method],
        output: OutputPaths::default(),
    };
    cfg.validate()?;
    let oracle = match (&args.oracle_trajectories, args.method) {
        (Some(dir), _) => oracle_dataset(&bundle, dir)?,
        (None, MethodArg::BirlOracle) => return Err(config_err("birl-oracle needs --oracle-trajectories")),
        (None, _) => empty_dataset(&bundle, args.seed),
    };
    let mut cache = ProblemCache::new(&oracle);
    let run = run_method(&cfg, &bundle, 0, &traj, 0, &mut cache)?;
    let mut buf = Vec::new();
    write_snapshot_log(&run.snapshots, &mut buf)?;
    emit(args.out.as_deref(), &buf)
}

fn empty_dataset(bundle: &DomainBundle, seed: u64) -> Dataset {
    Dataset {
        manifest: DatasetManifest {
            domain: bundle.name().to_string(),
            spec: DatasetSpec::new(0, Split::Optimal, seed),
            files: Vec::new(),
            skipped: Vec::new(),
        },
        trajectories: Vec::new(),
    }
}

/// Every `.jsonl` trajectory in `dir`, in file-name order.
fn oracle_dataset(bundle: &DomainBundle, dir: &Path) -> Result<Dataset> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| config_err(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(anyhow!(ConfigError(format!("no trajectory files in {}", dir.display()))));
    }
    let mut ds = empty_dataset(bundle, 0);
    for (i, path) in files.iter().enumerate() {
        let (b, traj) = read_trajectory(path)?;
        if b.name() != bundle.name() {
            return Err(config_err(format!("{} is for `{}`, not `{}`", path.display(), b.name(), bundle.name())));
        }
        ds.manifest.files.push(trajectory_file_name(i));
        ds.trajectories.push(traj);
    }
    Ok(ds)
}
