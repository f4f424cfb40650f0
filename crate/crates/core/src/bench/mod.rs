//! Experiment harness: datasets of observed trajectories, method runs,
//! quartile metrics, robustness grids and their on-disk formats.

mod dataset;
mod experiment;
mod metrics;
mod robustness;
mod trajectory;

use thiserror::Error;

pub use dataset::{generate_dataset, slot, trajectory_file_name, Dataset, DatasetManifest, DatasetSpec, Split};
pub use experiment::{
    load_or_generate_dataset, observations_for, read_snapshot_log, run_experiment, run_method, write_snapshot_log,
    ExperimentConfig, ExperimentResult, MethodLog, MethodRun, MethodSpec, OutputPaths, ProblemCache, RunRecord,
};
pub use metrics::{
    quartile_indices, quartile_metrics, read_metrics_csv, write_metrics_csv, MetricsRow, QuartileMetrics, RunCost,
};
pub use robustness::{run_robustness, write_robustness_csv, RobustnessCell, RobustnessConfig};
pub use trajectory::{Provenance, Trajectory, TrajectoryManifest};

use crate::agent::AgentError;
use crate::baselines::BaselineError;
use crate::domains::DomainError;
use crate::planner::HeuristicError;
use crate::sips::SipsError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("bad trajectory: {0}")]
    Trajectory(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Heuristic(#[from] HeuristicError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Sips(#[from] SipsError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl BenchError {
    /// Whether the error comes from user input rather than a failed run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            BenchError::Config(_)
                | BenchError::Toml(_)
                | BenchError::Domain(DomainError::Unknown(_) | DomainError::UnknownProblem { .. })
                | BenchError::Heuristic(_)
                | BenchError::Agent(AgentError::InvalidParams(_))
                | BenchError::Sips(SipsError::InvalidConfig(_) | SipsError::Agent(AgentError::InvalidParams(_)))
                | BenchError::Baseline(BaselineError::NoIterations | BaselineError::BadDiscount(_))
        )
    }
}
