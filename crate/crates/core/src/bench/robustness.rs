use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::{DatasetSpec, Split};
use super::experiment::{run_experiment, ExperimentConfig, MethodSpec, OutputPaths};
use super::BenchError;
use crate::agent::{AgentParams, BudgetPrior};
use crate::observation::NoiseModel;

fn default_particles() -> usize {
    10
}

/// Cross product of the parameters that generate the data and the
/// parameters SIPS assumes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessConfig {
    pub seed: u64,
    pub domain: String,
    /// Trajectories per true setting.
    pub n: usize,
    #[serde(default = "default_particles")]
    pub particles_per_goal: usize,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(rename = "true")]
    pub true_params: Vec<AgentParams>,
    pub assumed: Vec<AgentParams>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl RobustnessConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text =
            fs::read_to_string(path).map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The experiment that generates data under the `ti`-th true setting and
    /// runs one SIPS variant per assumed setting.
    pub fn experiment(&self, ti: usize) -> ExperimentConfig {
        let truth = &self.true_params[ti];
        let dataset = DatasetSpec {
            agent: Some(*truth),
            ..DatasetSpec::new(self.n, Split::Suboptimal, self.seed.wrapping_add(ti as u64))
        };
        ExperimentConfig {
            seed: self.seed,
            domain: self.domain.clone(),
            dataset,
            noise: self.noise,
            corrupt_observations: false,
            methods: self
                .assumed
                .iter()
                .map(|a| MethodSpec::Sips {
                    particles_per_goal: self.particles_per_goal,
                    ess_threshold: 0.25,
                    agent: Some(*a),
                    rejuvenation: None,
                })
                .collect(),
            output: OutputPaths::default(),
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.true_params.is_empty() || self.assumed.is_empty() {
            return Err(BenchError::Config("robustness grid needs true and assumed settings".into()));
        }
        for ti in 0..self.true_params.len() {
            self.experiment(ti).validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessCell {
    pub true_r: Option<u32>,
    pub true_q: Option<f64>,
    pub true_gamma: f64,
    pub true_heuristic: String,
    pub assumed_r: Option<u32>,
    pub assumed_q: Option<f64>,
    pub assumed_gamma: f64,
    pub assumed_heuristic: String,
    pub top1_q3: f64,
    pub p_q3: f64,
    pub trajectories: usize,
    pub failures: usize,
}

fn budget_fields(p: &AgentParams) -> (Option<u32>, Option<f64>) {
    match p.budget {
        BudgetPrior::NegBinomial { r, q } => (Some(r), Some(q)),
        BudgetPrior::Unlimited => (None, None),
    }
}

/// One cell per (true, assumed) pair, true settings outermost. Every
/// assumed setting sees the same dataset for a given true setting.
pub fn run_robustness(cfg: &RobustnessConfig) -> Result<Vec<RobustnessCell>, BenchError> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for (ti, truth) in cfg.true_params.iter().enumerate() {
        let exp = cfg.experiment(ti);
        let result = run_experiment(&exp)?;
        for (assumed, row) in cfg.assumed.iter().zip(&result.rows) {
            let (tr, tq) = budget_fields(truth);
            let (ar, aq) = budget_fields(assumed);
            cells.push(RobustnessCell {
                true_r: tr,
                true_q: tq,
                true_gamma: truth.gamma,
                true_heuristic: truth.heuristic.to_string(),
                assumed_r: ar,
                assumed_q: aq,
                assumed_gamma: assumed.gamma,
                assumed_heuristic: assumed.heuristic.to_string(),
                top1_q3: row.top1_q3,
                p_q3: row.p_q3,
                trajectories: row.trajectories,
                failures: row.failures,
            });
        }
    }
    if let Some(path) = &cfg.output {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        write_robustness_csv(&cells, fs::File::create(path)?)?;
    }
    Ok(cells)
}

pub fn write_robustness_csv<W: std::io::Write>(cells: &[RobustnessCell], w: W) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(w);
    for c in cells {
        out.serialize(c)?;
    }
    out.flush()?;
    Ok(())
}
