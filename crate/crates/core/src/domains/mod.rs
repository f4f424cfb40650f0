//! Bundled benchmark domains, problem generators and state samplers.
//!
//! Problem files live under `data/v1/<domain>/`. Generated instances are
//! reproducible from the pinned seeds in [`BUNDLES`]; the two hand-drawn
//! doors-keys-gems scenarios are rendered from ASCII maps.

mod grid;
mod sampler;
mod text;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

pub use grid::{gem_name, generate_dkg_layout, generate_gridworld, GridMap};
pub use sampler::StateSampler;
pub use text::{block_words_problem, intrusion_problem, random_towers, word_blocks, ATTACKS};

use crate::pddl::{parse_domain, parse_problem, DomainDef, PddlError, ProblemDef};
use crate::planner::{astar, Budget, Heuristic, HeuristicError, HeuristicKind};

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("unknown domain `{0}` (expected one of taxi, doors-keys-gems, block-words, intrusion-detection)")]
    Unknown(String),
    #[error("unknown problem `{problem}` in domain `{domain}`")]
    UnknownProblem { domain: String, problem: String },
    #[error("bad map: {0}")]
    BadMap(String),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("{file}: {source}")]
    Pddl { file: String, source: PddlError },
    #[error(transparent)]
    Heuristic(#[from] HeuristicError),
}

pub const GRIDWORLD_DOMAIN: &str = include_str!("../../data/v1/gridworld/domain.pddl");
pub const DOORS_KEYS_GEMS_DOMAIN: &str = include_str!("../../data/v1/doors-keys-gems/domain.pddl");

pub const BLOCK_WORDS: [&str; 5] = ["draw", "ward", "wade", "rope", "pear"];

/// Backtracking for a second key: the blue gem sits behind two doors.
pub const FIGURE_1A_MAP: &str = "\
k....WB
WWW..WD
RD.s.D.
WWW.WWW
k.....Y
";

/// Myopic key use: spending the nearby key on the first blue door strands
/// the agent, since the remaining keys lie behind the lower door.
pub const FIGURE_1B_MAP: &str = "\
RW...WB
DW...WD
..ks.D.
WWWDWWW
Y......
k.....k
.......
";

/// Parameters for [`generate_problem`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "domain", rename_all = "kebab-case")]
pub enum GenParams {
    Gridworld { width: usize, height: usize, wall_prob: f64, targets: usize },
    DoorsKeysGems { width: usize, height: usize, keys: usize, doors: usize, gems: usize },
    BlockWords { words: Vec<String> },
    IntrusionDetection { hosts: usize },
}

impl GenParams {
    pub fn domain_text(&self) -> &'static str {
        match self {
            GenParams::Gridworld { .. } => GRIDWORLD_DOMAIN,
            GenParams::DoorsKeysGems { .. } => DOORS_KEYS_GEMS_DOMAIN,
            GenParams::BlockWords { .. } => BLOCK_WORDS_DOMAIN,
            GenParams::IntrusionDetection { .. } => INTRUSION_DOMAIN,
        }
    }
}

const TAXI_DOMAIN: &str = include_str!("../../data/v1/taxi/domain.pddl");
const BLOCK_WORDS_DOMAIN: &str = include_str!("../../data/v1/block-words/domain.pddl");
const INTRUSION_DOMAIN: &str = include_str!("../../data/v1/intrusion-detection/domain.pddl");

#[derive(Debug)]
pub struct GeneratedProblem {
    pub text: String,
    pub problem: ProblemDef,
}

/// Generate a problem whose every goal is reachable from the initial
/// state under unlimited A*, retrying new layouts a bounded number of times.
pub fn generate_problem<R: rand::Rng + ?Sized>(
    params: &GenParams,
    name: &str,
    rng: &mut R,
) -> Result<GeneratedProblem, DomainError> {
    let domain = Arc::new(parse_domain(params.domain_text()).expect("bundled domain parses"));
    for _ in 0..grid::MAX_ATTEMPTS {
        let text = match params {
            GenParams::Gridworld { width, height, wall_prob, targets } => {
                generate_gridworld(*width, *height, *wall_prob, *targets, rng)?.gridworld_problem(name)
            }
            GenParams::DoorsKeysGems { width, height, keys, doors, gems } => {
                match generate_dkg_layout(*width, *height, *keys, *doors, *gems, rng) {
                    Ok(map) => map.dkg_problem(name),
                    Err(e) if width * height < 1 + keys + doors + gems => return Err(e),
                    Err(_) => continue,
                }
            }
            GenParams::BlockWords { words } => block_words_problem(name, words, rng)?,
            GenParams::IntrusionDetection { hosts } => intrusion_problem(name, *hosts, rng)?,
        };
        let problem = parse_problem(&text, domain.clone())
            .map_err(|source| DomainError::Pddl { file: name.to_string(), source })?;
        if all_goals_reachable(&problem)? {
            return Ok(GeneratedProblem { text, problem });
        }
    }
    Err(DomainError::Generation(format!("no solvable `{name}` instance after {} attempts", grid::MAX_ATTEMPTS)))
}

/// Whether unlimited A* reaches every goal from the initial state.
pub fn all_goals_reachable(problem: &ProblemDef) -> Result<bool, DomainError> {
    let h = default_heuristic_for(problem)?;
    Ok(problem.goals.iter().all(|g| astar(problem, &problem.init, 1, g, &h, Budget::Unlimited).stats.found_goal))
}

fn default_heuristic_for(problem: &ProblemDef) -> Result<Heuristic, DomainError> {
    let kind =
        if problem.domain.function_id("xpos").is_some() { HeuristicKind::Manhattan } else { HeuristicKind::HAdd };
    Ok(Heuristic::build(kind, problem)?)
}

/// Where a bundled problem file comes from.
#[derive(Clone, Copy, Debug)]
pub enum ProblemSource {
    HandWritten,
    /// Rendered from an ASCII doors-keys-gems map.
    Map(&'static str),
    /// Produced by [`generate_problem`] with a pinned seed.
    Generated {
        spec: PinnedSpec,
        seed: u64,
    },
}

/// `'static` form of [`GenParams`] for the bundle table.
#[derive(Clone, Copy, Debug)]
pub enum PinnedSpec {
    DoorsKeysGems { width: usize, height: usize, keys: usize, doors: usize, gems: usize },
    BlockWords(&'static [&'static str]),
    IntrusionDetection { hosts: usize },
}

impl PinnedSpec {
    pub fn params(&self) -> GenParams {
        match *self {
            PinnedSpec::DoorsKeysGems { width, height, keys, doors, gems } => {
                GenParams::DoorsKeysGems { width, height, keys, doors, gems }
            }
            PinnedSpec::BlockWords(words) => {
                GenParams::BlockWords { words: words.iter().map(|w| w.to_string()).collect() }
            }
            PinnedSpec::IntrusionDetection { hosts } => GenParams::IntrusionDetection { hosts },
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BundledProblem {
    pub name: &'static str,
    pub text: &'static str,
    pub source: ProblemSource,
    /// Included in generated benchmark datasets.
    pub benchmark: bool,
}

impl BundledProblem {
    /// Regenerate the file contents from the recorded source.
    pub fn regenerate(&self) -> Option<Result<String, DomainError>> {
        match self.source {
            ProblemSource::HandWritten => None,
            ProblemSource::Map(ascii) => Some(GridMap::parse(ascii).map(|m| m.dkg_problem(self.name))),
            ProblemSource::Generated { spec, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Some(generate_problem(&spec.params(), self.name, &mut rng).map(|g| g.text))
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BundleSpec {
    pub name: &'static str,
    pub domain_text: &'static str,
    pub problems: &'static [BundledProblem],
    pub default_heuristic: HeuristicKind,
    pub sampler: StateSampler,
    pub goal_count: usize,
}

macro_rules! bundled {
    ($dir:literal, $name:literal, $source:expr, $bench:expr) => {
        BundledProblem {
            name: $name,
            text: include_str!(concat!("../../data/v1/", $dir, "/", $name, ".pddl")),
            source: $source,
            benchmark: $bench,
        }
    };
}

const DKG_7X7: PinnedSpec = PinnedSpec::DoorsKeysGems { width: 7, height: 7, keys: 2, doors: 2, gems: 3 };
const WORDS: PinnedSpec = PinnedSpec::BlockWords(&BLOCK_WORDS);
const NETWORK: PinnedSpec = PinnedSpec::IntrusionDetection { hosts: 10 };

pub const BUNDLES: [BundleSpec; 4] = [
    BundleSpec {
        name: "taxi",
        domain_text: TAXI_DOMAIN,
        problems: &[bundled!("taxi", "classic", ProblemSource::HandWritten, true)],
        default_heuristic: HeuristicKind::Manhattan,
        sampler: StateSampler::RandomWalk { max_steps: 40 },
        goal_count: 3,
    },
    BundleSpec {
        name: "doors-keys-gems",
        domain_text: DOORS_KEYS_GEMS_DOMAIN,
        problems: &[
            bundled!("doors-keys-gems", "dkg-1", ProblemSource::Generated { spec: DKG_7X7, seed: 1 }, true),
            bundled!("doors-keys-gems", "dkg-2", ProblemSource::Generated { spec: DKG_7X7, seed: 2 }, true),
            bundled!("doors-keys-gems", "dkg-3", ProblemSource::Generated { spec: DKG_7X7, seed: 3 }, true),
            bundled!("doors-keys-gems", "dkg-4", ProblemSource::Generated { spec: DKG_7X7, seed: 4 }, true),
            bundled!("doors-keys-gems", "dkg-5", ProblemSource::Generated { spec: DKG_7X7, seed: 5 }, true),
            bundled!("doors-keys-gems", "figure-1a", ProblemSource::Map(FIGURE_1A_MAP), false),
            bundled!("doors-keys-gems", "figure-1b", ProblemSource::Map(FIGURE_1B_MAP), false),
        ],
        default_heuristic: HeuristicKind::Manhattan,
        sampler: StateSampler::GridItems,
        goal_count: 3,
    },
    BundleSpec {
        name: "block-words",
        domain_text: BLOCK_WORDS_DOMAIN,
        problems: &[
            bundled!("block-words", "words-1", ProblemSource::Generated { spec: WORDS, seed: 1 }, true),
            bundled!("block-words", "words-2", ProblemSource::Generated { spec: WORDS, seed: 2 }, true),
            bundled!("block-words", "words-3", ProblemSource::Generated { spec: WORDS, seed: 3 }, true),
        ],
        default_heuristic: HeuristicKind::HAdd,
        sampler: StateSampler::Towers,
        goal_count: 5,
    },
    BundleSpec {
        name: "intrusion-detection",
        domain_text: INTRUSION_DOMAIN,
        problems: &[
            bundled!("intrusion-detection", "network-1", ProblemSource::Generated { spec: NETWORK, seed: 1 }, true),
            bundled!("intrusion-detection", "network-2", ProblemSource::Generated { spec: NETWORK, seed: 2 }, true),
        ],
        default_heuristic: HeuristicKind::HAdd,
        sampler: StateSampler::RandomWalk { max_steps: 40 },
        goal_count: 20,
    },
];

/// A parsed, validated bundle.
#[derive(Clone, Debug)]
pub struct DomainBundle {
    pub spec: BundleSpec,
    pub domain: Arc<DomainDef>,
    pub problems: Vec<(BundledProblem, Arc<ProblemDef>)>,
}

impl DomainBundle {
    pub fn name(&self) -> &'static str {
        self.spec.name
    }

    pub fn goal_count(&self) -> usize {
        self.spec.goal_count
    }

    pub fn default_heuristic(&self) -> HeuristicKind {
        self.spec.default_heuristic
    }

    pub fn sampler(&self) -> StateSampler {
        self.spec.sampler
    }

    pub fn problem(&self, name: &str) -> Result<Arc<ProblemDef>, DomainError> {
        self.problems
            .iter()
            .find(|(b, _)| b.name == name)
            .map(|(_, p)| p.clone())
            .ok_or_else(|| DomainError::UnknownProblem { domain: self.spec.name.into(), problem: name.into() })
    }

    /// Problems used for benchmark datasets, in bundle order.
    pub fn benchmark_problems(&self) -> Vec<Arc<ProblemDef>> {
        self.problems.iter().filter(|(b, _)| b.benchmark).map(|(_, p)| p.clone()).collect()
    }
}

pub fn bundle_names() -> impl Iterator<Item = &'static str> {
    BUNDLES.iter().map(|b| b.name)
}

/// Load and validate a bundle: every file parses and every problem has the
/// bundle's goal count.
pub fn load_bundle(name: &str) -> Result<DomainBundle, DomainError> {
    let spec = *BUNDLES.iter().find(|b| b.name == name).ok_or_else(|| DomainError::Unknown(name.to_string()))?;
    let domain = Arc::new(
        parse_domain(spec.domain_text)
            .map_err(|source| DomainError::Pddl { file: format!("{name}/domain.pddl"), source })?,
    );
    let mut problems = Vec::new();
    for b in spec.problems {
        let p = parse_problem(b.text, domain.clone())
            .map_err(|source| DomainError::Pddl { file: format!("{name}/{}.pddl", b.name), source })?;
        if p.goals.len() != spec.goal_count {
            return Err(DomainError::Generation(format!(
                "{name}/{}: {} goals, expected {}",
                b.name,
                p.goals.len(),
                spec.goal_count
            )));
        }
        problems.push((*b, Arc::new(p)));
    }
    Ok(DomainBundle { spec, domain, problems })
}

/// Parse the plain gridworld domain.
pub fn gridworld_domain() -> Arc<DomainDef> {
    Arc::new(parse_domain(GRIDWORLD_DOMAIN).expect("bundled domain parses"))
}

/// Parse the doors-keys-gems domain.
pub fn doors_keys_gems_domain() -> Arc<DomainDef> {
    Arc::new(parse_domain(DOORS_KEYS_GEMS_DOMAIN).expect("bundled domain parses"))
}
