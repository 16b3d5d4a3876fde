//! JSON experiment configuration and the glue that turns it into
//! environments, agents and trial runs.
//!
//! ```json
//! {
//!   "version": 1,
//!   "env": { "kind": "synthetic_linear", "state_dim": 8, "num_actions": 4, "noise_std": 0.1 },
//!   "agents": [
//!     { "kind": "linear_ts" },
//!     { "kind": "ekf_ts", "hidden": [50], "mode": "subspace_full", "dim": 20 }
//!   ],
//!   "horizon": 2000,
//!   "warmup_per_arm": 20,
//!   "trials": 10,
//!   "seed": 0,
//!   "output_dir": "out"
//! }
//! ```
//!
//! Relative paths (datasets and `output_dir`) are resolved against the
//! directory holding the config file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agents::{
    Agent, EkfTsAgent, EkfTsConfig, Lim2Agent, Lim2Config, LinearTsAgent, NeuralGreedyAgent, NeuralGreedyConfig,
    NeuralLinearAgent, NeuralLinearConfig, NeuralTsAgent, NeuralTsConfig, OracleAgent, RandomAgent,
};
use crate::bayes_linear::NigPrior;
use crate::environments::{
    classification_env, movielens_env, parse_ratings, read_csv_dataset, synthetic_classification_dataset,
    synthetic_linear_env, BanditEnv, MovieLensSim, TabularDataset, TeacherConfig,
};
use crate::harness::{multi_trial, online_eval, EvalOptions, TrialSummary};
use crate::reward_models::{HeadMode, MlpArchitecture};
use crate::{derive_seed, Error, Result};

pub const CONFIG_VERSION: u32 = 1;

/// Stream indices for deriving per-trial seeds.
const ENV_STREAM: u64 = 1;
const AGENT_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    /// Hidden linear arms; a fresh problem per trial seed.
    SyntheticLinear {
        state_dim: usize,
        num_actions: usize,
        #[serde(default)]
        noise_std: f64,
    },
    /// Teacher-network labels on Gaussian states; the dataset is fixed by
    /// its own seed and shuffled per trial.
    SyntheticClassification {
        #[serde(flatten)]
        teacher: TeacherConfig,
    },
    /// Tabular CSV with a final integer `label` column.
    Csv {
        path: PathBuf,
        #[serde(default)]
        num_actions: Option<usize>,
        #[serde(default = "yes")]
        shuffle: bool,
    },
    /// MovieLens-100k `u.data`.
    Movielens {
        path: PathBuf,
        #[serde(default = "twenty")]
        num_movies: usize,
        #[serde(default = "twenty")]
        rank: usize,
    },
}

fn yes() -> bool {
    true
}

fn twenty() -> usize {
    20
}

fn default_hidden() -> Vec<usize> {
    vec![50]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentKind {
    LinearTs {
        #[serde(default)]
        prior: NigPrior,
    },
    NeuralLinear {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(flatten)]
        cfg: NeuralLinearConfig,
    },
    Lim2 {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(flatten)]
        cfg: Lim2Config,
    },
    NeuralTs {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default)]
        head_mode: Option<HeadMode>,
        #[serde(flatten)]
        cfg: NeuralTsConfig,
    },
    EkfTs {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default)]
        head_mode: Option<HeadMode>,
        #[serde(flatten)]
        cfg: EkfTsConfig,
    },
    NeuralGreedy {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(flatten)]
        cfg: NeuralGreedyConfig,
    },
    Random,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    /// Label used in outputs; defaults to the kind.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(flatten)]
    pub kind: AgentKind,
}

impl AgentSpec {
    pub fn new(kind: AgentKind) -> Self {
        Self { name: None, kind }
    }

    pub fn named(name: &str, kind: AgentKind) -> Self {
        Self {
            name: Some(name.to_string()),
            kind,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            AgentKind::LinearTs { .. } => "linear_ts",
            AgentKind::NeuralLinear { .. } => "neural_linear",
            AgentKind::Lim2 { .. } => "lim2",
            AgentKind::NeuralTs { .. } => "neural_ts",
            AgentKind::EkfTs { .. } => "ekf_ts",
            AgentKind::NeuralGreedy { .. } => "neural_greedy",
            AgentKind::Random => "random",
            AgentKind::Oracle => "oracle",
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind_name().to_string())
    }

    fn arch(env: &dyn BanditEnv, hidden: &[usize], mode: HeadMode) -> Result<MlpArchitecture> {
        MlpArchitecture::new(env.state_dim(), hidden.to_vec(), env.num_actions(), mode)
    }

    pub fn build(&self, env: &Arc<dyn BanditEnv>, seed: u64) -> Result<Box<dyn Agent>> {
        let e = env.as_ref();
        Ok(match &self.kind {
            AgentKind::LinearTs { prior } => Box::new(LinearTsAgent::new(e.state_dim(), e.num_actions(), prior.clone())?),
            AgentKind::NeuralLinear { hidden, cfg } => Box::new(NeuralLinearAgent::new(
                Self::arch(e, hidden, HeadMode::MultiHead)?,
                cfg.clone(),
                seed,
            )?),
            AgentKind::Lim2 { hidden, cfg } => {
                Box::new(Lim2Agent::new(Self::arch(e, hidden, HeadMode::MultiHead)?, cfg.clone(), seed)?)
            }
            AgentKind::NeuralTs { hidden, head_mode, cfg } => Box::new(NeuralTsAgent::new(
                Self::arch(e, hidden, head_mode.unwrap_or(HeadMode::OneHotBlock))?,
                cfg.clone(),
                seed,
            )?),
            AgentKind::EkfTs { hidden, head_mode, cfg } => Box::new(EkfTsAgent::new(
                Self::arch(e, hidden, head_mode.unwrap_or(HeadMode::MultiHead))?,
                cfg.clone(),
                seed,
            )?),
            AgentKind::NeuralGreedy { hidden, cfg } => Box::new(NeuralGreedyAgent::new(
                Self::arch(e, hidden, HeadMode::MultiHead)?,
                cfg.clone(),
                seed,
            )?),
            AgentKind::Random => Box::new(RandomAgent::new(e.num_actions())),
            AgentKind::Oracle => Box::new(OracleAgent::new(env.clone())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub version: u32,
    pub env: EnvSpec,
    /// A single agent (for `run`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<AgentSpec>,
    /// Several agents (for `compare`, or `run` over each).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agents: Vec<AgentSpec>,
    pub horizon: usize,
    #[serde(default = "twenty")]
    pub warmup_per_arm: usize,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    /// Record per-step wall-clock time (traces are then no longer
    /// byte-reproducible).
    #[serde(default)]
    pub timing: bool,
    /// Run trials on the thread pool.
    #[serde(default = "yes")]
    pub parallel: bool,
    /// Subspace dimensions for `sweep-dim`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dims: Vec<usize>,
}

fn one() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(json_error_field(&e), e.to_string()))
    }

    /// Read and validate a config file; relative paths inside it are made
    /// relative to the file's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.env {
            EnvSpec::Csv { path, .. } | EnvSpec::Movielens { path, .. } => fix(path),
            _ => {}
        }
        fix(&mut self.output_dir);
    }

    pub fn agent_specs(&self) -> Vec<AgentSpec> {
        self.agent.iter().cloned().chain(self.agents.iter().cloned()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config(
                "version",
                format!("unsupported version {} (expected {CONFIG_VERSION})", self.version),
            ));
        }
        if self.agent_specs().is_empty() {
            return Err(Error::config("agents", "at least one agent is required"));
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.warmup_per_arm == 0 {
            return Err(Error::config("warmup_per_arm", "must be at least 1"));
        }
        if let Some(n_a) = self.env.declared_num_actions() {
            if self.horizon <= n_a * self.warmup_per_arm {
                return Err(Error::config(
                    "horizon",
                    format!("must exceed num_actions × warmup_per_arm = {}", n_a * self.warmup_per_arm),
                ));
            }
        }
        let mut labels: Vec<String> = self.agent_specs().iter().map(|a| a.label()).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("agents", "agent labels must be unique; set `name`"));
        }
        for label in &labels {
            if label.is_empty() || label.contains(['/', '\\']) || label.starts_with('.') {
                return Err(Error::config("agents.name", format!("`{label}` is not a usable label")));
            }
        }
        match &self.env {
            EnvSpec::Csv { path, .. } | EnvSpec::Movielens { path, .. } if !path.is_file() => {
                Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)))
            }
            _ => Ok(()),
        }
    }
}

fn json_error_field(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    for marker in ["missing field `", "unknown field `", "unknown variant `"] {
        if let Some(rest) = msg.split(marker).nth(1) {
            if let Some(name) = rest.split('`').next() {
                return name.to_string();
            }
        }
    }
    "config".to_string()
}

impl EnvSpec {
    fn declared_num_actions(&self) -> Option<usize> {
        match self {
            EnvSpec::SyntheticLinear { num_actions, .. } => Some(*num_actions),
            EnvSpec::SyntheticClassification { teacher } => Some(teacher.num_actions),
            EnvSpec::Csv { num_actions, .. } => *num_actions,
            EnvSpec::Movielens { num_movies, .. } => Some(*num_movies),
        }
    }
}

/// Loaded data shared across trials.
#[derive(Debug, Clone)]
pub enum PreparedEnv {
    SyntheticLinear {
        state_dim: usize,
        num_actions: usize,
        noise_std: f64,
    },
    Tabular {
        data: Arc<TabularDataset>,
        shuffle: bool,
    },
    MovieLens(Arc<MovieLensSim>),
}

impl PreparedEnv {
    pub fn load(spec: &EnvSpec) -> Result<Self> {
        Ok(match spec {
            EnvSpec::SyntheticLinear {
                state_dim,
                num_actions,
                noise_std,
            } => PreparedEnv::SyntheticLinear {
                state_dim: *state_dim,
                num_actions: *num_actions,
                noise_std: *noise_std,
            },
            EnvSpec::SyntheticClassification { teacher } => PreparedEnv::Tabular {
                data: Arc::new(synthetic_classification_dataset(teacher)?),
                shuffle: true,
            },
            EnvSpec::Csv {
                path,
                num_actions,
                shuffle,
            } => PreparedEnv::Tabular {
                data: Arc::new(read_csv_dataset(path, *num_actions)?),
                shuffle: *shuffle,
            },
            EnvSpec::Movielens { path, num_movies, rank } => {
                let ratings = parse_ratings(path)?;
                PreparedEnv::MovieLens(Arc::new(MovieLensSim::from_ratings(&ratings, *num_movies, *rank)?))
            }
        })
    }

    pub fn num_actions(&self) -> usize {
        match self {
            PreparedEnv::SyntheticLinear { num_actions, .. } => *num_actions,
            PreparedEnv::Tabular { data, .. } => data.num_actions,
            PreparedEnv::MovieLens(sim) => sim.num_movies(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PreparedEnv::SyntheticLinear { .. } => "synthetic_linear",
            PreparedEnv::Tabular { .. } => "classification",
            PreparedEnv::MovieLens(_) => "movielens",
        }
    }

    /// The environment of the trial with seed `seed`.
    pub fn instantiate(&self, horizon: usize, seed: u64) -> Result<Arc<dyn BanditEnv>> {
        let env_seed = derive_seed(seed, ENV_STREAM);
        Ok(match self {
            PreparedEnv::SyntheticLinear {
                state_dim,
                num_actions,
                noise_std,
            } => Arc::new(synthetic_linear_env(*state_dim, *num_actions, *noise_std, horizon, env_seed)?),
            PreparedEnv::Tabular { data, shuffle } => {
                Arc::new(classification_env(data.clone(), shuffle.then_some(env_seed)))
            }
            PreparedEnv::MovieLens(sim) => Arc::new(movielens_env(sim.clone(), horizon, env_seed)),
        })
    }
}

/// A validated config with its data loaded.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub env: PreparedEnv,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let env = PreparedEnv::load(&config.env)?;
        let tau = env.num_actions() * config.warmup_per_arm;
        if config.horizon <= tau {
            return Err(Error::config(
                "horizon",
                format!("must exceed num_actions × warmup_per_arm = {tau}"),
            ));
        }
        if let PreparedEnv::Tabular { data, .. } = &env {
            if data.len() < config.horizon {
                return Err(Error::config(
                    "horizon",
                    format!("dataset has {} rows, fewer than the horizon {}", data.len(), config.horizon),
                ));
            }
        }
        Ok(Self { config, env })
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            horizon: self.config.horizon,
            warmup_per_arm: self.config.warmup_per_arm,
            timing: self.config.timing,
        }
    }

    /// One trial of `spec` with trial seed `seed`.
    pub fn run_trial(&self, spec: &AgentSpec, seed: u64) -> Result<crate::harness::RunTrace> {
        let env = self.env.instantiate(self.config.horizon, seed)?;
        let mut agent = spec.build(&env, derive_seed(seed, AGENT_STREAM))?;
        let fingerprint = format!("{}@{}", spec.label(), self.env.name());
        online_eval(agent.as_mut(), env.as_ref(), &self.eval_options(), seed, &fingerprint)
    }

    /// All configured trials of `spec`.
    pub fn run_agent(&self, spec: &AgentSpec) -> Result<TrialSummary> {
        multi_trial(self.config.trials, self.config.seed, self.config.parallel, |s| self.run_trial(spec, s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::EkfMode;

    #[test]
    fn parses_a_full_config() {
        let cfg = ExperimentConfig::from_json(
            r#"{
                "version": 1,
                "env": {"kind": "synthetic_classification", "num_samples": 400, "seed": 3},
                "agents": [
                    {"kind": "linear_ts", "prior": {"a0": 2.0, "b0": 3.0, "cov_scale": 10.0}},
                    {"kind": "ekf_ts", "name": "ekf10", "mode": "subspace_diag", "subspace": "random", "dim": 10,
                     "noise": {"obs_var": 0.25}, "sgd": {"epochs": 3}},
                    {"kind": "neural_linear", "hidden": [8], "update_period": 25, "memory_cap": 100},
                    {"kind": "lim2", "memory": 30, "pgd": {"steps": 2}},
                    {"kind": "neural_ts", "lambda": 0.5, "diagonal": true},
                    {"kind": "neural_greedy"},
                    {"kind": "random"},
                    {"kind": "oracle"}
                ],
                "horizon": 300,
                "trials": 2
            }"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        let specs = cfg.agent_specs();
        assert_eq!(specs.len(), 8);
        match &specs[1].kind {
            AgentKind::EkfTs { hidden, cfg, .. } => {
                assert_eq!(hidden, &vec![50]);
                assert_eq!(cfg.mode, EkfMode::SubspaceDiag);
                assert_eq!(cfg.dim, 10);
                assert_eq!(cfg.noise.obs_var, 0.25);
                assert_eq!(cfg.noise.process_var, 1e-8);
                assert_eq!(cfg.sgd.epochs, 3);
                assert_eq!(cfg.sgd.batch_size, 32);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(specs[1].label(), "ekf10");
        match &specs[2].kind {
            AgentKind::NeuralLinear { hidden, cfg } => {
                assert_eq!(hidden, &vec![8]);
                assert_eq!(cfg.update_period, 25);
                assert_eq!(cfg.memory_cap, Some(100));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.warmup_per_arm, 20);
        match &cfg.env {
            EnvSpec::SyntheticClassification { teacher } => {
                assert_eq!(teacher.num_samples, 400);
                assert_eq!(teacher.state_dim, 9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_name_the_field() {
        let err = ExperimentConfig::from_json(r#"{"version": 1, "env": {"kind": "synthetic_linear", "state_dim": 2, "num_actions": 2}}"#)
            .unwrap_err();
        match err {
            Error::Config { field, .. } => assert_eq!(field, "horizon"),
            other => panic!("{other:?}"),
        }
        let cfg = ExperimentConfig::from_json(
            r#"{"version": 1, "env": {"kind": "synthetic_linear", "state_dim": 2, "num_actions": 2},
                "agent": {"kind": "random"}, "horizon": 40}"#,
        )
        .unwrap();
        match cfg.validate().unwrap_err() {
            Error::Config { field, .. } => assert_eq!(field, "horizon"),
            other => panic!("{other:?}"),
        }
        let err = ExperimentConfig::from_json(
            r#"{"version": 1, "env": {"kind": "nope"}, "agent": {"kind": "random"}, "horizon": 40}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn duplicate_labels_are_rejected() {
        let cfg = ExperimentConfig::from_json(
            r#"{"version": 1, "env": {"kind": "synthetic_linear", "state_dim": 2, "num_actions": 2},
                "agents": [{"kind": "random"}, {"kind": "random"}], "horizon": 100}"#,
        )
        .unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = ExperimentConfig {
            version: 1,
            env: EnvSpec::SyntheticLinear {
                state_dim: 3,
                num_actions: 2,
                noise_std: 0.1,
            },
            agent: Some(AgentSpec::new(AgentKind::EkfTs {
                hidden: vec![4],
                head_mode: None,
                cfg: EkfTsConfig::default(),
            })),
            agents: vec![],
            horizon: 100,
            warmup_per_arm: 2,
            trials: 1,
            seed: 0,
            output_dir: "out".into(),
            timing: false,
            parallel: true,
            dims: vec![],
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }
}
