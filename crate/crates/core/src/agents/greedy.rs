use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::Agent;
use crate::linalg::argmax;
use crate::reward_models::{forward_all_actions, init_params, sgd_fit, MlpArchitecture, ParamVector, SgdConfig};
use crate::{derive_seed, Error, Observation, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuralGreedyConfig {
    pub update_period: usize,
    pub sgd: SgdConfig,
}

impl Default for NeuralGreedyConfig {
    fn default() -> Self {
        Self {
            update_period: 100,
            sgd: SgdConfig::default(),
        }
    }
}

/// Point-estimate network retrained on the full history; always exploits.
#[derive(Debug, Clone)]
pub struct NeuralGreedyAgent {
    arch: MlpArchitecture,
    cfg: NeuralGreedyConfig,
    seed: u64,
    theta: ParamVector,
    history: Vec<Observation>,
    steps: usize,
    retrains: u64,
}

impl NeuralGreedyAgent {
    pub fn new(arch: MlpArchitecture, cfg: NeuralGreedyConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        cfg.sgd.validate()?;
        if cfg.update_period == 0 {
            return Err(Error::config("update_period", "must be positive"));
        }
        Ok(Self {
            theta: ParamVector::zeros(arch.param_count()),
            arch,
            cfg,
            seed,
            history: Vec::new(),
            steps: 0,
            retrains: 0,
        })
    }

    pub fn theta(&self) -> &ParamVector {
        &self.theta
    }

    fn retrain(&mut self) -> Result<()> {
        self.retrains += 1;
        let cfg = self.cfg.sgd.with_seed(derive_seed(self.seed, self.retrains));
        self.theta = sgd_fit(&self.arch, &self.theta, &self.history, &cfg)?;
        Ok(())
    }
}

impl Agent for NeuralGreedyAgent {
    fn name(&self) -> &str {
        "neural_greedy"
    }

    fn init_belief(&mut self, warmup: &[Observation]) -> Result<()> {
        self.theta = init_params(&self.arch, derive_seed(self.seed, 0));
        self.history = warmup.to_vec();
        self.steps = 0;
        self.retrains = 0;
        if !warmup.is_empty() {
            self.retrain()?;
        }
        Ok(())
    }

    fn choose_action(&self, state: &[f64], _rng: &mut dyn RngCore) -> Result<usize> {
        Ok(argmax(&forward_all_actions(&self.arch, &self.theta, state)?))
    }

    fn update_belief(&mut self, obs: &Observation) -> Result<()> {
        self.history.push(obs.clone());
        self.steps += 1;
        if self.steps % self.cfg.update_period == 0 {
            self.retrain()?;
        }
        Ok(())
    }
}
