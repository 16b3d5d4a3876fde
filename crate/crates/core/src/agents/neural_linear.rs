use std::collections::VecDeque;

use nalgebra::DVector;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{per_arm_nig_choice, Agent, ArmStats};
use crate::bayes_linear::{NigBelief, NigPrior};
use crate::reward_models::{init_params, penultimate_features, sgd_fit, HeadMode, MlpArchitecture, ParamVector, SgdConfig};
use crate::{derive_seed, Error, Observation, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuralLinearConfig {
    /// Retrain the network every `update_period` online steps.
    pub update_period: usize,
    /// Keep only the most recent observations; `None` keeps everything.
    pub memory_cap: Option<usize>,
    pub sgd: SgdConfig,
    pub prior: NigPrior,
}

impl Default for NeuralLinearConfig {
    fn default() -> Self {
        Self {
            update_period: 100,
            memory_cap: None,
            sgd: SgdConfig::default(),
            prior: NigPrior::default(),
        }
    }
}

impl NeuralLinearConfig {
    pub fn validate(&self) -> Result<()> {
        if self.update_period == 0 {
            return Err(Error::config("update_period", "must be positive"));
        }
        if self.memory_cap == Some(0) {
            return Err(Error::config("memory_cap", "must be positive"));
        }
        self.sgd.validate()?;
        self.prior.validate()
    }
}

pub(crate) fn check_feature_arch(arch: &MlpArchitecture) -> Result<usize> {
    arch.validate()?;
    if arch.head_mode != HeadMode::MultiHead {
        return Err(Error::config("head_mode", "feature-based agents need a multi-head network"));
    }
    arch.feature_dim().ok_or(Error::NoHiddenLayer)
}

/// Bayesian linear regression per arm on the penultimate features of a
/// periodically retrained network.
#[derive(Debug, Clone)]
pub struct NeuralLinearAgent {
    arch: MlpArchitecture,
    cfg: NeuralLinearConfig,
    seed: u64,
    initial: Option<ParamVector>,
    theta: ParamVector,
    memory: VecDeque<Observation>,
    prior: NigBelief,
    stats: Vec<ArmStats>,
    beliefs: Vec<NigBelief>,
    steps: usize,
    retrains: u64,
}

impl NeuralLinearAgent {
    pub fn new(arch: MlpArchitecture, cfg: NeuralLinearConfig, seed: u64) -> Result<Self> {
        let n_z = check_feature_arch(&arch)?;
        cfg.validate()?;
        let prior = NigBelief::from_prior(n_z, &cfg.prior);
        let n_a = arch.num_actions;
        Ok(Self {
            theta: ParamVector::zeros(arch.param_count()),
            arch,
            seed,
            initial: None,
            memory: VecDeque::new(),
            stats: vec![ArmStats::new(n_z); n_a],
            beliefs: vec![prior.clone(); n_a],
            prior,
            cfg,
            steps: 0,
            retrains: 0,
        })
    }

    /// Start warmup training from `theta` instead of a fresh initialisation.
    pub fn with_initial_params(mut self, theta: ParamVector) -> Result<Self> {
        if theta.len() != self.arch.param_count() {
            return Err(Error::shape("initial parameters do not match the architecture"));
        }
        self.initial = Some(theta);
        Ok(self)
    }

    pub fn theta(&self) -> &ParamVector {
        &self.theta
    }

    pub fn beliefs(&self) -> &[NigBelief] {
        &self.beliefs
    }

    pub fn stats(&self) -> &[ArmStats] {
        &self.stats
    }

    pub fn memory_len(&self) -> usize {
        self.memory.len()
    }

    fn features(&self, state: &[f64]) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(penultimate_features(&self.arch, &self.theta, state)?))
    }

    fn trim_memory(&mut self) {
        if let Some(cap) = self.cfg.memory_cap {
            while self.memory.len() > cap {
                self.memory.pop_front();
            }
        }
    }

    fn retrain(&mut self) -> Result<()> {
        self.retrains += 1;
        let data: Vec<Observation> = self.memory.iter().cloned().collect();
        let cfg = self.cfg.sgd.with_seed(derive_seed(self.seed, self.retrains));
        self.theta = sgd_fit(&self.arch, &self.theta, &data, &cfg)?;
        Ok(())
    }

    /// Recompute every arm's statistics from memory and refresh all beliefs
    /// from the fixed prior.
    pub fn rebuild(&mut self) -> Result<()> {
        for s in &mut self.stats {
            s.clear();
        }
        for i in 0..self.memory.len() {
            let phi = self.features(&self.memory[i].state)?;
            let obs = &self.memory[i];
            self.stats[obs.action].add(&phi, obs.reward);
        }
        self.beliefs = self
            .stats
            .iter()
            .map(|s| s.posterior(&self.prior))
            .collect::<Result<_>>()?;
        Ok(())
    }
}

impl Agent for NeuralLinearAgent {
    fn name(&self) -> &str {
        "neural_linear"
    }

    fn init_belief(&mut self, warmup: &[Observation]) -> Result<()> {
        let theta0 = match &self.initial {
            Some(t) => t.clone(),
            None => init_params(&self.arch, derive_seed(self.seed, 0)),
        };
        self.retrains = 0;
        self.steps = 0;
        self.theta = theta0;
        self.memory = warmup.iter().cloned().collect();
        self.trim_memory();
        if !warmup.is_empty() {
            self.retrain()?;
        }
        self.rebuild()
    }

    fn choose_action(&self, state: &[f64], rng: &mut dyn RngCore) -> Result<usize> {
        let phi = self.features(state)?;
        Ok(per_arm_nig_choice(&self.beliefs, &phi, rng))
    }

    fn update_belief(&mut self, obs: &Observation) -> Result<()> {
        if obs.action >= self.arch.num_actions {
            return Err(Error::ActionOutOfRange {
                action: obs.action,
                num_actions: self.arch.num_actions,
            });
        }
        self.memory.push_back(obs.clone());
        self.trim_memory();
        self.steps += 1;
        if self.steps % self.cfg.update_period == 0 {
            self.retrain()?;
            self.rebuild()
        } else {
            let phi = self.features(&obs.state)?;
            self.stats[obs.action].add(&phi, obs.reward);
            self.beliefs[obs.action] = self.stats[obs.action].posterior(&self.prior)?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes_linear::nig_batch;
    use crate::linalg::max_abs_diff;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn arch() -> MlpArchitecture {
        MlpArchitecture::new(3, vec![6], 2, HeadMode::MultiHead).unwrap()
    }

    fn random_obs(rng: &mut ChaCha8Rng) -> Observation {
        let s = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        Observation::new(s, rng.random_range(0..2), rng.random_range(0.0..1.0))
    }

    fn frozen_cfg() -> NeuralLinearConfig {
        NeuralLinearConfig {
            update_period: 10_000,
            sgd: SgdConfig {
                learning_rate: 0.0,
                epochs: 1,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn rejects_unsuitable_networks() {
        let linear = MlpArchitecture::new(3, vec![], 2, HeadMode::MultiHead).unwrap();
        assert!(matches!(
            NeuralLinearAgent::new(linear, Default::default(), 0),
            Err(Error::NoHiddenLayer)
        ));
        let concat = MlpArchitecture::new(3, vec![4], 2, HeadMode::Concat).unwrap();
        assert!(NeuralLinearAgent::new(concat, Default::default(), 0).is_err());
    }

    #[test]
    fn frozen_features_match_batch_posterior() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut agent = NeuralLinearAgent::new(arch(), frozen_cfg(), 3).unwrap();
        let warm: Vec<Observation> = (0..6).map(|_| random_obs(&mut rng)).collect();
        agent.init_belief(&warm).unwrap();
        let mut all = warm.clone();
        for _ in 0..40 {
            let o = random_obs(&mut rng);
            agent.update_belief(&o).unwrap();
            all.push(o);
        }
        assert_eq!(agent.memory_len(), 46);
        let prior = NigBelief::from_prior(6, &NigPrior::default());
        for a in 0..2 {
            let rows: Vec<&Observation> = all.iter().filter(|o| o.action == a).collect();
            let feats: Vec<Vec<f64>> = rows
                .iter()
                .map(|o| penultimate_features(&arch(), agent.theta(), &o.state).unwrap())
                .collect();
            let xs = DMatrix::from_fn(rows.len(), 6, |i, j| feats[i][j]);
            let ys = DVector::from_fn(rows.len(), |i, _| rows[i].reward);
            let batch = nig_batch(&prior, &xs, &ys).unwrap();
            let bel = &agent.beliefs()[a];
            assert!((&bel.mean - &batch.mean).amax() < 1e-6);
            assert!(max_abs_diff(&bel.cov, &batch.cov) < 1e-8);
            assert!((bel.a - batch.a).abs() < 1e-12);
            assert!((bel.b - batch.b).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_statistics_give_the_prior_and_rebuild_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut agent = NeuralLinearAgent::new(arch(), frozen_cfg(), 4).unwrap();
        agent.init_belief(&[]).unwrap();
        let prior = NigBelief::from_prior(6, &NigPrior::default());
        assert!(agent.beliefs().iter().all(|b| *b == prior));
        for _ in 0..10 {
            agent.update_belief(&random_obs(&mut rng)).unwrap();
        }
        agent.rebuild().unwrap();
        let once = agent.beliefs().to_vec();
        agent.rebuild().unwrap();
        assert_eq!(agent.beliefs(), &once[..]);
    }

    #[test]
    fn memory_cap_and_retrain_schedule() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = NeuralLinearConfig {
            update_period: 5,
            memory_cap: Some(8),
            sgd: SgdConfig {
                epochs: 2,
                batch_size: 4,
                ..Default::default()
            },
            ..Default::default()
        };
        let mut agent = NeuralLinearAgent::new(arch(), cfg, 5).unwrap();
        let warm: Vec<Observation> = (0..4).map(|_| random_obs(&mut rng)).collect();
        agent.init_belief(&warm).unwrap();
        let theta0 = agent.theta().clone();
        for k in 1..=20 {
            agent.update_belief(&random_obs(&mut rng)).unwrap();
            assert!(agent.memory_len() <= 8);
            if k < 5 {
                assert_eq!(agent.theta(), &theta0);
            }
        }
        assert_ne!(agent.theta(), &theta0);
        let total: usize = agent.stats().iter().map(|s| s.count).sum();
        assert_eq!(total, 8);
    }

    #[test]
    fn same_seed_same_actions() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let mut act_rng = ChaCha8Rng::seed_from_u64(10);
            let mut agent = NeuralLinearAgent::new(arch(), NeuralLinearConfig {
                update_period: 7,
                ..Default::default()
            }, 1)
            .unwrap();
            let warm: Vec<Observation> = (0..6).map(|_| random_obs(&mut rng)).collect();
            agent.init_belief(&warm).unwrap();
            (0..30)
                .map(|_| {
                    let mut o = random_obs(&mut rng);
                    o.action = agent.choose_action(&o.state, &mut act_rng).unwrap();
                    agent.update_belief(&o).unwrap();
                    o.action
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
