use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::neural_linear::check_feature_arch;
use super::pgd::pgd_psd_project;
use super::{per_arm_nig_choice, Agent, ArmStats};
use crate::bayes_linear::{nig_from_stats_with_precision, NigBelief, NigPrior};
use crate::linalg::symmetrize;
use crate::reward_models::{
    head_weights, init_params, penultimate_features, sgd_fit, sgd_step, MlpArchitecture, ParamVector, SgdConfig,
};
use crate::{derive_seed, Error, Observation, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PgdConfig {
    /// Minibatch rounds per online step; `None` means one sweep of memory.
    pub rounds: Option<usize>,
    /// PGD iterations per round.
    pub steps: usize,
    /// Base step size; the step at online step `t` is `learning_rate / (t + 1)`.
    pub learning_rate: f64,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            rounds: None,
            steps: 1,
            learning_rate: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Lim2Config {
    pub memory: usize,
    /// Warmup training uses every field; online rounds use the learning
    /// rate and batch size.
    pub sgd: SgdConfig,
    pub pgd: PgdConfig,
    pub prior: NigPrior,
    /// Eigenvalue floor used when inverting a prior covariance that PGD
    /// has made singular.
    pub eig_floor: f64,
}

impl Default for Lim2Config {
    fn default() -> Self {
        Self {
            memory: 200,
            sgd: SgdConfig::default(),
            pgd: PgdConfig::default(),
            prior: NigPrior::default(),
            eig_floor: 1e-6,
        }
    }
}

impl Lim2Config {
    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 {
            return Err(Error::config("memory", "must be positive"));
        }
        if self.pgd.rounds == Some(0) {
            return Err(Error::config("pgd.rounds", "must be positive"));
        }
        if !(self.pgd.learning_rate >= 0.0 && self.pgd.learning_rate.is_finite()) {
            return Err(Error::config("pgd.learning_rate", "must be finite and >= 0"));
        }
        if !(self.eig_floor > 0.0) {
            return Err(Error::config("eig_floor", "must be > 0"));
        }
        self.sgd.validate()?;
        self.prior.validate()
    }
}

/// Limited-memory neural-linear agent that carries its per-arm priors
/// across feature changes by likelihood matching.
#[derive(Debug, Clone)]
pub struct Lim2Agent {
    arch: MlpArchitecture,
    cfg: Lim2Config,
    seed: u64,
    n_z: usize,
    initial: Option<ParamVector>,
    theta: ParamVector,
    memory: VecDeque<Observation>,
    prior_means: Vec<DVector<f64>>,
    prior_covs: Vec<DMatrix<f64>>,
    stats: Vec<ArmStats>,
    beliefs: Vec<NigBelief>,
    train_rng: ChaCha8Rng,
    steps: usize,
}

impl Lim2Agent {
    pub fn new(arch: MlpArchitecture, cfg: Lim2Config, seed: u64) -> Result<Self> {
        let n_z = check_feature_arch(&arch)?;
        cfg.validate()?;
        let n_a = arch.num_actions;
        let base = NigBelief::from_prior(n_z, &cfg.prior);
        Ok(Self {
            theta: ParamVector::zeros(arch.param_count()),
            prior_means: vec![base.mean.clone(); n_a],
            prior_covs: vec![base.cov.clone(); n_a],
            stats: vec![ArmStats::new(n_z); n_a],
            beliefs: vec![base; n_a],
            train_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 1)),
            arch,
            cfg,
            seed,
            n_z,
            initial: None,
            memory: VecDeque::new(),
            steps: 0,
        })
    }

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

    pub fn prior_covs(&self) -> &[DMatrix<f64>] {
        &self.prior_covs
    }

    pub fn prior_means(&self) -> &[DVector<f64>] {
        &self.prior_means
    }

    pub fn memory_len(&self) -> usize {
        self.memory.len()
    }

    fn features(&self, state: &[f64]) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(penultimate_features(&self.arch, &self.theta, state)?))
    }

    fn memory_features(&self) -> Result<Vec<DVector<f64>>> {
        self.memory.iter().map(|o| self.features(&o.state)).collect()
    }

    fn set_prior_means(&mut self) {
        for a in 0..self.arch.num_actions {
            self.prior_means[a] = DVector::from_column_slice(head_weights(&self.arch, &self.theta, a));
        }
    }

    /// Prior precision with eigenvalues of `Σ0` floored at `eig_floor`.
    fn prior_precision(&self, a: usize) -> DMatrix<f64> {
        let eig = self.prior_covs[a].clone().symmetric_eigen();
        let mut v = eig.eigenvectors.clone();
        for (k, lambda) in eig.eigenvalues.iter().enumerate() {
            v.column_mut(k).scale_mut(1.0 / lambda.max(self.cfg.eig_floor));
        }
        let mut p = v * eig.eigenvectors.transpose();
        symmetrize(&mut p);
        p
    }

    fn rebuild(&mut self) -> Result<()> {
        let feats = self.memory_features()?;
        for s in &mut self.stats {
            s.clear();
        }
        for (phi, obs) in feats.iter().zip(&self.memory) {
            self.stats[obs.action].add(phi, obs.reward);
        }
        for a in 0..self.arch.num_actions {
            let prior = NigBelief::new(
                self.prior_means[a].clone(),
                self.prior_covs[a].clone(),
                self.cfg.prior.a0,
                self.cfg.prior.b0,
            );
            let prec = self.prior_precision(a);
            let s = &self.stats[a];
            self.beliefs[a] = nig_from_stats_with_precision(&prior, &prec, &s.psi, &s.phi, s.r2, s.count)?;
        }
        Ok(())
    }

    /// One round of SGD on a memory minibatch followed by per-arm prior
    /// transfer from the old features to the new ones.
    fn train_round(&mut self, pgd_rate: f64) -> Result<()> {
        let n = self.memory.len();
        let b = self.cfg.sgd.batch_size.min(n);
        let idx = sample(&mut self.train_rng, n, b);
        let old = self.memory_features()?;
        {
            let batch: Vec<&Observation> = idx.iter().map(|i| &self.memory[i]).collect();
            sgd_step(&self.arch, &mut self.theta.0, &batch, self.cfg.sgd.learning_rate)?;
        }
        if self.cfg.pgd.steps == 0 {
            return Ok(());
        }
        let new = self.memory_features()?;
        for a in 0..self.arch.num_actions {
            let mut feats = Vec::new();
            let mut targets = Vec::new();
            for (j, obs) in self.memory.iter().enumerate() {
                if obs.action == a {
                    targets.push(old[j].dot(&(&self.prior_covs[a] * &old[j])));
                    feats.push(new[j].clone());
                }
            }
            if feats.is_empty() {
                continue;
            }
            let out = pgd_psd_project(&self.prior_covs[a], &feats, &targets, self.cfg.pgd.steps, pgd_rate);
            self.prior_covs[a] = out.matrix;
        }
        Ok(())
    }
}

impl Agent for Lim2Agent {
    fn name(&self) -> &str {
        "lim2"
    }

    fn init_belief(&mut self, warmup: &[Observation]) -> Result<()> {
        self.theta = match &self.initial {
            Some(t) => t.clone(),
            None => init_params(&self.arch, derive_seed(self.seed, 0)),
        };
        self.train_rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, 1));
        self.steps = 0;
        if !warmup.is_empty() {
            let cfg = self.cfg.sgd.with_seed(derive_seed(self.seed, 2));
            self.theta = sgd_fit(&self.arch, &self.theta, warmup, &cfg)?;
        }
        let start = warmup.len().saturating_sub(self.cfg.memory);
        self.memory = warmup[start..].iter().cloned().collect();
        let base = NigBelief::from_prior(self.n_z, &self.cfg.prior);
        self.prior_covs = vec![base.cov; self.arch.num_actions];
        self.set_prior_means();
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
        while self.memory.len() > self.cfg.memory {
            self.memory.pop_front();
        }
        self.steps += 1;
        let rounds = self
            .cfg
            .pgd
            .rounds
            .unwrap_or_else(|| self.memory.len().div_ceil(self.cfg.sgd.batch_size));
        let rate = self.cfg.pgd.learning_rate / (self.steps as f64 + 1.0);
        for _ in 0..rounds {
            self.train_round(rate)?;
        }
        self.set_prior_means();
        self.rebuild()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{NeuralLinearAgent, NeuralLinearConfig};
    use crate::linalg::max_abs_diff;
    use crate::reward_models::HeadMode;
    use rand::Rng;

    fn arch() -> MlpArchitecture {
        MlpArchitecture::new(3, vec![5], 3, HeadMode::MultiHead).unwrap()
    }

    fn random_obs(rng: &mut ChaCha8Rng) -> Observation {
        let s = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        Observation::new(s, rng.random_range(0..3), rng.random_range(0.0..1.0))
    }

    fn frozen_sgd() -> SgdConfig {
        SgdConfig {
            learning_rate: 0.0,
            epochs: 1,
            batch_size: 4,
            seed: 0,
        }
    }

    #[test]
    fn memory_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = Lim2Config {
            memory: 10,
            pgd: PgdConfig {
                rounds: Some(1),
                ..Default::default()
            },
            ..Default::default()
        };
        let mut agent = Lim2Agent::new(arch(), cfg, 0).unwrap();
        let warm: Vec<Observation> = (0..15).map(|_| random_obs(&mut rng)).collect();
        agent.init_belief(&warm).unwrap();
        assert_eq!(agent.memory_len(), 10);
        for _ in 0..40 {
            agent.update_belief(&random_obs(&mut rng)).unwrap();
            assert!(agent.memory_len() <= 10);
        }
        assert_eq!(agent.memory_len(), 10);
        for c in agent.prior_covs() {
            assert!(crate::linalg::min_eigenvalue(c) >= -1e-9);
        }
    }

    #[test]
    fn frozen_network_keeps_priors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = Lim2Config {
            memory: 50,
            sgd: frozen_sgd(),
            ..Default::default()
        };
        let mut agent = Lim2Agent::new(arch(), cfg, 3).unwrap();
        let warm: Vec<Observation> = (0..9).map(|_| random_obs(&mut rng)).collect();
        agent.init_belief(&warm).unwrap();
        let covs = agent.prior_covs().to_vec();
        let means = agent.prior_means().to_vec();
        for _ in 0..15 {
            agent.update_belief(&random_obs(&mut rng)).unwrap();
        }
        for (a, b) in agent.prior_covs().iter().zip(&covs) {
            assert!(max_abs_diff(a, b) < 1e-9);
        }
        for (a, b) in agent.prior_means().iter().zip(&means) {
            assert!((a - b).amax() < 1e-9);
        }
    }

    #[test]
    fn matches_neural_linear_without_transfer() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut theta = init_params(&arch(), 5);
        let head = *arch().layers().last().unwrap();
        for w in &mut theta.0[head.weights..head.biases] {
            *w = 0.0;
        }
        let mut lim2 = Lim2Agent::new(
            arch(),
            Lim2Config {
                memory: 1000,
                sgd: frozen_sgd(),
                pgd: PgdConfig {
                    steps: 0,
                    ..Default::default()
                },
                ..Default::default()
            },
            7,
        )
        .unwrap()
        .with_initial_params(theta.clone())
        .unwrap();
        let mut nl = NeuralLinearAgent::new(
            arch(),
            NeuralLinearConfig {
                update_period: 1,
                sgd: frozen_sgd(),
                ..Default::default()
            },
            7,
        )
        .unwrap()
        .with_initial_params(theta)
        .unwrap();
        let warm: Vec<Observation> = (0..9).map(|_| random_obs(&mut rng)).collect();
        lim2.init_belief(&warm).unwrap();
        nl.init_belief(&warm).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(8);
        let mut r2 = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..30 {
            let mut o = random_obs(&mut rng);
            let a1 = lim2.choose_action(&o.state, &mut r1).unwrap();
            let a2 = nl.choose_action(&o.state, &mut r2).unwrap();
            assert_eq!(a1, a2);
            o.action = a1;
            lim2.update_belief(&o).unwrap();
            nl.update_belief(&o).unwrap();
            for (x, y) in lim2.beliefs().iter().zip(nl.beliefs()) {
                assert!((&x.mean - &y.mean).amax() < 1e-9);
                assert!(max_abs_diff(&x.cov, &y.cov) < 1e-9);
                assert!((x.a - y.a).abs() < 1e-12);
                assert!((x.b - y.b).abs() < 1e-9);
            }
        }
    }
}
