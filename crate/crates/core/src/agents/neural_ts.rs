use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Agent;
use crate::linalg::{argmax, symmetrize};
use crate::reward_models::{init_params, sgd_fit, value_and_grad, MlpArchitecture, ParamVector, SgdConfig};
use crate::{derive_seed, Error, Observation, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuralTsConfig {
    /// Prior precision scale: `B_0 = λ I`.
    pub lambda: f64,
    /// Exploration multiplier on the predictive standard deviation.
    pub nu: f64,
    pub update_period: usize,
    pub sgd: SgdConfig,
    /// Track only the diagonal of `B` (`O(D)` per step instead of `O(D²)`).
    pub diagonal: bool,
}

impl Default for NeuralTsConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            nu: 1.0,
            update_period: 100,
            sgd: SgdConfig::default(),
            diagonal: false,
        }
    }
}

impl NeuralTsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda", "must be finite and > 0"));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::config("nu", "must be finite and >= 0"));
        }
        if self.update_period == 0 {
            return Err(Error::config("update_period", "must be positive"));
        }
        self.sgd.validate()
    }
}

#[derive(Debug, Clone)]
enum Precision {
    /// `B` and `B⁻¹`
    Full(DMatrix<f64>, DMatrix<f64>),
    Diag(DVector<f64>),
}

/// Thompson sampling on scaled gradient features `φ = ∇θ f / √N_h`.
#[derive(Debug, Clone)]
pub struct NeuralTsAgent {
    arch: MlpArchitecture,
    cfg: NeuralTsConfig,
    seed: u64,
    width: f64,
    initial: Option<ParamVector>,
    theta: ParamVector,
    precision: Precision,
    history: Vec<Observation>,
    steps: usize,
    retrains: u64,
}

impl NeuralTsAgent {
    pub fn new(arch: MlpArchitecture, cfg: NeuralTsConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        cfg.validate()?;
        let width = arch.hidden_dims.first().copied().unwrap_or(1) as f64;
        let precision = Self::initial_precision(arch.param_count(), &cfg);
        Ok(Self {
            theta: ParamVector::zeros(arch.param_count()),
            arch,
            cfg,
            seed,
            width,
            initial: None,
            precision,
            history: Vec::new(),
            steps: 0,
            retrains: 0,
        })
    }

    pub fn with_initial_params(mut self, theta: ParamVector) -> Result<Self> {
        if theta.len() != self.arch.param_count() {
            return Err(Error::shape("initial parameters do not match the architecture"));
        }
        self.initial = Some(theta);
        Ok(self)
    }

    fn initial_precision(d: usize, cfg: &NeuralTsConfig) -> Precision {
        if cfg.diagonal {
            Precision::Diag(DVector::from_element(d, cfg.lambda))
        } else {
            Precision::Full(DMatrix::identity(d, d) * cfg.lambda, DMatrix::identity(d, d) / cfg.lambda)
        }
    }

    pub fn theta(&self) -> &ParamVector {
        &self.theta
    }

    /// Dense copy of the precision matrix `B`.
    pub fn precision(&self) -> DMatrix<f64> {
        match &self.precision {
            Precision::Full(b, _) => b.clone(),
            Precision::Diag(d) => DMatrix::from_diagonal(d),
        }
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    /// Prediction and scaled gradient feature for one arm.
    pub fn feature(&self, state: &[f64], action: usize) -> Result<(f64, DVector<f64>)> {
        let (f, g) = value_and_grad(&self.arch, &self.theta, state, action)?;
        let scale = 1.0 / self.width.sqrt();
        Ok((f, DVector::from_iterator(g.len(), g.into_iter().map(|x| x * scale))))
    }

    /// `λ φᵀ B⁻¹ φ`
    pub fn predictive_variance(&self, phi: &DVector<f64>) -> f64 {
        let q = match &self.precision {
            Precision::Full(_, inv) => phi.dot(&(inv * phi)),
            Precision::Diag(d) => phi.iter().zip(d.iter()).map(|(p, b)| p * p / b).sum(),
        };
        self.cfg.lambda * q.max(0.0)
    }

    fn absorb(&mut self, phi: &DVector<f64>) {
        match &mut self.precision {
            Precision::Full(b, inv) => {
                b.ger(1.0, phi, phi, 1.0);
                let u = &*inv * phi;
                let denom = 1.0 + phi.dot(&u);
                inv.ger(-1.0 / denom, &u, &u, 1.0);
                symmetrize(inv);
            }
            Precision::Diag(d) => {
                for (di, p) in d.iter_mut().zip(phi.iter()) {
                    *di += p * p;
                }
            }
        }
    }

    fn retrain(&mut self) -> Result<()> {
        self.retrains += 1;
        let cfg = self.cfg.sgd.with_seed(derive_seed(self.seed, self.retrains));
        self.theta = sgd_fit(&self.arch, &self.theta, &self.history, &cfg)?;
        Ok(())
    }
}

impl Agent for NeuralTsAgent {
    fn name(&self) -> &str {
        "neural_ts"
    }

    fn init_belief(&mut self, warmup: &[Observation]) -> Result<()> {
        self.theta = match &self.initial {
            Some(t) => t.clone(),
            None => init_params(&self.arch, derive_seed(self.seed, 0)),
        };
        self.steps = 0;
        self.retrains = 0;
        self.history = warmup.to_vec();
        self.precision = Self::initial_precision(self.arch.param_count(), &self.cfg);
        if !warmup.is_empty() {
            self.retrain()?;
        }
        for obs in warmup {
            let (_, phi) = self.feature(&obs.state, obs.action)?;
            self.absorb(&phi);
        }
        Ok(())
    }

    fn choose_action(&self, state: &[f64], rng: &mut dyn RngCore) -> Result<usize> {
        let mut scores = Vec::with_capacity(self.arch.num_actions);
        for a in 0..self.arch.num_actions {
            let (mu, phi) = self.feature(state, a)?;
            let v = self.predictive_variance(&phi);
            let eps: f64 = StandardNormal.sample(rng);
            scores.push(mu + self.cfg.nu * v.sqrt() * eps);
        }
        Ok(argmax(&scores))
    }

    fn update_belief(&mut self, obs: &Observation) -> Result<()> {
        let (_, phi) = self.feature(&obs.state, obs.action)?;
        self.absorb(&phi);
        self.history.push(obs.clone());
        self.steps += 1;
        if self.steps % self.cfg.update_period == 0 {
            self.retrain()?;
        }
        Ok(())
    }
}
