use nalgebra::DVector;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::Agent;
use crate::ekf::{param_observation, subspace_observation, EkfBelief, EkfNoise};
use crate::linalg::argmax;
use crate::reward_models::{forward_all_actions, init_params, sgd_fit, sgd_train, MlpArchitecture, ParamVector, SgdConfig};
use crate::subspace::{iterate_matrix, random_subspace, svd_subspace, AffineSubspace, SubspaceKind};
use crate::{derive_seed, Error, Observation, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EkfMode {
    /// Full covariance over subspace coordinates `z`.
    SubspaceFull,
    /// Diagonal covariance over `z`.
    SubspaceDiag,
    /// Full covariance over all network parameters.
    FullSpace,
    /// Diagonal covariance over all network parameters.
    DiagSpace,
}

impl EkfMode {
    pub fn uses_subspace(self) -> bool {
        matches!(self, EkfMode::SubspaceFull | EkfMode::SubspaceDiag)
    }

    fn full_covariance(self) -> bool {
        matches!(self, EkfMode::SubspaceFull | EkfMode::FullSpace)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EkfTsConfig {
    pub mode: EkfMode,
    pub subspace: SubspaceKind,
    /// Subspace dimension `d`.
    pub dim: usize,
    pub noise: EkfNoise,
    /// Prior variance `σ0²` of every coordinate.
    pub prior_var: f64,
    /// Warmup training; its iterates feed the SVD basis.
    pub sgd: SgdConfig,
    /// Keep every `thin`-th SGD iterate for the SVD.
    pub thin: usize,
}

impl Default for EkfTsConfig {
    fn default() -> Self {
        Self {
            mode: EkfMode::SubspaceFull,
            subspace: SubspaceKind::Svd,
            dim: 200,
            noise: EkfNoise::default(),
            prior_var: 1.0,
            sgd: SgdConfig::default(),
            thin: 1,
        }
    }
}

impl EkfTsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mode.uses_subspace() && self.dim == 0 {
            return Err(Error::config("dim", "must be positive"));
        }
        if !(self.prior_var > 0.0 && self.prior_var.is_finite()) {
            return Err(Error::config("prior_var", "must be finite and > 0"));
        }
        if self.thin == 0 {
            return Err(Error::config("thin", "must be positive"));
        }
        self.noise.validate()?;
        self.sgd.validate()
    }
}

/// Thompson sampling with an EKF over network parameters, either in an
/// affine subspace `θ = A z + θ*` built after warmup training, or in the
/// full parameter space.
#[derive(Debug, Clone)]
pub struct EkfTsAgent {
    arch: MlpArchitecture,
    cfg: EkfTsConfig,
    seed: u64,
    initial: Option<ParamVector>,
    custom: Option<AffineSubspace>,
    subspace: Option<AffineSubspace>,
    belief: EkfBelief,
}

impl EkfTsAgent {
    pub fn new(arch: MlpArchitecture, cfg: EkfTsConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        cfg.validate()?;
        let full = arch.param_count();
        if cfg.mode.uses_subspace() && cfg.dim > full {
            return Err(Error::dim(format!("subspace dimension {} exceeds parameter count {full}", cfg.dim)));
        }
        Ok(Self {
            belief: EkfBelief::diag(DVector::zeros(0), DVector::zeros(0)),
            arch,
            cfg,
            seed,
            initial: None,
            custom: None,
            subspace: None,
        })
    }

    pub fn with_initial_params(mut self, theta: ParamVector) -> Result<Self> {
        if theta.len() != self.arch.param_count() {
            return Err(Error::shape("initial parameters do not match the architecture"));
        }
        self.initial = Some(theta);
        Ok(self)
    }

    /// Use `sub` instead of building a basis from the warmup iterates.
    pub fn with_subspace(mut self, sub: AffineSubspace) -> Result<Self> {
        if !self.cfg.mode.uses_subspace() {
            return Err(Error::config("mode", "a custom subspace needs a subspace mode"));
        }
        if sub.full_dim() != self.arch.param_count() {
            return Err(Error::shape("subspace ambient dimension does not match the network"));
        }
        self.custom = Some(sub);
        Ok(self)
    }

    pub fn belief(&self) -> &EkfBelief {
        &self.belief
    }

    pub fn subspace(&self) -> Option<&AffineSubspace> {
        self.subspace.as_ref()
    }

    pub fn config(&self) -> &EkfTsConfig {
        &self.cfg
    }

    /// Parameters at the posterior mean.
    pub fn mean_params(&self) -> Result<ParamVector> {
        match &self.subspace {
            Some(sub) => sub.lift(&self.belief.mean),
            None => Ok(ParamVector(self.belief.mean.as_slice().to_vec())),
        }
    }

    fn prior(&self, mean: DVector<f64>) -> EkfBelief {
        let n = mean.len();
        if self.cfg.mode.full_covariance() {
            EkfBelief::isotropic(mean, self.cfg.prior_var)
        } else {
            EkfBelief::diag(mean, DVector::from_element(n, self.cfg.prior_var))
        }
    }

    fn observe(&mut self, obs: &Observation) -> Result<()> {
        let (f, h) = match &self.subspace {
            Some(sub) => subspace_observation(sub, &self.arch, &self.belief.mean, &obs.state, obs.action)?,
            None => param_observation(&self.arch, &self.belief.mean, &obs.state, obs.action)?,
        };
        self.belief.assimilate(f, &h, obs.reward, &self.cfg.noise)
    }
}

impl Agent for EkfTsAgent {
    fn name(&self) -> &str {
        "ekf_ts"
    }

    fn init_belief(&mut self, warmup: &[Observation]) -> Result<()> {
        let theta0 = match &self.initial {
            Some(t) => t.clone(),
            None => init_params(&self.arch, derive_seed(self.seed, 0)),
        };
        let sgd = self.cfg.sgd.with_seed(derive_seed(self.seed, 1));
        let needs_iterates = self.cfg.mode.uses_subspace() && self.custom.is_none() && self.cfg.subspace == SubspaceKind::Svd;
        let (theta_tau, iterates) = if warmup.is_empty() {
            (theta0.clone(), vec![theta0])
        } else if needs_iterates {
            let it = sgd_train(&self.arch, &theta0, warmup, &sgd)?;
            (it.last().unwrap().clone(), it)
        } else {
            (sgd_fit(&self.arch, &theta0, warmup, &sgd)?, Vec::new())
        };

        if self.cfg.mode.uses_subspace() {
            let sub = match (&self.custom, self.cfg.subspace) {
                (Some(s), _) => s.clone(),
                (None, SubspaceKind::Svd) => svd_subspace(&iterate_matrix(&iterates), self.cfg.dim, &theta_tau, self.cfg.thin)?,
                (None, SubspaceKind::Random) => random_subspace(
                    self.arch.param_count(),
                    self.cfg.dim,
                    &theta_tau,
                    derive_seed(self.seed, 2),
                )?,
                (None, SubspaceKind::Custom) => {
                    return Err(Error::config("subspace", "custom kind needs an explicit basis"));
                }
            };
            let shift = DVector::from_column_slice(&theta_tau) - &sub.offset;
            self.belief = self.prior(sub.basis.tr_mul(&shift));
            self.subspace = Some(sub);
        } else {
            self.belief = self.prior(DVector::from_column_slice(&theta_tau));
            self.subspace = None;
        }
        for obs in warmup {
            self.observe(obs)?;
        }
        Ok(())
    }

    fn choose_action(&self, state: &[f64], rng: &mut dyn RngCore) -> Result<usize> {
        let draw = self.belief.sample(rng);
        let theta = match &self.subspace {
            Some(sub) => sub.lift(&draw)?,
            None => ParamVector(draw.data.into()),
        };
        Ok(argmax(&forward_all_actions(&self.arch, &theta, state)?))
    }

    fn update_belief(&mut self, obs: &Observation) -> Result<()> {
        self.observe(obs)
    }
}
