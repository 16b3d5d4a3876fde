//! Bandit policies behind one interface.
//!
//! An agent is first given the round-robin warmup data through
//! [`Agent::init_belief`], then alternates [`Agent::choose_action`] and
//! [`Agent::update_belief`] once per step. Choosing never mutates the
//! belief; all randomness comes from the `rng` the caller passes in, so
//! replaying the same stream reproduces the same actions.

mod baseline;
mod ekf_ts;
mod greedy;
mod lim2;
mod linear;
mod neural_linear;
mod neural_ts;
mod pgd;
mod select;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use crate::bayes_linear::{nig_from_stats, NigBelief};
use crate::{Observation, Result};

pub use baseline::{OracleAgent, RandomAgent};
pub use ekf_ts::{EkfMode, EkfTsAgent, EkfTsConfig};
pub use greedy::{NeuralGreedyAgent, NeuralGreedyConfig};
pub use lim2::{Lim2Agent, Lim2Config, PgdConfig};
pub use linear::LinearTsAgent;
pub use neural_linear::{NeuralLinearAgent, NeuralLinearConfig};
pub use neural_ts::{NeuralTsAgent, NeuralTsConfig};
pub use pgd::{pgd_objective, pgd_psd_project, PgdResult};
pub use select::{ts_select, ucb_select};

pub trait Agent: Send {
    fn name(&self) -> &str;

    /// Reset the belief from the warmup observations.
    fn init_belief(&mut self, warmup: &[Observation]) -> Result<()>;

    fn choose_action(&self, state: &[f64], rng: &mut dyn RngCore) -> Result<usize>;

    /// Absorb exactly one observation.
    fn update_belief(&mut self, obs: &Observation) -> Result<()>;
}

/// Per-arm sufficient statistics of a Bayesian linear regression:
/// `Ψ = Σ y φ`, `Φ = Σ φ φᵀ`, `R² = Σ y²` and the count `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmStats {
    pub psi: DVector<f64>,
    pub phi: DMatrix<f64>,
    pub r2: f64,
    pub count: usize,
}

impl ArmStats {
    pub fn new(dim: usize) -> Self {
        Self {
            psi: DVector::zeros(dim),
            phi: DMatrix::zeros(dim, dim),
            r2: 0.0,
            count: 0,
        }
    }

    pub fn add(&mut self, x: &DVector<f64>, y: f64) {
        self.psi.axpy(y, x, 1.0);
        self.phi.ger(1.0, x, x, 1.0);
        self.r2 += y * y;
        self.count += 1;
    }

    pub fn clear(&mut self) {
        self.psi.fill(0.0);
        self.phi.fill(0.0);
        self.r2 = 0.0;
        self.count = 0;
    }

    /// NIG posterior of these statistics under `prior`.
    pub fn posterior(&self, prior: &NigBelief) -> Result<NigBelief> {
        nig_from_stats(prior, &self.psi, &self.phi, self.r2, self.count)
    }
}

/// Argmax of per-arm scores drawn from independent per-arm NIG posteriors
/// over the shared feature vector `x`.
pub(crate) fn per_arm_nig_choice(beliefs: &[NigBelief], x: &DVector<f64>, rng: &mut dyn RngCore) -> usize {
    let scores: Vec<f64> = beliefs
        .iter()
        .map(|b| {
            let (_, w) = crate::bayes_linear::sample_nig(b, rng);
            w.dot(x)
        })
        .collect();
    crate::linalg::argmax(&scores)
}
