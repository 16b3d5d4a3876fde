//! Online Bayesian inference for neural contextual bandits.
//!
//! The centrepiece is Thompson sampling with an extended Kalman filter run
//! over a low-dimensional affine subspace of the network weights,
//! `θ(z) = A z + θ*`, where `A` comes from the SVD of warmup SGD iterates
//! (or from random Gaussian directions). The belief over `z` is a
//! `d`-dimensional Gaussian, so memory and per-step cost stay constant over
//! the lifetime of the agent.
//!
//! Alongside it the crate carries every comparison method needed to
//! benchmark it:
//!
//! - [`agents::LinearTsAgent`]: per-arm Normal-Inverse-Gamma linear regression
//! - [`agents::NeuralLinearAgent`]: Bayesian last layer on learned features
//! - [`agents::Lim2Agent`]: limited-memory neural-linear with likelihood matching
//! - [`agents::NeuralTsAgent`]: Thompson sampling on NTK gradient features
//! - [`agents::EkfTsAgent`]: EKF in a subspace, or in the full parameter space
//! - [`agents::NeuralGreedyAgent`]: point-estimate network, no exploration
//!
//! Environments ([`environments`]) cover classification-as-bandit, a
//! MovieLens-100k SVD simulator and synthetic oracles. [`harness`] runs the
//! warmup-then-online evaluation loop and aggregates trials; [`cli`] wires
//! it all to JSON experiment configs.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod agents;
pub mod bayes_linear;
pub mod cli;
pub mod config;
pub mod ekf;
pub mod environments;
mod error;
pub mod harness;
pub mod linalg;
pub mod reward_models;
pub mod subspace;
pub mod svg;

pub use error::{Error, Result};

/// One bandit interaction: the context that was seen, the arm that was
/// pulled and the scalar reward that came back.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Observation {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
}

impl Observation {
    pub fn new(state: Vec<f64>, action: usize, reward: f64) -> Self {
        Self {
            state,
            action,
            reward,
        }
    }
}

/// Derive an independent 64-bit seed for sub-stream `stream` of `base`.
///
/// SplitMix64 finaliser; used so that per-trial, per-agent and per-retrain
/// RNG streams never collide while remaining a pure function of the inputs.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
