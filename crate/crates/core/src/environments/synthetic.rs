use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::BanditEnv;
use crate::{Error, Result};

/// Linear Gaussian bandit with hidden per-arm weights.
///
/// `r_t(a) = w_aᵀ s_t + ε`, `s_t ~ N(0, I)`, `w_a ~ N(0, I)`,
/// `ε ~ N(0, σ²)`. States and noise are drawn up front for the horizon.
#[derive(Debug, Clone)]
pub struct LinearEnv {
    weights: Vec<Vec<f64>>,
    states: Vec<Vec<f64>>,
    noise: Vec<f64>,
    num_actions: usize,
    noise_std: f64,
}

impl LinearEnv {
    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    fn mean(&self, t: usize, a: usize) -> f64 {
        self.weights[a].iter().zip(&self.states[t]).map(|(w, s)| w * s).sum()
    }
}

pub fn synthetic_linear_env(
    state_dim: usize,
    num_actions: usize,
    noise_std: f64,
    horizon: usize,
    seed: u64,
) -> Result<LinearEnv> {
    if state_dim == 0 || num_actions == 0 {
        return Err(Error::config("env", "state_dim and num_actions must be positive"));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::config("env.noise_std", "must be finite and >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let weights = (0..num_actions).map(|_| draw(state_dim)).collect();
    let states = (0..horizon).map(|_| draw(state_dim)).collect();
    let noise = draw(horizon * num_actions).into_iter().map(|e: f64| e * noise_std).collect();
    Ok(LinearEnv {
        weights,
        states,
        noise,
        num_actions,
        noise_std,
    })
}

impl BanditEnv for LinearEnv {
    fn name(&self) -> &str {
        "synthetic_linear"
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn state_dim(&self) -> usize {
        self.weights[0].len()
    }

    fn horizon(&self) -> usize {
        self.states.len()
    }

    fn state(&self, t: usize) -> &[f64] {
        &self.states[t]
    }

    fn reward(&self, t: usize, action: usize) -> f64 {
        self.mean(t, action) + self.noise[t * self.num_actions + action]
    }

    fn expected_rewards(&self, t: usize) -> Option<Vec<f64>> {
        Some((0..self.num_actions).map(|a| self.mean(t, a)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn noiseless_single_arm_has_zero_regret() {
        let env = synthetic_linear_env(3, 1, 0.0, 50, 1).unwrap();
        for t in 0..50 {
            assert_eq!(env.reward(t, 0), env.optimal_reward(t).unwrap());
        }
    }

    #[test]
    fn replayable() {
        let a = synthetic_linear_env(4, 3, 0.5, 20, 9).unwrap();
        let b = synthetic_linear_env(4, 3, 0.5, 20, 9).unwrap();
        for t in 0..20 {
            assert_eq!(a.state(t), b.state(t));
            for k in 0..3 {
                assert_eq!(a.reward(t, k), b.reward(t, k));
            }
        }
    }

    #[test]
    fn random_policy_has_positive_regret() {
        let env = synthetic_linear_env(5, 2, 0.0, 1000, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let regret: f64 = (0..1000)
            .map(|t| env.optimal_reward(t).unwrap() - env.reward(t, rng.random_range(0..2)))
            .sum();
        assert!(regret > 0.0);
    }
}
