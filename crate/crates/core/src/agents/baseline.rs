use std::sync::Arc;

use rand::{Rng, RngCore};

use super::Agent;
use crate::environments::BanditEnv;
use crate::linalg::argmax;
use crate::{Error, Observation, Result};

/// Uniformly random arm every step.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    num_actions: usize,
}

impl RandomAgent {
    pub fn new(num_actions: usize) -> Self {
        Self { num_actions }
    }
}

impl Agent for RandomAgent {
    fn name(&self) -> &str {
        "random"
    }

    fn init_belief(&mut self, _warmup: &[Observation]) -> Result<()> {
        Ok(())
    }

    fn choose_action(&self, _state: &[f64], rng: &mut dyn RngCore) -> Result<usize> {
        Ok(rng.random_range(0..self.num_actions))
    }

    fn update_belief(&mut self, _obs: &Observation) -> Result<()> {
        Ok(())
    }
}

/// Reads the environment's noise-free rewards and plays the best arm.
///
/// The step counter starts at the warmup length and advances once per
/// update, mirroring the harness's protocol.
pub struct OracleAgent {
    env: Arc<dyn BanditEnv>,
    t: usize,
}

impl OracleAgent {
    pub fn new(env: Arc<dyn BanditEnv>) -> Self {
        Self { env, t: 0 }
    }
}

impl Agent for OracleAgent {
    fn name(&self) -> &str {
        "oracle"
    }

    fn init_belief(&mut self, warmup: &[Observation]) -> Result<()> {
        self.t = warmup.len();
        Ok(())
    }

    fn choose_action(&self, _state: &[f64], _rng: &mut dyn RngCore) -> Result<usize> {
        let means = self.env.expected_rewards(self.t).ok_or(Error::MissingOracle { t: self.t })?;
        Ok(argmax(&means))
    }

    fn update_belief(&mut self, _obs: &Observation) -> Result<()> {
        self.t += 1;
        Ok(())
    }
}
