use nalgebra::DVector;
use rand::RngCore;

use super::{per_arm_nig_choice, Agent};
use crate::bayes_linear::{nig_step, NigBelief, NigPrior};
use crate::{Error, Observation, Result};

/// Per-arm Normal-Inverse-Gamma linear regression on the raw state, with
/// Thompson sampling over arms.
#[derive(Debug, Clone)]
pub struct LinearTsAgent {
    prior: NigPrior,
    state_dim: usize,
    beliefs: Vec<NigBelief>,
}

impl LinearTsAgent {
    pub fn new(state_dim: usize, num_actions: usize, prior: NigPrior) -> Result<Self> {
        prior.validate()?;
        if state_dim == 0 || num_actions == 0 {
            return Err(Error::config("agent", "state_dim and num_actions must be positive"));
        }
        Ok(Self {
            beliefs: vec![NigBelief::from_prior(state_dim, &prior); num_actions],
            prior,
            state_dim,
        })
    }

    pub fn beliefs(&self) -> &[NigBelief] {
        &self.beliefs
    }

    fn absorb(&mut self, obs: &Observation) -> Result<()> {
        let n = self.beliefs.len();
        let bel = self
            .beliefs
            .get_mut(obs.action)
            .ok_or(Error::ActionOutOfRange {
                action: obs.action,
                num_actions: n,
            })?;
        *bel = nig_step(bel, &DVector::from_column_slice(&obs.state), obs.reward)?;
        Ok(())
    }
}

impl Agent for LinearTsAgent {
    fn name(&self) -> &str {
        "linear_ts"
    }

    fn init_belief(&mut self, warmup: &[Observation]) -> Result<()> {
        let n = self.beliefs.len();
        self.beliefs = vec![NigBelief::from_prior(self.state_dim, &self.prior); n];
        for obs in warmup {
            self.absorb(obs)?;
        }
        Ok(())
    }

    fn choose_action(&self, state: &[f64], rng: &mut dyn RngCore) -> Result<usize> {
        if state.len() != self.state_dim {
            return Err(Error::shape("state length does not match the agent"));
        }
        Ok(per_arm_nig_choice(&self.beliefs, &DVector::from_column_slice(state), rng))
    }

    fn update_belief(&mut self, obs: &Observation) -> Result<()> {
        self.absorb(obs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes_linear::nig_batch;
    use crate::environments::{synthetic_linear_env, warmup_schedule, BanditEnv};
    use crate::linalg::max_abs_diff;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn warmup(env: &dyn BanditEnv, per_arm: usize) -> Vec<Observation> {
        warmup_schedule(env.num_actions(), per_arm)
            .into_iter()
            .enumerate()
            .map(|(t, a)| Observation::new(env.state(t).to_vec(), a, env.reward(t, a)))
            .collect()
    }

    #[test]
    fn warmup_counts_and_batch_equivalence() {
        let env = synthetic_linear_env(3, 2, 0.1, 100, 1).unwrap();
        let data = warmup(&env, 5);
        let mut agent = LinearTsAgent::new(3, 2, NigPrior::default()).unwrap();
        agent.init_belief(&data).unwrap();
        for (a, bel) in agent.beliefs().iter().enumerate() {
            assert_eq!(bel.a, 6.0 + 5.0 / 2.0);
            let rows: Vec<&Observation> = data.iter().filter(|o| o.action == a).collect();
            let xs = DMatrix::from_fn(rows.len(), 3, |i, j| rows[i].state[j]);
            let ys = DVector::from_fn(rows.len(), |i, _| rows[i].reward);
            let batch = nig_batch(&NigBelief::from_prior(3, &NigPrior::default()), &xs, &ys).unwrap();
            assert!((&bel.mean - &batch.mean).amax() < 1e-6);
            assert!(max_abs_diff(&bel.cov, &batch.cov) < 1e-8);
            assert!((bel.b - batch.b).abs() < 1e-6 * batch.b.max(1.0));
        }
    }

    #[test]
    fn learns_the_best_arm() {
        let env = synthetic_linear_env(2, 2, 0.0, 600, 2).unwrap();
        let mut agent = LinearTsAgent::new(2, 2, NigPrior::default()).unwrap();
        agent.init_belief(&warmup(&env, 250)).unwrap();
        for t in 500..600 {
            let means = env.expected_rewards(t).unwrap();
            let greedy = (0..2)
                .map(|a| agent.beliefs()[a].mean.dot(&DVector::from_column_slice(env.state(t))))
                .collect::<Vec<_>>();
            assert_eq!(crate::linalg::argmax(&greedy), crate::linalg::argmax(&means));
        }
    }

    #[test]
    fn update_touches_only_the_pulled_arm() {
        let mut agent = LinearTsAgent::new(2, 3, NigPrior::default()).unwrap();
        agent.init_belief(&[]).unwrap();
        let before = agent.beliefs().to_vec();
        agent.update_belief(&Observation::new(vec![1.0, -1.0], 1, 0.5)).unwrap();
        assert_eq!(agent.beliefs()[0], before[0]);
        assert_eq!(agent.beliefs()[2], before[2]);
        assert_ne!(agent.beliefs()[1], before[1]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(agent.choose_action(&[1.0, 2.0], &mut rng).unwrap() < 3);
    }
}
