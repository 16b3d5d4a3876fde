//! Bandit environments.
//!
//! Every environment is built for a fixed horizon from a seed and then
//! indexed by the step `t` (0-based), so two traversals with the same seed
//! see identical states and rewards whatever the agent does.

mod classification;
mod movielens;
mod synthetic;

pub use classification::{
    classification_env, read_csv_dataset, synthetic_classification_dataset, ClassificationEnv, TabularDataset,
    TeacherConfig,
};
pub use movielens::{movielens_env, parse_ratings, MovieLensEnv, MovieLensSim, Rating};
pub use synthetic::{synthetic_linear_env, LinearEnv};

pub trait BanditEnv: Send + Sync {
    fn name(&self) -> &str;
    fn num_actions(&self) -> usize;
    fn state_dim(&self) -> usize;
    /// Number of steps the environment can serve.
    fn horizon(&self) -> usize;
    fn state(&self, t: usize) -> &[f64];
    fn reward(&self, t: usize, action: usize) -> f64;
    /// Noise-free mean reward of every arm at step `t`, when known.
    fn expected_rewards(&self, t: usize) -> Option<Vec<f64>>;

    /// Best achievable expected reward at step `t`.
    fn optimal_reward(&self, t: usize) -> Option<f64> {
        self.expected_rewards(t)
            .map(|r| r.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }
}

/// Round-robin warmup: `[0, 1, …, N_a − 1]` repeated `per_arm` times.
pub fn warmup_schedule(num_actions: usize, per_arm: usize) -> Vec<usize> {
    (0..per_arm).flat_map(|_| 0..num_actions).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warmup_is_round_robin() {
        assert_eq!(warmup_schedule(3, 2), vec![0, 1, 2, 0, 1, 2]);
        assert_eq!(warmup_schedule(7, 20).len(), 140);
        assert!(warmup_schedule(4, 0).is_empty());
    }
}
