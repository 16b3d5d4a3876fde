//! The MovieLens-100k recommender simulator with linear TS and the subspace
//! EKF.
//!
//! Needs `u.data`; fetch it with `python3 scripts/fetch_movielens.py`, then
//! cargo run --release --example movielens [path/to/u.data]

use std::path::PathBuf;
use std::sync::Arc;

use subkalman::agents::{EkfTsAgent, EkfTsConfig, LinearTsAgent, RandomAgent};
use subkalman::bayes_linear::NigPrior;
use subkalman::environments::{movielens_env, parse_ratings, MovieLensSim};
use subkalman::harness::{online_eval, regret, EvalOptions};
use subkalman::reward_models::{HeadMode, MlpArchitecture};

fn main() -> subkalman::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data/ml-100k/u.data"));
    let ratings = parse_ratings(&path)?;
    let sim = Arc::new(MovieLensSim::from_ratings(&ratings, 20, 20)?);
    println!(
        "{} ratings, {} users × {} movies, reconstruction error {:.1e}",
        sim.num_triples,
        sim.num_users(),
        sim.num_movies(),
        sim.reconstruction_error()
    );
    let env = movielens_env(sim, 3000, 1);
    let opts = EvalOptions {
        horizon: 3000,
        warmup_per_arm: 10,
        timing: false,
    };

    let mut linear = LinearTsAgent::new(20, 20, NigPrior::default())?;
    let arch = MlpArchitecture::new(20, vec![50], 20, HeadMode::MultiHead)?;
    let mut ekf = EkfTsAgent::new(
        arch,
        EkfTsConfig {
            dim: 100,
            ..Default::default()
        },
        3,
    )?;
    let mut random = RandomAgent::new(20);
    for (name, agent) in [
        ("linear_ts", &mut linear as &mut dyn subkalman::agents::Agent),
        ("ekf_ts", &mut ekf),
        ("random", &mut random),
    ] {
        let trace = online_eval(agent, &env, &opts, 2, name)?;
        println!("{name:10} reward {:8.1}  regret {:7.1}", trace.cumulative_reward, regret(&trace)?);
    }
    Ok(())
}
