//! Linear Thompson sampling against a uniform-random policy on a synthetic
//! linear bandit.
//!
//! cargo run --release --example linear_bandit

use subkalman::agents::{LinearTsAgent, RandomAgent};
use subkalman::bayes_linear::NigPrior;
use subkalman::environments::synthetic_linear_env;
use subkalman::harness::{online_eval, regret, EvalOptions};

fn main() -> subkalman::Result<()> {
    let env = synthetic_linear_env(8, 4, 0.1, 2000, 7)?;
    let opts = EvalOptions {
        horizon: 2000,
        warmup_per_arm: 20,
        timing: false,
    };

    let mut ts = LinearTsAgent::new(8, 4, NigPrior::default())?;
    let mut random = RandomAgent::new(4);
    let ts_trace = online_eval(&mut ts, &env, &opts, 1, "linear_ts")?;
    let rnd_trace = online_eval(&mut random, &env, &opts, 1, "random")?;

    println!("linear TS: reward {:8.1}, regret {:7.1}", ts_trace.cumulative_reward, regret(&ts_trace)?);
    println!("random:    reward {:8.1}, regret {:7.1}", rnd_trace.cumulative_reward, regret(&rnd_trace)?);

    let est = &ts.beliefs()[0].mean;
    let truth = &env.weights()[0];
    println!("arm 0 weights, posterior mean vs truth:");
    for (e, w) in est.iter().zip(truth) {
        println!("  {e:+.3}  {w:+.3}");
    }
    Ok(())
}
