//! LiM2: bounded-memory neural-linear with prior transfer by projected
//! gradient descent.
//!
//! A small memory leaves each arm with fewer observations than features,
//! so the example uses an informative prior instead of the flat default.
//!
//! cargo run --release --example lim2

use std::sync::Arc;

use subkalman::agents::{Lim2Agent, Lim2Config};
use subkalman::bayes_linear::NigPrior;
use subkalman::environments::{classification_env, synthetic_classification_dataset, TeacherConfig};
use subkalman::harness::{online_eval, EvalOptions};
use subkalman::linalg::min_eigenvalue;
use subkalman::reward_models::{HeadMode, MlpArchitecture, SgdConfig};

fn main() -> subkalman::Result<()> {
    let data = Arc::new(synthetic_classification_dataset(&TeacherConfig {
        num_samples: 1000,
        ..Default::default()
    })?);
    let env = classification_env(data, Some(4));
    let arch = MlpArchitecture::new(9, vec![20], 7, HeadMode::MultiHead)?;
    let cfg = Lim2Config {
        memory: 100,
        prior: NigPrior {
            cov_scale: 4.0,
            ..Default::default()
        },
        sgd: SgdConfig {
            epochs: 20,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut agent = Lim2Agent::new(arch, cfg, 8)?;
    let trace = online_eval(
        &mut agent,
        &env,
        &EvalOptions {
            horizon: 600,
            warmup_per_arm: 10,
            timing: false,
        },
        2,
        "lim2",
    )?;
    println!("reward {:.0} over {} steps", trace.cumulative_reward, trace.records.len());
    println!("memory holds {} observations", agent.memory_len());
    for (a, cov) in agent.prior_covs().iter().enumerate() {
        println!("arm {a}: prior trace {:9.3}, min eigenvalue {:+.2e}", cov.trace(), min_eigenvalue(cov));
    }
    Ok(())
}
