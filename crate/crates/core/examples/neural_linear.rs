//! Neural-linear Thompson sampling with unbounded and bounded memory.
//!
//! With a bounded memory the flat default prior leaves the per-arm
//! regressions underdetermined, so the bounded runs are shown with both the
//! default and an informative prior.
//!
//! cargo run --release --example neural_linear

use std::sync::Arc;

use subkalman::agents::{NeuralLinearAgent, NeuralLinearConfig};
use subkalman::bayes_linear::NigPrior;
use subkalman::environments::{classification_env, synthetic_classification_dataset, TeacherConfig};
use subkalman::harness::{online_eval, EvalOptions};
use subkalman::reward_models::{HeadMode, MlpArchitecture};

fn main() -> subkalman::Result<()> {
    let data = Arc::new(synthetic_classification_dataset(&TeacherConfig::default())?);
    let env = classification_env(data, Some(1));
    let arch = MlpArchitecture::new(9, vec![50], 7, HeadMode::MultiHead)?;
    let opts = EvalOptions {
        horizon: 1500,
        warmup_per_arm: 20,
        timing: false,
    };
    let informative = NigPrior {
        cov_scale: 4.0,
        ..Default::default()
    };
    for (cap, prior) in [
        (None, NigPrior::default()),
        (Some(300), NigPrior::default()),
        (Some(300), informative),
    ] {
        let scale = prior.cov_scale;
        let cfg = NeuralLinearConfig {
            memory_cap: cap,
            prior,
            ..Default::default()
        };
        let mut agent = NeuralLinearAgent::new(arch.clone(), cfg, 2)?;
        let trace = online_eval(&mut agent, &env, &opts, 3, "neural_linear")?;
        println!(
            "memory {:>9}, prior scale {scale:.0e}: reward {:6.0}, {} observations kept",
            cap.map_or("unbounded".to_string(), |m| m.to_string()),
            trace.cumulative_reward,
            agent.memory_len()
        );
    }
    Ok(())
}
