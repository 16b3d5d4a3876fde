//! NeuralTS with full and diagonal precision matrices.
//!
//! cargo run --release --example neural_ts

use std::sync::Arc;

use subkalman::agents::{NeuralTsAgent, NeuralTsConfig};
use subkalman::environments::{classification_env, synthetic_classification_dataset, TeacherConfig};
use subkalman::harness::{online_eval, EvalOptions};
use subkalman::reward_models::{HeadMode, MlpArchitecture, SgdConfig};

fn main() -> subkalman::Result<()> {
    let data = Arc::new(synthetic_classification_dataset(&TeacherConfig {
        num_samples: 1000,
        ..Default::default()
    })?);
    let env = classification_env(data, Some(9));
    let arch = MlpArchitecture::new(9, vec![20], 7, HeadMode::OneHotBlock)?;
    println!("{} parameters", arch.param_count());
    for diagonal in [false, true] {
        let cfg = NeuralTsConfig {
            diagonal,
            sgd: SgdConfig {
                epochs: 20,
                ..Default::default()
            },
            ..Default::default()
        };
        let mut agent = NeuralTsAgent::new(arch.clone(), cfg, 6)?;
        let trace = online_eval(
            &mut agent,
            &env,
            &EvalOptions {
                horizon: 800,
                warmup_per_arm: 10,
                timing: false,
            },
            1,
            "neural_ts",
        )?;
        println!(
            "{:8} precision: reward {:4.0}, history {}",
            if diagonal { "diagonal" } else { "full" },
            trace.cumulative_reward,
            agent.history_len()
        );
    }
    Ok(())
}
