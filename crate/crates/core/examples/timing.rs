//! Per-step agent time: constant for the subspace EKF, growing for
//! neural-linear with unbounded memory.
//!
//! cargo run --release --example timing

use std::sync::Arc;

use subkalman::agents::{Agent, EkfTsAgent, EkfTsConfig, NeuralLinearAgent, NeuralLinearConfig};
use subkalman::environments::{classification_env, synthetic_classification_dataset, TeacherConfig};
use subkalman::harness::{online_eval, timing_profile, EvalOptions};
use subkalman::reward_models::{HeadMode, MlpArchitecture};

fn main() -> subkalman::Result<()> {
    let data = Arc::new(synthetic_classification_dataset(&TeacherConfig::default())?);
    let env = classification_env(data, Some(0));
    let arch = MlpArchitecture::new(9, vec![50], 7, HeadMode::MultiHead)?;
    let opts = EvalOptions {
        horizon: 2000,
        warmup_per_arm: 20,
        timing: true,
    };
    let ekf_cfg = EkfTsConfig {
        dim: 50,
        ..Default::default()
    };
    let agents: Vec<Box<dyn Agent>> = vec![
        Box::new(EkfTsAgent::new(arch.clone(), ekf_cfg, 1)?),
        Box::new(NeuralLinearAgent::new(arch, NeuralLinearConfig::default(), 1)?),
    ];
    for mut agent in agents {
        let name = agent.name().to_string();
        let trace = online_eval(agent.as_mut(), &env, &opts, 0, &name)?;
        let p = timing_profile(&trace)?;
        println!(
            "{:14} init {:7} µs, mean step {:8.1} µs, slope {:+.4} ± {:.4} µs/step",
            name,
            trace.init_micros,
            p.mean_us,
            p.slope_us,
            p.slope_stderr
        );
    }
    Ok(())
}
