//! Subspace EKF Thompson sampling on a synthetic 7-class classification
//! bandit, with SVD and random bases side by side.
//!
//! cargo run --release --example subspace_ekf

use std::sync::Arc;

use subkalman::agents::{EkfMode, EkfTsAgent, EkfTsConfig};
use subkalman::environments::{classification_env, synthetic_classification_dataset, TeacherConfig};
use subkalman::harness::{online_eval, EvalOptions};
use subkalman::reward_models::{HeadMode, MlpArchitecture};
use subkalman::subspace::SubspaceKind;

fn main() -> subkalman::Result<()> {
    let data = Arc::new(synthetic_classification_dataset(&TeacherConfig::default())?);
    let env = classification_env(data, Some(3));
    let arch = MlpArchitecture::new(9, vec![50], 7, HeadMode::MultiHead)?;
    println!("network has {} parameters", arch.param_count());
    let opts = EvalOptions {
        horizon: 2000,
        warmup_per_arm: 20,
        timing: false,
    };

    for (kind, d) in [(SubspaceKind::Svd, 50), (SubspaceKind::Random, 50), (SubspaceKind::Svd, 10)] {
        let cfg = EkfTsConfig {
            mode: EkfMode::SubspaceFull,
            subspace: kind,
            dim: d,
            ..Default::default()
        };
        let mut agent = EkfTsAgent::new(arch.clone(), cfg, 11)?;
        let trace = online_eval(&mut agent, &env, &opts, 5, "ekf_ts")?;
        let sub = agent.subspace().expect("subspace mode");
        println!(
            "{kind:?} d={d:3}: reward {:6.0} / {}  (basis {}×{})",
            trace.cumulative_reward,
            opts.horizon,
            sub.full_dim(),
            sub.dim()
        );
    }
    Ok(())
}
