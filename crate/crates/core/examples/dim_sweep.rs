//! Reward against subspace dimension for SVD and random bases.
//!
//! cargo run --release --example dim_sweep

use subkalman::cli::sweep_dim;
use subkalman::config::ExperimentConfig;

const CONFIG: &str = r#"{
  "version": 1,
  "env": {"kind": "synthetic_classification", "num_samples": 2000, "seed": 0},
  "agent": {"kind": "ekf_ts", "mode": "subspace_full"},
  "horizon": 1500,
  "warmup_per_arm": 20,
  "trials": 3,
  "seed": 0,
  "dims": [5, 20, 50, 100]
}"#;

fn main() -> subkalman::Result<()> {
    let cfg = ExperimentConfig::from_json(CONFIG)?;
    println!("{:>5} {:>7} {:>9} {:>7}", "d", "kind", "mean", "std");
    for row in sweep_dim(&cfg)? {
        println!("{:>5} {:>7} {:>9.1} {:>7.1}", row.d, row.kind, row.mean, row.std);
    }
    Ok(())
}
