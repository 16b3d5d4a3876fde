//! Several agents on shared environment seeds via the experiment config,
//! with a bar chart written to `out/example_compare.svg`.
//!
//! cargo run --release --example compare

use subkalman::config::{Experiment, ExperimentConfig};
use subkalman::svg::{grouped_bar_chart, Bar};

const CONFIG: &str = r#"{
  "version": 1,
  "env": {"kind": "synthetic_classification", "num_samples": 2000, "seed": 0},
  "agents": [
    {"kind": "ekf_ts", "name": "ekf_svd", "dim": 50},
    {"kind": "ekf_ts", "name": "ekf_diag", "mode": "diag_space"},
    {"kind": "neural_linear"},
    {"kind": "linear_ts"},
    {"kind": "random"}
  ],
  "horizon": 1500,
  "warmup_per_arm": 20,
  "trials": 3,
  "seed": 0
}"#;

fn main() -> subkalman::Result<()> {
    let exp = Experiment::prepare(ExperimentConfig::from_json(CONFIG)?)?;
    let mut names = Vec::new();
    let mut groups = Vec::new();
    for spec in exp.config.agent_specs() {
        let summary = exp.run_agent(&spec)?;
        println!("{:12} {:7.1} ± {:5.1}", spec.label(), summary.mean_reward, summary.std_reward);
        let digests: Vec<u64> = summary.traces.iter().map(|t| t.state_digest).collect();
        println!("{:12} state digests {digests:x?}", "");
        names.push(spec.label());
        groups.push((
            spec.label(),
            vec![Bar {
                label: spec.label(),
                value: summary.mean_reward,
                err: summary.std_reward,
            }],
        ));
    }
    std::fs::create_dir_all("out").map_err(|e| subkalman::Error::Io {
        path: "out".into(),
        source: e,
    })?;
    let svg = grouped_bar_chart("Cumulative reward", "reward", &names, &groups);
    std::fs::write("out/example_compare.svg", svg).map_err(|e| subkalman::Error::Io {
        path: "out/example_compare.svg".into(),
        source: e,
    })?;
    println!("wrote out/example_compare.svg");
    Ok(())
}
