//! The `subkalman` command line: `run`, `compare` and `sweep-dim`.
//!
//! Exit codes: 0 on success, 2 for config or validation errors, 3 for data
//! errors, 4 for anything that fails at runtime.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::agents::EkfMode;
use crate::config::{AgentKind, AgentSpec, Experiment, ExperimentConfig};
use crate::environments::{parse_ratings, read_csv_dataset, MovieLensSim, TabularDataset};
use crate::harness::{mean_std, write_summary_csv, SummaryRow, TrialSummary};
use crate::subspace::SubspaceKind;
use crate::svg::{grouped_bar_chart, line_chart, Bar, Series};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

/// Environment variable capping the number of trial worker threads.
pub const THREADS_VAR: &str = "SUBKALMAN_THREADS";

#[derive(Debug, Parser)]
#[command(name = "subkalman", version, about = "Neural contextual bandit benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every configured agent and write traces plus a summary CSV.
    Run(CommonArgs),
    /// Run two or more agents on shared env seeds and chart the results.
    Compare(CommonArgs),
    /// Sweep the subspace dimension of an `ekf_ts` agent.
    SweepDim(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated subspace dimensions, e.g. `10,50,100`.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::Dimension(_) | Error::HorizonTooShort { .. } | Error::Rank { .. } => EXIT_CONFIG,
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::Schema { .. }
        | Error::LabelOutOfRange { .. }
        | Error::EmptyDataset => EXIT_DATA,
        _ => EXIT_RUNTIME,
    }
}

/// Parse `args` (including the program name), run the command and return
/// the process exit code. Messages go to stdout and errors to stderr.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&cli.command) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: &Command) -> Result<Vec<String>> {
    let pool = thread_pool()?;
    let work = || match cmd {
        Command::Run(a) => cmd_run(&load(a)?),
        Command::Compare(a) => cmd_compare(&load(a)?),
        Command::SweepDim(a) => {
            let mut cfg = load(&a.common)?;
            if let Some(d) = &a.dims {
                cfg.dims = d.clone();
            }
            cmd_sweep_dim(&cfg)
        }
    };
    match pool {
        Some(pool) => pool.install(work),
        None => work(),
    }
}

fn thread_pool() -> Result<Option<rayon::ThreadPool>> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::config(THREADS_VAR, format!("expected a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Some)
        .map_err(|e| Error::config(THREADS_VAR, e.to_string()))
}

/// Read the config and apply command-line overrides.
pub fn load(args: &CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_traces(dir: &Path, label: &str, summary: &TrialSummary) -> Result<()> {
    let dir = dir.join("traces").join(label);
    create_dir(&dir)?;
    for trace in &summary.traces {
        let path = dir.join(format!("trial_{}.jsonl", trace.seed));
        fs::write(&path, trace.to_jsonl()).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn summary_line(label: &str, summary: &TrialSummary) -> String {
    let mut line = format!(
        "{label}: cumulative reward {:.3} ± {:.3} over {} trial(s)",
        summary.mean_reward,
        summary.std_reward,
        summary.traces.len()
    );
    if let Some(r) = summary.mean_regret {
        line.push_str(&format!(", regret {r:.3}"));
    }
    line
}

/// Run every agent in `cfg`; returns the agents' labels and summaries.
fn run_all(exp: &Experiment) -> Result<Vec<(String, TrialSummary)>> {
    exp.config
        .agent_specs()
        .iter()
        .map(|spec| Ok((spec.label(), exp.run_agent(spec)?)))
        .collect()
}

fn write_run_outputs(exp: &Experiment, results: &[(String, TrialSummary)]) -> Result<()> {
    let out = &exp.config.output_dir;
    create_dir(out)?;
    let mut rows = Vec::new();
    for (label, summary) in results {
        write_traces(out, label, summary)?;
        rows.extend(summary.traces.iter().map(|t| SummaryRow::from_trace(label, exp.env.name(), t)));
    }
    write_summary_csv(&out.join("summary.csv"), &rows)
}

pub fn cmd_run(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    let exp = Experiment::prepare(cfg.clone())?;
    let results = run_all(&exp)?;
    write_run_outputs(&exp, &results)?;
    Ok(results.iter().map(|(l, s)| summary_line(l, s)).collect())
}

pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    if cfg.agent_specs().len() < 2 {
        return Err(Error::config("agents", "compare needs at least two agents"));
    }
    let exp = Experiment::prepare(cfg.clone())?;
    let results = run_all(&exp)?;
    write_run_outputs(&exp, &results)?;
    let names: Vec<String> = results.iter().map(|(l, _)| l.clone()).collect();
    let groups: Vec<(String, Vec<Bar>)> = results
        .iter()
        .map(|(label, s)| {
            let bar = Bar {
                label: label.clone(),
                value: s.mean_reward,
                err: s.std_reward,
            };
            (label.clone(), vec![bar])
        })
        .collect();
    let title = format!("Cumulative reward on {} (T = {})", exp.env.name(), cfg.horizon);
    let svg = grouped_bar_chart(&title, "cumulative reward", &names, &groups);
    let path = cfg.output_dir.join("compare.svg");
    fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
    Ok(results.iter().map(|(l, s)| summary_line(l, s)).collect())
}

/// One row of the dimension-sweep CSV.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepRow {
    pub d: usize,
    pub kind: String,
    pub mean: f64,
    pub std: f64,
}

fn kind_label(kind: SubspaceKind) -> &'static str {
    match kind {
        SubspaceKind::Svd => "svd",
        SubspaceKind::Random => "random",
        SubspaceKind::Custom => "custom",
    }
}

/// Run the single `ekf_ts` agent of `cfg` at every `d` in `cfg.dims`, once
/// with an SVD subspace and once with a random one.
pub fn sweep_dim(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let specs = cfg.agent_specs();
    let [spec] = specs.as_slice() else {
        return Err(Error::config("agents", "sweep-dim needs exactly one ekf_ts agent"));
    };
    let AgentKind::EkfTs { hidden, head_mode, cfg: ekf } = &spec.kind else {
        return Err(Error::config("agent.kind", "sweep-dim needs an ekf_ts agent"));
    };
    if !matches!(ekf.mode, EkfMode::SubspaceFull | EkfMode::SubspaceDiag) {
        return Err(Error::config("agent.mode", "sweep-dim needs a subspace mode"));
    }
    if cfg.dims.is_empty() {
        return Err(Error::config("dims", "no subspace dimensions given"));
    }
    let exp = Experiment::prepare(cfg.clone())?;
    let mut rows = Vec::new();
    for &d in &cfg.dims {
        for kind in [SubspaceKind::Svd, SubspaceKind::Random] {
            let mut ekf = ekf.clone();
            ekf.dim = d;
            ekf.subspace = kind;
            let spec = AgentSpec::named(
                &format!("ekf_{}_{d}", kind_label(kind)),
                AgentKind::EkfTs {
                    hidden: hidden.clone(),
                    head_mode: *head_mode,
                    cfg: ekf,
                },
            );
            let summary = exp.run_agent(&spec)?;
            rows.push(SweepRow {
                d,
                kind: kind_label(kind).to_string(),
                mean: summary.mean_reward,
                std: summary.std_reward,
            });
        }
    }
    Ok(rows)
}

pub fn cmd_sweep_dim(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    let rows = sweep_dim(cfg)?;
    let out = &cfg.output_dir;
    create_dir(out)?;
    let path = out.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
    for row in &rows {
        w.serialize(row).map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let series: Vec<Series> = ["svd", "random"]
        .iter()
        .map(|k| {
            let pts: Vec<&SweepRow> = rows.iter().filter(|r| r.kind == *k).collect();
            Series {
                name: k.to_string(),
                points: pts.iter().map(|r| (r.d as f64, r.mean)).collect(),
                errs: Some(pts.iter().map(|r| r.std).collect()),
            }
        })
        .collect();
    let svg = line_chart("Reward vs subspace dimension", "d", "cumulative reward", &series);
    let path = out.join("sweep.svg");
    fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
    Ok(rows
        .iter()
        .map(|r| format!("d={} {}: cumulative reward {:.3} ± {:.3}", r.d, r.kind, r.mean, r.std))
        .collect())
}

/// What `ingest_dataset` should parse a file as.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Csv { num_actions: Option<usize> },
    MovieLens { num_movies: usize, rank: usize },
}

#[derive(Debug, Clone)]
pub enum Dataset {
    Tabular(TabularDataset),
    MovieLens(MovieLensSim),
}

impl Dataset {
    /// `(rows, columns)`: samples × features for tabular data, rating
    /// triples × 4 for MovieLens.
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Dataset::Tabular(d) => (d.len(), d.state_dim()),
            Dataset::MovieLens(s) => (s.num_triples, 4),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Dataset::Tabular(d) => format!(
                "{} rows, {} feature columns, {} classes",
                d.len(),
                d.state_dim(),
                d.num_actions
            ),
            Dataset::MovieLens(s) => format!(
                "{} ratings, {} users, {} movies kept",
                s.num_triples,
                s.num_users(),
                s.num_movies()
            ),
        }
    }
}

pub fn ingest_dataset(path: &Path, kind: DatasetKind) -> Result<Dataset> {
    Ok(match kind {
        DatasetKind::Csv { num_actions } => Dataset::Tabular(read_csv_dataset(path, num_actions)?),
        DatasetKind::MovieLens { num_movies, rank } => {
            Dataset::MovieLens(MovieLensSim::from_ratings(&parse_ratings(path)?, num_movies, rank)?)
        }
    })
}

/// Mean and standard deviation of each agent's cumulative reward.
pub fn reward_table(results: &[(String, TrialSummary)]) -> Vec<(String, f64, f64)> {
    results
        .iter()
        .map(|(l, s)| {
            let rewards: Vec<f64> = s.traces.iter().map(|t| t.cumulative_reward).collect();
            let (m, sd) = mean_std(&rewards);
            (l.clone(), m, sd)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_codes() {
        assert_eq!(exit_code(&Error::config("x", "y")), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::dim("d")), EXIT_CONFIG);
        assert_eq!(
            exit_code(&Error::Parse {
                line: 1,
                message: "m".into()
            }),
            EXIT_DATA
        );
        assert_eq!(exit_code(&Error::SingularPrior), EXIT_RUNTIME);
    }

    #[test]
    fn parses_dims_list() {
        let cli = Cli::try_parse_from(["subkalman", "sweep-dim", "--config", "c.json", "--dims", "10,50,100"]).unwrap();
        match cli.command {
            Command::SweepDim(a) => assert_eq!(a.dims, Some(vec![10, 50, 100])),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_subcommand_is_a_config_error() {
        assert_eq!(run_cli(["subkalman", "frobnicate"]), EXIT_CONFIG);
    }
}
