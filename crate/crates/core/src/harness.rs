//! The online evaluation loop, multi-trial aggregation, regret and
//! per-step timing.
//!
//! A run pulls every arm in round-robin order for the warmup period,
//! hands the collected data to the agent, then alternates choose, reward
//! and update until the horizon. All `T` rewards count towards the
//! cumulative total; the post-warmup share is reported separately.

use std::hash::{DefaultHasher, Hash, Hasher};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::Agent;
use crate::environments::{warmup_schedule, BanditEnv};
use crate::{derive_seed, Error, Observation, Result};

/// Stream index used to derive the agent's action-selection RNG from the
/// trial seed.
pub const AGENT_RNG_STREAM: u64 = 0x5EED_A6E1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based step index.
    #[serde(rename = "t")]
    pub t: usize,
    #[serde(rename = "a")]
    pub action: usize,
    #[serde(rename = "y")]
    pub reward: f64,
    #[serde(rename = "opt")]
    pub optimal_reward: Option<f64>,
    /// Agent time for the step (choose plus update); 0 when timing is off
    /// and during warmup.
    #[serde(rename = "us")]
    pub step_micros: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<StepRecord>,
    pub cumulative_reward: f64,
    pub cumulative_reward_post_warmup: f64,
    pub warmup_len: usize,
    pub seed: u64,
    pub fingerprint: String,
    /// Hash of every state served, for checking that agents saw the same
    /// context sequence.
    pub state_digest: u64,
    /// Agent time spent in `init_belief`.
    pub init_micros: u64,
}

impl RunTrace {
    pub fn post_warmup(&self) -> &[StepRecord] {
        &self.records[self.warmup_len.min(self.records.len())..]
    }

    /// One JSON object per line: `{"t","a","y","opt","us"}`.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_jsonl(&mut out).expect("writing to memory cannot fail");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub horizon: usize,
    pub warmup_per_arm: usize,
    /// Record wall-clock agent time per step. Off by default so that traces
    /// are byte-reproducible.
    pub timing: bool,
}

/// Run one episode of `horizon` steps.
pub fn online_eval(
    agent: &mut dyn Agent,
    env: &dyn BanditEnv,
    opts: &EvalOptions,
    seed: u64,
    fingerprint: &str,
) -> Result<RunTrace> {
    let schedule = warmup_schedule(env.num_actions(), opts.warmup_per_arm);
    let tau = schedule.len();
    if opts.horizon <= tau {
        return Err(Error::HorizonTooShort {
            horizon: opts.horizon,
            warmup: tau,
        });
    }
    if opts.horizon > env.horizon() {
        return Err(Error::config(
            "horizon",
            format!("{} exceeds the {} steps the environment provides", opts.horizon, env.horizon()),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, AGENT_RNG_STREAM));
    let mut digest = DefaultHasher::new();
    let mut records = Vec::with_capacity(opts.horizon);
    let mut warmup = Vec::with_capacity(tau);
    let mut total = 0.0;

    for (t, &a) in schedule.iter().enumerate() {
        let state = env.state(t);
        hash_state(&mut digest, state);
        let y = env.reward(t, a);
        total += y;
        records.push(StepRecord {
            t: t + 1,
            action: a,
            reward: y,
            optimal_reward: env.optimal_reward(t),
            step_micros: 0,
        });
        warmup.push(Observation::new(state.to_vec(), a, y));
    }

    let clock = Instant::now();
    agent.init_belief(&warmup)?;
    let init_micros = if opts.timing { clock.elapsed().as_micros() as u64 } else { 0 };

    let mut post = 0.0;
    for t in tau..opts.horizon {
        let state = env.state(t);
        hash_state(&mut digest, state);
        let clock = Instant::now();
        let a = agent.choose_action(state, &mut rng)?;
        let mut elapsed = clock.elapsed();
        if a >= env.num_actions() {
            return Err(Error::ActionOutOfRange {
                action: a,
                num_actions: env.num_actions(),
            });
        }
        let y = env.reward(t, a);
        let clock = Instant::now();
        agent.update_belief(&Observation::new(state.to_vec(), a, y))?;
        elapsed += clock.elapsed();
        total += y;
        post += y;
        records.push(StepRecord {
            t: t + 1,
            action: a,
            reward: y,
            optimal_reward: env.optimal_reward(t),
            step_micros: if opts.timing { elapsed.as_micros() as u64 } else { 0 },
        });
    }

    Ok(RunTrace {
        records,
        cumulative_reward: total,
        cumulative_reward_post_warmup: post,
        warmup_len: tau,
        seed,
        fingerprint: fingerprint.to_string(),
        state_digest: digest.finish(),
        init_micros,
    })
}

fn hash_state(h: &mut DefaultHasher, state: &[f64]) {
    for v in state {
        v.to_bits().hash(h);
    }
}

/// Cumulative `optimal − reward` over the post-warmup steps.
pub fn regret(trace: &RunTrace) -> Result<f64> {
    trace
        .post_warmup()
        .iter()
        .map(|r| r.optimal_reward.map(|o| o - r.reward).ok_or(Error::MissingOracle { t: r.t }))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingProfile {
    pub mean_us: f64,
    /// Least-squares slope of step time against `t`, in µs per step.
    pub slope_us: f64,
    /// Standard error of the slope.
    pub slope_stderr: f64,
    pub n: usize,
}

/// Ordinary least squares fit `y ≈ α + β x`; returns `(β, se(β))`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return (0.0, 0.0);
    }
    let beta = sxy / sxx;
    let alpha = my - beta * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - alpha - beta * x).powi(2)).sum();
    let se = if xs.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (beta, se)
}

/// Mean and trend of per-step agent time over the post-warmup steps.
pub fn timing_profile(trace: &RunTrace) -> Result<TimingProfile> {
    let recs = trace.post_warmup();
    if recs.len() < 10 {
        return Err(Error::TooFewRecords {
            needed: 10,
            got: recs.len(),
        });
    }
    let xs: Vec<f64> = recs.iter().map(|r| r.t as f64).collect();
    let ys: Vec<f64> = recs.iter().map(|r| r.step_micros as f64).collect();
    let (slope, se) = ols_slope(&xs, &ys);
    Ok(TimingProfile {
        mean_us: ys.iter().sum::<f64>() / ys.len() as f64,
        slope_us: slope,
        slope_stderr: se,
        n: recs.len(),
    })
}

/// Like [`timing_profile`], but the trend is fit to mean step time over
/// consecutive windows of `window` post-warmup steps (a trailing partial
/// window is dropped). Agents with periodic heavy steps, such as retraining
/// every `window` steps, get a well-specified standard error this way.
pub fn windowed_timing_profile(trace: &RunTrace, window: usize) -> Result<TimingProfile> {
    if window == 0 {
        return Err(Error::config("window", "must be positive"));
    }
    let recs = trace.post_warmup();
    let blocks: Vec<&[StepRecord]> = recs.chunks_exact(window).collect();
    if blocks.len() < 3 {
        return Err(Error::TooFewRecords {
            needed: 3 * window,
            got: recs.len(),
        });
    }
    let xs: Vec<f64> = blocks
        .iter()
        .map(|b| b.iter().map(|r| r.t as f64).sum::<f64>() / window as f64)
        .collect();
    let ys: Vec<f64> = blocks
        .iter()
        .map(|b| b.iter().map(|r| r.step_micros as f64).sum::<f64>() / window as f64)
        .collect();
    let (slope, se) = ols_slope(&xs, &ys);
    Ok(TimingProfile {
        mean_us: ys.iter().sum::<f64>() / ys.len() as f64,
        slope_us: slope,
        slope_stderr: se,
        n: blocks.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub mean_reward: f64,
    /// Sample standard deviation (`n − 1`); 0 for a single trial.
    pub std_reward: f64,
    pub mean_regret: Option<f64>,
    pub traces: Vec<RunTrace>,
}

pub fn summarize(traces: Vec<RunTrace>) -> TrialSummary {
    let rewards: Vec<f64> = traces.iter().map(|t| t.cumulative_reward).collect();
    let (mean_reward, std_reward) = mean_std(&rewards);
    let regrets: Option<Vec<f64>> = traces.iter().map(|t| regret(t).ok()).collect();
    let mean_regret = regrets.filter(|r| !r.is_empty()).map(|r| r.iter().sum::<f64>() / r.len() as f64);
    TrialSummary {
        mean_reward,
        std_reward,
        mean_regret,
        traces,
    }
}

/// Mean and sample standard deviation; the deviation of fewer than two
/// values is 0.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Run `n_trials` independent trials with seeds `base_seed + i`.
///
/// `run` must derive everything random from the seed it is given; parallel
/// execution then returns exactly the serial results, in trial order.
pub fn multi_trial<F>(n_trials: usize, base_seed: u64, parallel: bool, run: F) -> Result<TrialSummary>
where
    F: Fn(u64) -> Result<RunTrace> + Sync,
{
    if n_trials == 0 {
        return Err(Error::config("trials", "must be at least 1"));
    }
    let seeds: Vec<u64> = (0..n_trials as u64).map(|i| base_seed.wrapping_add(i)).collect();
    let traces: Vec<RunTrace> = if parallel {
        seeds.par_iter().map(|&s| run(s)).collect::<Result<_>>()?
    } else {
        seeds.iter().map(|&s| run(s)).collect::<Result<_>>()?
    };
    Ok(summarize(traces))
}

/// One row of the per-trial summary CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub agent: String,
    pub env: String,
    pub seed: u64,
    pub cum_reward: f64,
    pub regret: Option<f64>,
    pub mean_us: f64,
    pub slope_us: f64,
    pub cum_reward_post_warmup: f64,
}

impl SummaryRow {
    pub fn from_trace(agent: &str, env: &str, trace: &RunTrace) -> Self {
        let timing = timing_profile(trace).ok();
        Self {
            agent: agent.to_string(),
            env: env.to_string(),
            seed: trace.seed,
            cum_reward: trace.cumulative_reward,
            regret: regret(trace).ok(),
            mean_us: timing.map_or(0.0, |p| p.mean_us),
            slope_us: timing.map_or(0.0, |p| p.slope_us),
            cum_reward_post_warmup: trace.cumulative_reward_post_warmup,
        }
    }
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
