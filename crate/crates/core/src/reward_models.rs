//! MLP reward networks in three input layouts, with exact per-example
//! parameter gradients and a minibatch SGD trainer.
//!
//! Parameters live in one flat [`ParamVector`]. Layer `l` maps `fan_in`
//! inputs to `fan_out` outputs and occupies `fan_out * fan_in` weights
//! (row-major, one row per output unit) followed by `fan_out` biases;
//! layers are stored in order from the input to the head. Hidden layers use
//! ReLU, the head is linear.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::{Error, Observation, Result};

/// How the action enters the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadMode {
    /// Input is the state; one linear output per action.
    MultiHead,
    /// Input is the state concatenated with a one-hot action code; scalar output.
    Concat,
    /// Input has one state-sized block per action; the state is copied into
    /// the block of the evaluated action and every other block is zero.
    OneHotBlock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub state_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub num_actions: usize,
    pub head_mode: HeadMode,
}

/// Offsets of one dense layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSlice {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: usize,
    pub biases: usize,
}

impl LayerSlice {
    pub fn end(&self) -> usize {
        self.biases + self.fan_out
    }
}

impl MlpArchitecture {
    pub fn new(
        state_dim: usize,
        hidden_dims: Vec<usize>,
        num_actions: usize,
        head_mode: HeadMode,
    ) -> Result<Self> {
        let arch = Self {
            state_dim,
            hidden_dims,
            num_actions,
            head_mode,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.state_dim == 0 {
            return Err(Error::dim("state_dim must be positive"));
        }
        if self.num_actions == 0 {
            return Err(Error::dim("num_actions must be positive"));
        }
        if self.hidden_dims.iter().any(|&h| h == 0) {
            return Err(Error::dim("hidden layer widths must be positive"));
        }
        Ok(())
    }

    /// Width of the vector actually fed to the first layer.
    pub fn input_width(&self) -> usize {
        match self.head_mode {
            HeadMode::MultiHead => self.state_dim,
            HeadMode::Concat => self.state_dim + self.num_actions,
            HeadMode::OneHotBlock => self.state_dim * self.num_actions,
        }
    }

    pub fn output_width(&self) -> usize {
        match self.head_mode {
            HeadMode::MultiHead => self.num_actions,
            HeadMode::Concat | HeadMode::OneHotBlock => 1,
        }
    }

    pub fn layers(&self) -> Vec<LayerSlice> {
        let mut widths = Vec::with_capacity(self.hidden_dims.len() + 2);
        widths.push(self.input_width());
        widths.extend_from_slice(&self.hidden_dims);
        widths.push(self.output_width());
        let mut offset = 0;
        widths
            .windows(2)
            .map(|w| {
                let slice = LayerSlice {
                    fan_in: w[0],
                    fan_out: w[1],
                    weights: offset,
                    biases: offset + w[0] * w[1],
                };
                offset = slice.end();
                slice
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().last().map(LayerSlice::end).unwrap_or(0)
    }

    /// Width of the last hidden layer, if any.
    pub fn feature_dim(&self) -> Option<usize> {
        self.hidden_dims.last().copied()
    }

    fn check_action(&self, action: usize) -> Result<()> {
        if action >= self.num_actions {
            return Err(Error::ActionOutOfRange {
                action,
                num_actions: self.num_actions,
            });
        }
        Ok(())
    }

    fn check_shapes(&self, theta: &[f64], state: &[f64]) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(Error::shape(format!(
                "parameter vector has length {}, architecture needs {}",
                theta.len(),
                self.param_count()
            )));
        }
        if state.len() != self.state_dim {
            return Err(Error::shape(format!(
                "state has length {}, architecture expects {}",
                state.len(),
                self.state_dim
            )));
        }
        Ok(())
    }
}

/// Total number of weights and biases.
pub fn param_count(arch: &MlpArchitecture) -> usize {
    arch.param_count()
}

/// Flat network parameters in the layout described at module level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

const PARAM_MAGIC: &[u8; 4] = b"SKPV";
const PARAM_VERSION: u32 = 1;

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    /// 16-byte header (`SKPV`, version `u32`, length `u64`) followed by
    /// little-endian `f64` values.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(PARAM_MAGIC)?;
        w.write_all(&PARAM_VERSION.to_le_bytes())?;
        w.write_all(&(self.0.len() as u64).to_le_bytes())?;
        for v in &self.0 {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(16 + 8 * self.0.len());
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)
            .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
        if &header[0..4] != PARAM_MAGIC {
            return Err(Error::Format("bad magic, expected SKPV".into()));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != PARAM_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let len = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
        let mut values = Vec::with_capacity(len);
        let mut buf = [0u8; 8];
        for i in 0..len {
            r.read_exact(&mut buf)
                .map_err(|e| Error::Format(format!("truncated at value {i}: {e}")))?;
            values.push(f64::from_le_bytes(buf));
        }
        Ok(Self(values))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl std::ops::Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Glorot-uniform weights, zero biases; deterministic in `seed`.
pub fn init_params(arch: &MlpArchitecture, seed: u64) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = vec![0.0; arch.param_count()];
    for layer in arch.layers() {
        let limit = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite Glorot bound");
        for w in &mut theta[layer.weights..layer.biases] {
            *w = dist.sample(&mut rng);
        }
    }
    ParamVector(theta)
}

/// The vector fed to the first layer when evaluating `action` in `state`.
pub fn encode_input(state: &[f64], action: usize, arch: &MlpArchitecture) -> Result<Vec<f64>> {
    arch.check_action(action)?;
    if state.len() != arch.state_dim {
        return Err(Error::shape(format!(
            "state has length {}, architecture expects {}",
            state.len(),
            arch.state_dim
        )));
    }
    Ok(match arch.head_mode {
        HeadMode::MultiHead => state.to_vec(),
        HeadMode::Concat => {
            let mut x = Vec::with_capacity(arch.input_width());
            x.extend_from_slice(state);
            x.extend((0..arch.num_actions).map(|a| if a == action { 1.0 } else { 0.0 }));
            x
        }
        HeadMode::OneHotBlock => {
            let mut x = vec![0.0; arch.input_width()];
            let start = action * arch.state_dim;
            x[start..start + arch.state_dim].copy_from_slice(state);
            x
        }
    })
}

/// Forward pass that keeps every layer's post-activation values.
/// `acts[0]` is the input, `acts[L]` the (linear) output.
fn forward_trace(arch: &MlpArchitecture, theta: &[f64], input: Vec<f64>) -> Vec<Vec<f64>> {
    let layers = arch.layers();
    let last = layers.len() - 1;
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(input);
    for (l, layer) in layers.iter().enumerate() {
        let x = &acts[l];
        let w = &theta[layer.weights..layer.biases];
        let b = &theta[layer.biases..layer.end()];
        let mut out = Vec::with_capacity(layer.fan_out);
        for i in 0..layer.fan_out {
            let row = &w[i * layer.fan_in..(i + 1) * layer.fan_in];
            let mut s = b[i];
            for (wij, xj) in row.iter().zip(x.iter()) {
                s += wij * xj;
            }
            out.push(if l < last { s.max(0.0) } else { s });
        }
        acts.push(out);
    }
    acts
}

fn input_and_output_index(
    arch: &MlpArchitecture,
    state: &[f64],
    action: usize,
) -> Result<(Vec<f64>, usize)> {
    let x = encode_input(state, action, arch)?;
    let k = match arch.head_mode {
        HeadMode::MultiHead => action,
        _ => 0,
    };
    Ok((x, k))
}

/// Predicted mean reward `f(s, a; θ)`.
pub fn forward(arch: &MlpArchitecture, theta: &[f64], state: &[f64], action: usize) -> Result<f64> {
    arch.check_shapes(theta, state)?;
    let (x, k) = input_and_output_index(arch, state, action)?;
    let acts = forward_trace(arch, theta, x);
    Ok(acts.last().unwrap()[k])
}

/// Predicted mean reward for every action; a single pass in multi-head mode.
pub fn forward_all_actions(arch: &MlpArchitecture, theta: &[f64], state: &[f64]) -> Result<Vec<f64>> {
    arch.check_shapes(theta, state)?;
    match arch.head_mode {
        HeadMode::MultiHead => {
            let acts = forward_trace(arch, theta, state.to_vec());
            Ok(acts.into_iter().last().unwrap())
        }
        _ => (0..arch.num_actions)
            .map(|a| forward(arch, theta, state, a))
            .collect(),
    }
}

/// Value and reverse-mode gradient of `f(s, a; θ)` with respect to all
/// parameters, in the [`ParamVector`] layout.
pub fn value_and_grad(
    arch: &MlpArchitecture,
    theta: &[f64],
    state: &[f64],
    action: usize,
) -> Result<(f64, Vec<f64>)> {
    arch.check_shapes(theta, state)?;
    let (x, k) = input_and_output_index(arch, state, action)?;
    let acts = forward_trace(arch, theta, x);
    let value = acts.last().unwrap()[k];

    let layers = arch.layers();
    let mut grad = vec![0.0; arch.param_count()];
    // delta = ∂f/∂(pre-activation of the current layer's outputs)
    let mut delta = vec![0.0; arch.output_width()];
    delta[k] = 1.0;
    for (l, layer) in layers.iter().enumerate().rev() {
        let input = &acts[l];
        let (gw, rest) = grad[layer.weights..layer.end()].split_at_mut(layer.fan_out * layer.fan_in);
        for (i, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            rest[i] = d;
            let row = &mut gw[i * layer.fan_in..(i + 1) * layer.fan_in];
            for (g, xj) in row.iter_mut().zip(input.iter()) {
                *g = d * xj;
            }
        }
        if l == 0 {
            break;
        }
        let w = &theta[layer.weights..layer.biases];
        let mut prev = vec![0.0; layer.fan_in];
        for (i, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &w[i * layer.fan_in..(i + 1) * layer.fan_in];
            for (p, wij) in prev.iter_mut().zip(row.iter()) {
                *p += wij * d;
            }
        }
        // ReLU derivative of the previous hidden layer, taken as 0 at 0.
        for (p, a) in prev.iter_mut().zip(input.iter()) {
            if *a <= 0.0 {
                *p = 0.0;
            }
        }
        delta = prev;
    }
    Ok((value, grad))
}

pub fn grad_params(
    arch: &MlpArchitecture,
    theta: &[f64],
    state: &[f64],
    action: usize,
) -> Result<Vec<f64>> {
    value_and_grad(arch, theta, state, action).map(|(_, g)| g)
}

/// Activations of the last hidden layer, `φ(s; V)`, for a multi-head network.
pub fn penultimate_features(arch: &MlpArchitecture, theta: &[f64], state: &[f64]) -> Result<Vec<f64>> {
    if arch.hidden_dims.is_empty() {
        return Err(Error::NoHiddenLayer);
    }
    if arch.head_mode != HeadMode::MultiHead {
        return Err(Error::shape("penultimate features need a multi-head network"));
    }
    arch.check_shapes(theta, state)?;
    let mut acts = forward_trace(arch, theta, state.to_vec());
    acts.pop();
    Ok(acts.pop().unwrap())
}

/// Row of the head weight matrix that produces the output for `action`
/// (multi-head networks only).
pub fn head_weights<'a>(arch: &MlpArchitecture, theta: &'a [f64], action: usize) -> &'a [f64] {
    let head = *arch.layers().last().unwrap();
    &theta[head.weights + action * head.fan_in..head.weights + (action + 1) * head.fan_in]
}

pub fn head_bias(arch: &MlpArchitecture, theta: &[f64], action: usize) -> f64 {
    let head = *arch.layers().last().unwrap();
    theta[head.biases + action]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 50,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("sgd.learning_rate", "must be finite and >= 0"));
        }
        if self.epochs == 0 {
            return Err(Error::config("sgd.epochs", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("sgd.batch_size", "must be positive"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// One gradient step on the mean squared error of `batch`. Only the head of
/// the action that was taken receives gradient.
pub fn sgd_step(
    arch: &MlpArchitecture,
    theta: &mut [f64],
    batch: &[&Observation],
    learning_rate: f64,
) -> Result<()> {
    if batch.is_empty() || learning_rate == 0.0 {
        return Ok(());
    }
    let mut total = vec![0.0; theta.len()];
    for obs in batch {
        let (f, g) = value_and_grad(arch, theta, &obs.state, obs.action)?;
        let r = f - obs.reward;
        for (t, gi) in total.iter_mut().zip(g.iter()) {
            *t += r * gi;
        }
    }
    let scale = 2.0 * learning_rate / batch.len() as f64;
    for (p, t) in theta.iter_mut().zip(total.iter()) {
        *p -= scale * t;
    }
    Ok(())
}

fn train(
    arch: &MlpArchitecture,
    theta0: &ParamVector,
    data: &[Observation],
    cfg: &SgdConfig,
    mut on_step: impl FnMut(&[f64]),
) -> Result<ParamVector> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    cfg.validate()?;
    if theta0.len() != arch.param_count() {
        return Err(Error::shape("initial parameters do not match architecture"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut theta = theta0.clone();
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Observation> = chunk.iter().map(|&i| &data[i]).collect();
            sgd_step(arch, &mut theta.0, &batch, cfg.learning_rate)?;
            on_step(&theta.0);
        }
    }
    Ok(theta)
}

/// Minibatch SGD on the squared error; returns `θ0` followed by the
/// parameters after every minibatch step (the last entry is the trained
/// network).
pub fn sgd_train(
    arch: &MlpArchitecture,
    theta0: &ParamVector,
    data: &[Observation],
    cfg: &SgdConfig,
) -> Result<Vec<ParamVector>> {
    let steps = cfg.epochs * data.len().div_ceil(cfg.batch_size.max(1));
    let mut iterates = Vec::with_capacity(steps + 1);
    iterates.push(theta0.clone());
    train(arch, theta0, data, cfg, |t| iterates.push(ParamVector(t.to_vec())))?;
    Ok(iterates)
}

/// Same optimisation as [`sgd_train`] without recording the iterates.
pub fn sgd_fit(
    arch: &MlpArchitecture,
    theta0: &ParamVector,
    data: &[Observation],
    cfg: &SgdConfig,
) -> Result<ParamVector> {
    train(arch, theta0, data, cfg, |_| {})
}

/// Mean squared error of the network on `data`.
pub fn mse(arch: &MlpArchitecture, theta: &[f64], data: &[Observation]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut s = 0.0;
    for obs in data {
        let r = forward(arch, theta, &obs.state, obs.action)? - obs.reward;
        s += r * r;
    }
    Ok(s / data.len() as f64)
}
