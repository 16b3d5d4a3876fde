//! Extended Kalman filtering of network parameters under identity dynamics.
//!
//! Observations are scalar, so the innovation variance `S` is a scalar and
//! no matrix is ever inverted: a full-covariance step costs `O(m²)`.
//! The same update serves the full parameter space, a decoupled
//! (block-diagonal or diagonal) approximation, and subspace coordinates
//! `z` with `θ = A z + θ*`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::linalg::{psd_factor, standard_normals, symmetrize};
use crate::reward_models::{value_and_grad, MlpArchitecture};
use crate::subspace::AffineSubspace;
use crate::{Error, Result};

/// Observation variance `R` and process-noise scale `Q` (`Q_t = Q·I`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EkfNoise {
    pub obs_var: f64,
    pub process_var: f64,
}

impl Default for EkfNoise {
    fn default() -> Self {
        Self {
            obs_var: 0.75 * 0.75,
            process_var: 1e-8,
        }
    }
}

impl EkfNoise {
    pub fn new(obs_var: f64, process_var: f64) -> Self {
        Self { obs_var, process_var }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.obs_var > 0.0 && self.obs_var.is_finite()) {
            return Err(Error::config("noise.obs_var", "must be finite and > 0"));
        }
        if !(self.process_var >= 0.0 && self.process_var.is_finite()) {
            return Err(Error::config("noise.process_var", "must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Full(DMatrix<f64>),
    Diag(DVector<f64>),
    /// Disjoint contiguous blocks covering `0..m` in order.
    Blocks(Vec<(Range<usize>, DMatrix<f64>)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EkfBelief {
    pub mean: DVector<f64>,
    pub cov: Covariance,
}

impl EkfBelief {
    pub fn full(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self {
            mean,
            cov: Covariance::Full(cov),
        }
    }

    pub fn isotropic(mean: DVector<f64>, var: f64) -> Self {
        let n = mean.len();
        Self::full(mean, DMatrix::identity(n, n) * var)
    }

    pub fn diag(mean: DVector<f64>, var: DVector<f64>) -> Self {
        Self {
            mean,
            cov: Covariance::Diag(var),
        }
    }

    /// Block-diagonal belief; `sizes` must sum to the mean's length.
    pub fn blocks(mean: DVector<f64>, sizes: &[usize], var: f64) -> Result<Self> {
        if sizes.iter().sum::<usize>() != mean.len() || sizes.contains(&0) {
            return Err(Error::shape("block sizes must be positive and cover the mean"));
        }
        let mut start = 0;
        let blocks = sizes
            .iter()
            .map(|&s| {
                let r = start..start + s;
                start += s;
                (r, DMatrix::identity(s, s) * var)
            })
            .collect();
        Ok(Self {
            mean,
            cov: Covariance::Blocks(blocks),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Dense covariance matrix (for inspection and tests).
    pub fn dense_cov(&self) -> DMatrix<f64> {
        match &self.cov {
            Covariance::Full(c) => c.clone(),
            Covariance::Diag(v) => DMatrix::from_diagonal(v),
            Covariance::Blocks(blocks) => {
                let n = self.dim();
                let mut m = DMatrix::zeros(n, n);
                for (r, b) in blocks {
                    m.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(b);
                }
                m
            }
        }
    }

    /// Predictive variance of the linearised observation, `hᵀ Σ h`.
    pub fn quad_form(&self, h: &DVector<f64>) -> f64 {
        match &self.cov {
            Covariance::Full(c) => h.dot(&(c * h)),
            Covariance::Diag(v) => h.iter().zip(v.iter()).map(|(hi, vi)| hi * hi * vi).sum(),
            Covariance::Blocks(blocks) => blocks
                .iter()
                .map(|(r, b)| {
                    let hb = h.rows(r.start, r.len());
                    hb.dot(&(b * hb))
                })
                .sum(),
        }
    }

    /// Draw from `N(μ, Σ)`; always consumes exactly `dim()` standard normals.
    pub fn sample(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        let eps = standard_normals(self.dim(), rng);
        match &self.cov {
            Covariance::Full(c) => &self.mean + psd_factor(c) * eps,
            Covariance::Diag(v) => {
                DVector::from_fn(self.dim(), |i, _| self.mean[i] + v[i].max(0.0).sqrt() * eps[i])
            }
            Covariance::Blocks(blocks) => {
                let mut out = self.mean.clone();
                for (r, b) in blocks {
                    let draw = psd_factor(b) * eps.rows(r.start, r.len());
                    let mut seg = out.rows_mut(r.start, r.len());
                    seg += draw;
                }
                out
            }
        }
    }

    /// In-place EKF update given the predicted observation `h(μ)` and its
    /// gradient `h_row` at the (predicted) mean.
    ///
    /// Full covariance runs the exact filter; diagonal and block covariances
    /// run the decoupled filter with a shared innovation variance.
    pub fn assimilate(&mut self, predicted: f64, h_row: &DVector<f64>, y: f64, noise: &EkfNoise) -> Result<()> {
        if h_row.len() != self.dim() {
            return Err(Error::shape(format!(
                "Jacobian has length {}, belief dimension is {}",
                h_row.len(),
                self.dim()
            )));
        }
        let e = y - predicted;
        let q = noise.process_var;
        match &mut self.cov {
            Covariance::Full(cov) => {
                if q != 0.0 {
                    for i in 0..cov.nrows() {
                        cov[(i, i)] += q;
                    }
                }
                let v = &*cov * h_row;
                let s = h_row.dot(&v) + noise.obs_var;
                self.mean.axpy(e / s, &v, 1.0);
                cov.ger(-1.0 / s, &v, &v, 1.0);
                symmetrize(cov);
            }
            Covariance::Diag(var) => {
                let mut s = noise.obs_var;
                for (vi, hi) in var.iter_mut().zip(h_row.iter()) {
                    *vi += q;
                    s += hi * hi * *vi;
                }
                for i in 0..var.len() {
                    let k = var[i] * h_row[i] / s;
                    self.mean[i] += k * e;
                    var[i] = (var[i] - k * h_row[i] * var[i]).max(0.0);
                }
            }
            Covariance::Blocks(blocks) => {
                let mut s = noise.obs_var;
                let mut gains = Vec::with_capacity(blocks.len());
                for (r, b) in blocks.iter_mut() {
                    if q != 0.0 {
                        for i in 0..b.nrows() {
                            b[(i, i)] += q;
                        }
                    }
                    let hb = h_row.rows(r.start, r.len()).into_owned();
                    let v = &*b * &hb;
                    s += hb.dot(&v);
                    gains.push(v);
                }
                for ((r, b), v) in blocks.iter_mut().zip(gains.iter()) {
                    let mut seg = self.mean.rows_mut(r.start, r.len());
                    seg.axpy(e / s, v, 1.0);
                    b.ger(-1.0 / s, v, v, 1.0);
                    symmetrize(b);
                }
            }
        }
        Ok(())
    }
}

/// One full-covariance EKF step; `predicted` is `h(μ)` and `h_row` is
/// `∇h(μ)`.
pub fn ekf_step(
    bel: &EkfBelief,
    predicted: f64,
    h_row: &DVector<f64>,
    y: f64,
    noise: &EkfNoise,
) -> Result<EkfBelief> {
    if !matches!(bel.cov, Covariance::Full(_)) {
        return Err(Error::shape("ekf_step needs a full covariance"));
    }
    let mut out = bel.clone();
    out.assimilate(predicted, h_row, y, noise)?;
    Ok(out)
}

/// One decoupled EKF step over a diagonal or block-diagonal covariance.
pub fn decoupled_ekf_step(
    bel: &EkfBelief,
    predicted: f64,
    h_row: &DVector<f64>,
    y: f64,
    noise: &EkfNoise,
) -> Result<EkfBelief> {
    if matches!(bel.cov, Covariance::Full(_)) {
        return Err(Error::shape("decoupled_ekf_step needs a diagonal or block covariance"));
    }
    let mut out = bel.clone();
    out.assimilate(predicted, h_row, y, noise)?;
    Ok(out)
}

/// Linearise the network at `θ = A μ + θ*` and return `(f(θ), Aᵀ∇θ f)`.
pub fn subspace_observation(
    sub: &AffineSubspace,
    arch: &MlpArchitecture,
    z: &DVector<f64>,
    state: &[f64],
    action: usize,
) -> Result<(f64, DVector<f64>)> {
    let theta = sub.lift(z)?;
    let (f, g) = value_and_grad(arch, &theta, state, action)?;
    Ok((f, sub.project_gradient(&g)?))
}

/// Linearise the network directly in parameter space.
pub fn param_observation(
    arch: &MlpArchitecture,
    theta: &DVector<f64>,
    state: &[f64],
    action: usize,
) -> Result<(f64, DVector<f64>)> {
    let (f, g) = value_and_grad(arch, theta.as_slice(), state, action)?;
    Ok((f, DVector::from_vec(g)))
}

/// EKF step over subspace coordinates for the reward `y` of `action` in
/// `state`.
pub fn subspace_ekf_step(
    bel: &EkfBelief,
    sub: &AffineSubspace,
    arch: &MlpArchitecture,
    state: &[f64],
    action: usize,
    y: f64,
    noise: &EkfNoise,
) -> Result<EkfBelief> {
    if bel.dim() != sub.dim() {
        return Err(Error::shape(format!(
            "belief dimension {} != subspace dimension {}",
            bel.dim(),
            sub.dim()
        )));
    }
    let (f, h) = subspace_observation(sub, arch, &bel.mean, state, action)?;
    let mut out = bel.clone();
    out.assimilate(f, &h, y, noise)?;
    Ok(out)
}
