//! Conjugate Bayesian linear regression.
//!
//! Known noise variance: batch posterior, recursive least squares and the
//! Sherman–Morrison rank-one form. Unknown variance: Normal-Inverse-Gamma
//! batch and incremental updates, plus the inversion-free Kalman recursion
//! that tracks the variance scale (`ν`, `τ`) alongside the weights.
//!
//! Every update returns a fresh belief with a symmetrised covariance.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::linalg::{psd_factor, spd_inverse, standard_normals, symmetrize};
use crate::{Error, Result};

/// Gaussian belief `N(μ, Σ)` over regression weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self { mean, cov }
    }

    /// `N(0, (1/ε) I)`.
    pub fn uninformative(dim: usize, eps: f64) -> Self {
        Self {
            mean: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim) / eps,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Normal-Inverse-Gamma belief: `σ² ~ IG(a, b)`, `w | σ² ~ N(μ, σ² Σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NigBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub a: f64,
    pub b: f64,
}

impl NigBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, a: f64, b: f64) -> Self {
        Self { mean, cov, a, b }
    }

    pub fn from_prior(dim: usize, prior: &NigPrior) -> Self {
        Self {
            mean: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim) * prior.cov_scale,
            a: prior.a0,
            b: prior.b0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Kalman-style belief with unknown observation variance: `w ~ N(μ, V Σ*)`,
/// precision `1/V ~ Ga(ν/2, ντ/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarKfBelief {
    pub mean: DVector<f64>,
    pub cov_star: DMatrix<f64>,
    pub nu: f64,
    pub tau: f64,
}

impl VarKfBelief {
    /// The NIG belief with the same distribution (`a = ν/2`, `b = ντ/2`).
    pub fn to_nig(&self) -> NigBelief {
        NigBelief {
            mean: self.mean.clone(),
            cov: self.cov_star.clone(),
            a: self.nu / 2.0,
            b: self.nu * self.tau / 2.0,
        }
    }

    pub fn from_nig(nig: &NigBelief) -> Self {
        Self {
            mean: nig.mean.clone(),
            cov_star: nig.cov.clone(),
            nu: 2.0 * nig.a,
            tau: nig.b / nig.a,
        }
    }
}

/// Isotropic zero-mean NIG prior: `Σ0 = cov_scale · I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NigPrior {
    pub cov_scale: f64,
    pub a0: f64,
    pub b0: f64,
}

/// `ε` of the default `Σ0 = (1/ε) I`.
pub const DEFAULT_PRIOR_EPS: f64 = 1e-6;

impl Default for NigPrior {
    fn default() -> Self {
        Self {
            cov_scale: 1.0 / DEFAULT_PRIOR_EPS,
            a0: 6.0,
            b0: 6.0,
        }
    }
}

impl NigPrior {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("prior.cov_scale", self.cov_scale), ("prior.a0", self.a0), ("prior.b0", self.b0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be finite and > 0"));
            }
        }
        Ok(())
    }
}

fn check_obs(n: usize, x: &DVector<f64>) -> Result<()> {
    if x.len() != n {
        return Err(Error::shape(format!("feature length {} != belief dimension {n}", x.len())));
    }
    Ok(())
}

fn check_batch(n: usize, xs: &DMatrix<f64>, ys: &DVector<f64>) -> Result<()> {
    if xs.ncols() != n || xs.nrows() != ys.len() {
        return Err(Error::shape(format!(
            "design is {}x{}, targets {}, belief dimension {n}",
            xs.nrows(),
            xs.ncols(),
            ys.len()
        )));
    }
    Ok(())
}

/// Closed-form posterior from a batch of `N` rows with known noise `σ²`.
pub fn batch_posterior_known_var(
    prior: &GaussianBelief,
    xs: &DMatrix<f64>,
    ys: &DVector<f64>,
    noise_var: f64,
) -> Result<GaussianBelief> {
    check_batch(prior.dim(), xs, ys)?;
    if xs.nrows() == 0 {
        return Ok(prior.clone());
    }
    let prec0 = spd_inverse(&prior.cov).ok_or(Error::SingularPrior)?;
    let prec = &prec0 + xs.tr_mul(xs) / noise_var;
    let mut cov = spd_inverse(&prec).ok_or(Error::SingularPrior)?;
    symmetrize(&mut cov);
    let rhs = &prec0 * &prior.mean + xs.tr_mul(ys) / noise_var;
    let mean = &cov * rhs;
    Ok(GaussianBelief { mean, cov })
}

/// One recursive-least-squares step (scalar Kalman update).
pub fn rls_step(bel: &GaussianBelief, x: &DVector<f64>, y: f64, noise_var: f64) -> Result<GaussianBelief> {
    check_obs(bel.dim(), x)?;
    let sx = &bel.cov * x;
    let e = y - x.dot(&bel.mean);
    let s = x.dot(&sx) + noise_var;
    let k = sx / s;
    let mean = &bel.mean + &k * e;
    let mut cov = bel.cov.clone();
    cov.ger(-s, &k, &k, 1.0);
    symmetrize(&mut cov);
    Ok(GaussianBelief { mean, cov })
}

/// Rank-one covariance downdate via Sherman–Morrison; the mean comes from
/// the information form `μ' = Σ'(Σ⁻¹μ + x y/σ²) = μ + Σ' x (y − xᵀμ)/σ²`.
pub fn sherman_morrison_step(
    bel: &GaussianBelief,
    x: &DVector<f64>,
    y: f64,
    noise_var: f64,
) -> Result<GaussianBelief> {
    check_obs(bel.dim(), x)?;
    let sx = &bel.cov * x;
    let denom = noise_var + x.dot(&sx);
    let mut cov = bel.cov.clone();
    cov.ger(-1.0 / denom, &sx, &sx, 1.0);
    symmetrize(&mut cov);
    let gain = &cov * x;
    let mean = &bel.mean + gain * ((y - x.dot(&bel.mean)) / noise_var);
    Ok(GaussianBelief { mean, cov })
}

/// Batch NIG posterior (precision form for the `b` update).
pub fn nig_batch(prior: &NigBelief, xs: &DMatrix<f64>, ys: &DVector<f64>) -> Result<NigBelief> {
    check_batch(prior.dim(), xs, ys)?;
    if xs.nrows() == 0 {
        return Ok(prior.clone());
    }
    let prec0 = spd_inverse(&prior.cov).ok_or(Error::SingularPrior)?;
    let psi = xs.tr_mul(ys);
    let gram = xs.tr_mul(xs);
    let (mean, cov, b) = nig_core(&prior.mean, &prec0, prior.b, &psi, &gram, ys.norm_squared())?;
    Ok(NigBelief {
        mean,
        cov,
        a: prior.a + xs.nrows() as f64 / 2.0,
        b,
    })
}

/// Shared NIG algebra from sufficient statistics `ψ = Xᵀy`, `Φ = XᵀX`, `R² = yᵀy`:
/// `Σ = (Λ0 + Φ)⁻¹`, `μ = Σ(Λ0 μ0 + ψ)`,
/// `b = b0 + ½(R² + μ0ᵀΛ0μ0 − μᵀΣ⁻¹μ)`.
fn nig_core(
    mean0: &DVector<f64>,
    prec0: &DMatrix<f64>,
    b0: f64,
    psi: &DVector<f64>,
    gram: &DMatrix<f64>,
    r2: f64,
) -> Result<(DVector<f64>, DMatrix<f64>, f64)> {
    let prec = prec0 + gram;
    let mut cov = spd_inverse(&prec).ok_or(Error::SingularPrior)?;
    symmetrize(&mut cov);
    let prior_info = prec0 * mean0;
    let rhs = &prior_info + psi;
    let mean = &cov * &rhs;
    // μᵀΣ⁻¹μ = μᵀ(Λ0μ0 + ψ)
    let b = b0 + 0.5 * (r2 + mean0.dot(&prior_info) - mean.dot(&rhs));
    Ok((mean, cov, b))
}

/// NIG posterior from accumulated sufficient statistics against a fixed prior.
pub fn nig_from_stats(
    prior: &NigBelief,
    psi: &DVector<f64>,
    gram: &DMatrix<f64>,
    r2: f64,
    count: usize,
) -> Result<NigBelief> {
    if count == 0 {
        return Ok(prior.clone());
    }
    let prec0 = spd_inverse(&prior.cov).ok_or(Error::SingularPrior)?;
    nig_from_stats_with_precision(prior, &prec0, psi, gram, r2, count)
}

/// [`nig_from_stats`] with the prior precision `Σ0⁻¹` supplied by the
/// caller (for priors whose covariance is only positive semidefinite).
pub fn nig_from_stats_with_precision(
    prior: &NigBelief,
    prior_precision: &DMatrix<f64>,
    psi: &DVector<f64>,
    gram: &DMatrix<f64>,
    r2: f64,
    count: usize,
) -> Result<NigBelief> {
    if count == 0 {
        return Ok(prior.clone());
    }
    let (mean, cov, b) = nig_core(&prior.mean, prior_precision, prior.b, psi, gram, r2)?;
    Ok(NigBelief {
        mean,
        cov,
        a: prior.a + count as f64 / 2.0,
        b: b.max(f64::MIN_POSITIVE),
    })
}

/// Single-observation NIG update in the incremental precision form.
pub fn nig_step(bel: &NigBelief, x: &DVector<f64>, y: f64) -> Result<NigBelief> {
    check_obs(bel.dim(), x)?;
    let prec_prev = spd_inverse(&bel.cov).ok_or(Error::SingularPrior)?;
    let prec = &prec_prev + x * x.transpose();
    let mut cov = spd_inverse(&prec).ok_or(Error::SingularPrior)?;
    symmetrize(&mut cov);
    let info_prev = &prec_prev * &bel.mean;
    let rhs = &info_prev + x * y;
    let mean = &cov * &rhs;
    let b = bel.b + 0.5 * (y * y + bel.mean.dot(&info_prev) - mean.dot(&rhs));
    Ok(NigBelief {
        mean,
        cov,
        a: bel.a + 0.5,
        b,
    })
}

/// Inversion-free Kalman recursion with unknown observation variance.
pub fn varkf_step(bel: &VarKfBelief, x: &DVector<f64>, y: f64) -> Result<VarKfBelief> {
    check_obs(bel.mean.len(), x)?;
    let e = y - x.dot(&bel.mean);
    let sx = &bel.cov_star * x;
    let s = x.dot(&sx) + 1.0;
    let k = sx / s;
    let mean = &bel.mean + &k * e;
    let mut cov_star = bel.cov_star.clone();
    cov_star.ger(-s, &k, &k, 1.0);
    symmetrize(&mut cov_star);
    let nu = bel.nu + 1.0;
    let tau = (bel.nu * bel.tau + e * e / s) / nu;
    Ok(VarKfBelief {
        mean,
        cov_star,
        nu,
        tau,
    })
}

/// Draw `σ̃² ~ IG(a, b)` then `w ~ N(μ, σ̃² Σ)`.
pub fn sample_nig(bel: &NigBelief, rng: &mut dyn RngCore) -> (f64, DVector<f64>) {
    let b = bel.b.max(f64::MIN_POSITIVE);
    let gamma = Gamma::new(bel.a, 1.0 / b).expect("NIG shape and rate must be positive");
    let precision: f64 = gamma.sample(rng);
    let var = 1.0 / precision;
    let eps = standard_normals(bel.dim(), rng);
    let w = &bel.mean + (psd_factor(&bel.cov) * eps) * var.sqrt();
    (var, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, min_eigenvalue};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(mean: f64, var: f64) -> GaussianBelief {
        GaussianBelief::new(DVector::from_element(1, mean), DMatrix::from_element(1, 1, var))
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &m * m.transpose() + DMatrix::identity(n, n) * 0.5
    }

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn batch_hand_case() {
        let post = batch_posterior_known_var(
            &scalar(0.0, 1.0),
            &DMatrix::from_element(1, 1, 1.0),
            &DVector::from_element(1, 1.0),
            1.0,
        )
        .unwrap();
        assert!((post.mean[0] - 0.5).abs() < 1e-15);
        assert!((post.cov[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn batch_empty_returns_prior() {
        let prior = scalar(0.3, 2.0);
        let post = batch_posterior_known_var(&prior, &DMatrix::zeros(0, 1), &DVector::zeros(0), 1.0).unwrap();
        assert_eq!(post, prior);
    }

    #[test]
    fn batch_singular_prior_errors() {
        let prior = scalar(0.0, 0.0);
        let r = batch_posterior_known_var(&prior, &DMatrix::from_element(1, 1, 1.0), &DVector::from_element(1, 1.0), 1.0);
        assert!(matches!(r, Err(Error::SingularPrior)));
    }

    #[test]
    fn rls_hand_case_and_degenerate_inputs() {
        let post = rls_step(&scalar(0.0, 1.0), &DVector::from_element(1, 1.0), 1.0, 1.0).unwrap();
        assert!((post.mean[0] - 0.5).abs() < 1e-15);
        assert!((post.cov[(0, 0)] - 0.5).abs() < 1e-15);

        let certain = scalar(0.7, 0.0);
        assert_eq!(rls_step(&certain, &DVector::from_element(1, 2.0), 9.0, 1.0).unwrap(), certain);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bel = GaussianBelief::new(random_vec(3, &mut rng), random_spd(3, &mut rng));
        let mut sym = bel.clone();
        symmetrize(&mut sym.cov);
        let post = rls_step(&bel, &DVector::zeros(3), 4.0, 1.0).unwrap();
        assert_eq!(post, sym);
    }

    #[test]
    fn sherman_morrison_special_cases() {
        let bel = GaussianBelief::new(DVector::zeros(3), DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0, 4.0])));
        let x = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        let post = sherman_morrison_step(&bel, &x, 1.0, 1.0).unwrap();
        assert_eq!(post.cov[(0, 0)], 2.0);
        assert_eq!(post.cov[(2, 2)], 4.0);
        assert!(post.cov[(1, 1)] < 3.0);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bel = GaussianBelief::new(random_vec(4, &mut rng), random_spd(4, &mut rng));
        let post = sherman_morrison_step(&bel, &random_vec(4, &mut rng), 0.3, 1e12).unwrap();
        let rel = max_abs_diff(&post.cov, &bel.cov) / bel.cov.amax();
        assert!(rel < 1e-9);
    }

    #[test]
    fn sherman_morrison_equals_rls() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.random_range(1..=8);
            let bel = GaussianBelief::new(random_vec(n, &mut rng), random_spd(n, &mut rng));
            let x = random_vec(n, &mut rng);
            let y = rng.random_range(-2.0..2.0);
            let var = rng.random_range(0.1..2.0);
            let a = rls_step(&bel, &x, y, var).unwrap();
            let b = sherman_morrison_step(&bel, &x, y, var).unwrap();
            assert!((a.mean - b.mean).amax() < 1e-9);
            assert!(max_abs_diff(&a.cov, &b.cov) < 1e-9);
        }
    }

    fn random_nig(n: usize, rng: &mut ChaCha8Rng) -> NigBelief {
        NigBelief::new(random_vec(n, rng), random_spd(n, rng), rng.random_range(1.0..5.0), rng.random_range(0.5..5.0))
    }

    #[test]
    fn nig_batch_zero_reward_case() {
        let prior = NigBelief::new(DVector::zeros(1), DMatrix::identity(1, 1), 1.0, 1.0);
        let post = nig_batch(&prior, &DMatrix::from_element(1, 1, 1.0), &DVector::zeros(1)).unwrap();
        assert_eq!(post.mean[0], 0.0);
        assert!((post.cov[(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(post.a, 1.5);
        assert!((post.b - 1.0).abs() < 1e-15);
        assert_eq!(nig_batch(&prior, &DMatrix::zeros(0, 1), &DVector::zeros(0)).unwrap(), prior);
    }

    #[test]
    fn nig_batch_b_never_drops_below_prior_with_zero_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let n = rng.random_range(1..=6);
            let mut prior = random_nig(n, &mut rng);
            prior.mean = DVector::zeros(n);
            let rows = rng.random_range(1..=20);
            let xs = DMatrix::from_fn(rows, n, |_, _| rng.random_range(-1.0..1.0));
            let ys = random_vec(rows, &mut rng);
            let post = nig_batch(&prior, &xs, &ys).unwrap();
            assert!(post.b > prior.b - 1e-12);
        }
    }

    #[test]
    fn nig_step_fold_matches_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let prior = random_nig(3, &mut rng);
        let xs = DMatrix::from_fn(5, 3, |_, _| rng.random_range(-1.0..1.0));
        let ys = random_vec(5, &mut rng);
        let mut bel = prior.clone();
        for i in 0..5 {
            bel = nig_step(&bel, &xs.row(i).transpose(), ys[i]).unwrap();
        }
        let batch = nig_batch(&prior, &xs, &ys).unwrap();
        assert!((bel.mean - &batch.mean).amax() < 1e-8);
        assert!(max_abs_diff(&bel.cov, &batch.cov) < 1e-8);
        assert!((bel.a - batch.a).abs() < 1e-8);
        assert!((bel.b - batch.b).abs() < 1e-8);
    }

    #[test]
    fn nig_step_null_observation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let bel = random_nig(3, &mut rng);
        let post = nig_step(&bel, &DVector::zeros(3), 0.0).unwrap();
        assert!((post.mean - &bel.mean).amax() < 1e-10);
        assert!(max_abs_diff(&post.cov, &bel.cov) < 1e-10);
        assert_eq!(post.a, bel.a + 0.5);
        assert!((post.b - bel.b).abs() < 1e-10);
    }

    #[test]
    fn nig_step_repeated_obs_shrinks_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut bel = random_nig(3, &mut rng);
        let x = random_vec(3, &mut rng);
        let mut last = x.dot(&(&bel.cov * &x));
        for _ in 0..10 {
            bel = nig_step(&bel, &x, 1.0).unwrap();
            let v = x.dot(&(&bel.cov * &x));
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn varkf_hand_case() {
        let bel = VarKfBelief {
            mean: DVector::zeros(1),
            cov_star: DMatrix::identity(1, 1),
            nu: 1.0,
            tau: 1.0,
        };
        let post = varkf_step(&bel, &DVector::from_element(1, 1.0), 2.0).unwrap();
        assert!((post.mean[0] - 1.0).abs() < 1e-15);
        assert!((post.cov_star[(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(post.nu, 2.0);
        assert!((post.tau - 1.5).abs() < 1e-15);

        let zero = varkf_step(&bel, &DVector::zeros(1), 3.0).unwrap();
        assert_eq!(zero.mean, bel.mean);
        assert_eq!(zero.cov_star, bel.cov_star);
        assert_eq!(zero.nu, 2.0);
        assert!((zero.nu * zero.tau - (1.0 + 9.0)).abs() < 1e-12);
    }

    #[test]
    fn varkf_matches_nig_on_random_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let n = rng.random_range(1..=5);
            let prior = random_nig(n, &mut rng);
            let mut nig = prior.clone();
            let mut kf = VarKfBelief::from_nig(&prior);
            for _ in 0..10 {
                let x = random_vec(n, &mut rng);
                let y = rng.random_range(-2.0..2.0);
                nig = nig_step(&nig, &x, y).unwrap();
                kf = varkf_step(&kf, &x, y).unwrap();
            }
            let as_nig = kf.to_nig();
            assert!((as_nig.mean - &nig.mean).amax() < 1e-8);
            assert!(max_abs_diff(&as_nig.cov, &nig.cov) < 1e-8);
            assert!((as_nig.a - nig.a).abs() < 1e-8);
            assert!((as_nig.b - nig.b).abs() < 1e-8);
        }
    }

    #[test]
    fn covariances_stay_symmetric_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut bel = GaussianBelief::new(DVector::zeros(5), random_spd(5, &mut rng));
        for _ in 0..500 {
            bel = rls_step(&bel, &random_vec(5, &mut rng), rng.random_range(-1.0..1.0), 0.01).unwrap();
        }
        assert_eq!(bel.cov, bel.cov.transpose());
        assert!(min_eigenvalue(&bel.cov) >= -1e-9);
    }

    #[test]
    fn sample_nig_degenerate_and_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let certain = NigBelief::new(DVector::from_vec(vec![1.0, 2.0]), DMatrix::zeros(2, 2), 3.0, 2.0);
        for _ in 0..5 {
            assert_eq!(sample_nig(&certain, &mut rng).1, certain.mean);
        }

        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
        let bel = NigBelief::new(DVector::zeros(2), cov.clone(), 3.0, 2.0);
        let n = 100_000;
        let mut var_sum = 0.0;
        let mut second = DMatrix::zeros(2, 2);
        for _ in 0..n {
            let (v, w) = sample_nig(&bel, &mut rng);
            var_sum += v;
            second += &w * w.transpose();
        }
        let mean_var = var_sum / n as f64;
        let expected = 2.0 / (3.0 - 1.0);
        assert!((mean_var - expected).abs() / expected < 0.05);
        let emp = second / n as f64;
        let target = cov * expected;
        for (e, t) in emp.iter().zip(target.iter()) {
            assert!((e - t).abs() / t.abs() < 0.1, "{e} vs {t}");
        }
    }
}
