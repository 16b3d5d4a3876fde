//! Small dense helpers shared by the Bayesian updates and the filters.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

/// Replace `m` by `(m + mᵀ) / 2` in place.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Inverse of a symmetric positive-definite matrix via Cholesky, falling
/// back to LU for matrices that are invertible but not numerically SPD.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Some(m.clone());
    }
    let inv = match m.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => m.clone().try_inverse()?,
    };
    if inv.iter().all(|v| v.is_finite()) {
        let mut inv = inv;
        symmetrize(&mut inv);
        Some(inv)
    } else {
        None
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// A factor `L` with `L Lᵀ ≈ cov`.
///
/// Cholesky when the matrix is numerically positive definite; otherwise the
/// symmetric eigendecomposition with negative eigenvalues clipped to zero,
/// which covers the singular and slightly indefinite cases.
pub fn psd_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = cov.clone().cholesky() {
        return ch.unpack();
    }
    let eig = cov.clone().symmetric_eigen();
    let mut factor = eig.eigenvectors;
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        factor.column_mut(k).scale_mut(s);
    }
    factor
}

/// `n` independent standard normal draws, always consuming exactly `n`
/// samples from `rng`.
pub fn standard_normals(n: usize, rng: &mut dyn RngCore) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)))
}

/// Draw from `N(mean, scale · cov)`.
pub fn sample_mvn(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    scale: f64,
    rng: &mut dyn RngCore,
) -> DVector<f64> {
    let eps = standard_normals(mean.len(), rng);
    let factor = psd_factor(cov);
    mean + (factor * eps) * scale.max(0.0).sqrt()
}

pub fn outer(x: &DVector<f64>) -> DMatrix<f64> {
    x * x.transpose()
}

/// Largest absolute elementwise difference between two matrices.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Index of the largest entry; ties go to the lowest index and NaN never wins.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}
