use nalgebra::{DMatrix, DVector};

use crate::linalg::symmetrize;

#[derive(Debug, Clone, PartialEq)]
pub struct PgdResult {
    pub matrix: DMatrix<f64>,
    pub objective_before: f64,
    pub objective_after: f64,
}

/// `Σ_j (φ_jᵀ A φ_j − s_j)²`, i.e. `Σ_j (tr(A Φ_j) − s_j)²` with `Φ_j = φ_j φ_jᵀ`.
pub fn pgd_objective(a: &DMatrix<f64>, features: &[DVector<f64>], targets: &[f64]) -> f64 {
    features
        .iter()
        .zip(targets)
        .map(|(phi, s)| {
            let r = phi.dot(&(a * phi)) - s;
            r * r
        })
        .sum()
}

/// Projected gradient descent on the likelihood-matching objective over
/// symmetric positive semidefinite matrices.
///
/// Each step moves `A ← A − η g` with `g = 2 Σ_j (φ_jᵀ A φ_j − s_j) φ_j φ_jᵀ`
/// and then zeroes the negative eigenvalues. A matrix that is already
/// positive definite is left untouched by the projection.
pub fn pgd_psd_project(
    a0: &DMatrix<f64>,
    features: &[DVector<f64>],
    targets: &[f64],
    steps: usize,
    learning_rate: f64,
) -> PgdResult {
    assert_eq!(features.len(), targets.len());
    let objective_before = pgd_objective(a0, features, targets);
    let mut a = a0.clone();
    if !features.is_empty() {
        for _ in 0..steps {
            let residuals: Vec<f64> = features
                .iter()
                .zip(targets)
                .map(|(phi, s)| phi.dot(&(&a * phi)) - s)
                .collect();
            if residuals.iter().all(|&r| r == 0.0) {
                break;
            }
            for (phi, r) in features.iter().zip(&residuals) {
                a.ger(-2.0 * learning_rate * r, phi, phi, 1.0);
            }
            symmetrize(&mut a);
            if a.clone().cholesky().is_none() {
                a = project_psd(&a);
            }
        }
    }
    let objective_after = pgd_objective(&a, features, targets);
    PgdResult {
        matrix: a,
        objective_before,
        objective_after,
    }
}

fn project_psd(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = a.clone().symmetric_eigen();
    let mut v = eig.eigenvectors.clone();
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        v.column_mut(k).scale_mut(lambda.max(0.0));
    }
    let mut out = v * eig.eigenvectors.transpose();
    symmetrize(&mut out);
    out
}
