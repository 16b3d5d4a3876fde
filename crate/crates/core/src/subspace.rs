//! Affine parameter subspaces `θ(z) = A z + θ*`.
//!
//! The basis either comes from random Gaussian directions with unit-norm
//! columns, or from the top right singular vectors of SGD iterates centred
//! on the offset.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::reward_models::ParamVector;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubspaceKind {
    Random,
    Svd,
    /// Caller-supplied basis (identity subspaces in tests, loaded files).
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineSubspace {
    /// `D × d`
    pub basis: DMatrix<f64>,
    /// `D`
    pub offset: DVector<f64>,
    pub kind: SubspaceKind,
}

impl AffineSubspace {
    pub fn new(basis: DMatrix<f64>, offset: DVector<f64>, kind: SubspaceKind) -> Result<Self> {
        if basis.nrows() != offset.len() {
            return Err(Error::shape(format!(
                "basis has {} rows but offset has length {}",
                basis.nrows(),
                offset.len()
            )));
        }
        if basis.ncols() == 0 || basis.ncols() > basis.nrows() {
            return Err(Error::dim(format!(
                "subspace dimension {} must be in 1..={}",
                basis.ncols(),
                basis.nrows()
            )));
        }
        Ok(Self { basis, offset, kind })
    }

    /// `A = I_D` with the given offset.
    pub fn identity(offset: DVector<f64>) -> Self {
        let n = offset.len();
        Self {
            basis: DMatrix::identity(n, n),
            offset,
            kind: SubspaceKind::Custom,
        }
    }

    /// Ambient dimension `D`.
    pub fn full_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Subspace dimension `d`.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn lift(&self, z: &DVector<f64>) -> Result<ParamVector> {
        self.lift_vector(z).map(|v| ParamVector(v.data.into()))
    }

    pub fn lift_vector(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        if z.len() != self.dim() {
            return Err(Error::shape(format!(
                "z has length {}, subspace dimension is {}",
                z.len(),
                self.dim()
            )));
        }
        let mut theta = self.offset.clone();
        theta.gemv(1.0, &self.basis, z, 1.0);
        Ok(theta)
    }

    /// Chain rule through the affine map: `∂f/∂z = Aᵀ ∂f/∂θ`.
    pub fn project_gradient(&self, g: &[f64]) -> Result<DVector<f64>> {
        if g.len() != self.full_dim() {
            return Err(Error::shape(format!(
                "gradient has length {}, ambient dimension is {}",
                g.len(),
                self.full_dim()
            )));
        }
        let g = DVector::from_column_slice(g);
        Ok(self.basis.tr_mul(&g))
    }

    /// Binary layout: `SKSB`, version `u32`, kind `u32`, `D` as `u64`,
    /// `d` as `u64`, then `θ*` and `A` (column-major), all little-endian `f64`.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(SUBSPACE_MAGIC)?;
        w.write_all(&SUBSPACE_VERSION.to_le_bytes())?;
        let kind: u32 = match self.kind {
            SubspaceKind::Random => 0,
            SubspaceKind::Svd => 1,
            SubspaceKind::Custom => 2,
        };
        w.write_all(&kind.to_le_bytes())?;
        w.write_all(&(self.full_dim() as u64).to_le_bytes())?;
        w.write_all(&(self.dim() as u64).to_le_bytes())?;
        for v in self.offset.iter().chain(self.basis.iter()) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 28];
        r.read_exact(&mut header)
            .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
        if &header[0..4] != SUBSPACE_MAGIC {
            return Err(Error::Format("bad magic, expected SKSB".into()));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != SUBSPACE_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let kind = match u32::from_le_bytes(header[8..12].try_into().unwrap()) {
            0 => SubspaceKind::Random,
            1 => SubspaceKind::Svd,
            2 => SubspaceKind::Custom,
            k => return Err(Error::Format(format!("unknown subspace kind {k}"))),
        };
        let full = u64::from_le_bytes(header[12..20].try_into().unwrap()) as usize;
        let dim = u64::from_le_bytes(header[20..28].try_into().unwrap()) as usize;
        let mut read = |n: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(n);
            let mut buf = [0u8; 8];
            for _ in 0..n {
                r.read_exact(&mut buf)
                    .map_err(|e| Error::Format(format!("truncated body: {e}")))?;
                out.push(f64::from_le_bytes(buf));
            }
            Ok(out)
        };
        let offset = DVector::from_vec(read(full)?);
        let basis = DMatrix::from_vec(full, dim, read(full * dim)?);
        Self::new(basis, offset, kind)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }
}

const SUBSPACE_MAGIC: &[u8; 4] = b"SKSB";
const SUBSPACE_VERSION: u32 = 1;

/// Random Gaussian basis with each column scaled to unit Euclidean norm.
pub fn random_subspace(full_dim: usize, dim: usize, offset: &ParamVector, seed: u64) -> Result<AffineSubspace> {
    if dim == 0 || dim > full_dim {
        return Err(Error::dim(format!("subspace dimension {dim} must be in 1..={full_dim}")));
    }
    if offset.len() != full_dim {
        return Err(Error::shape("offset length does not match the ambient dimension"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis = DMatrix::from_fn(full_dim, dim, |_, _| StandardNormal.sample(&mut rng));
    for mut col in basis.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        } else {
            col[0] = 1.0;
        }
    }
    AffineSubspace::new(basis, DVector::from_column_slice(offset), SubspaceKind::Random)
}

/// Top-`dim` right singular vectors of the iterates centred on `offset`.
///
/// `iterates` is `n × D`, one parameter vector per row. With `thin = k`
/// only every `k`-th row (starting at the first) is used. Columns are
/// ordered by descending singular value (stable on ties) and signed so that
/// each column's largest-magnitude entry is positive.
pub fn svd_subspace(
    iterates: &DMatrix<f64>,
    dim: usize,
    offset: &ParamVector,
    thin: usize,
) -> Result<AffineSubspace> {
    let full_dim = iterates.ncols();
    if offset.len() != full_dim {
        return Err(Error::shape("offset length does not match iterate width"));
    }
    let thin = thin.max(1);
    let rows: Vec<usize> = (0..iterates.nrows()).step_by(thin).collect();
    let n = rows.len();
    if n == 0 || dim == 0 || dim > n.min(full_dim) {
        return Err(Error::dim(format!(
            "subspace dimension {dim} must be in 1..={} (n={n}, D={full_dim})",
            n.min(full_dim)
        )));
    }
    let centred = DMatrix::from_fn(n, full_dim, |i, j| iterates[(rows[i], j)] - offset[j]);
    let svd = centred.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::dim("SVD did not produce right singular vectors"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut basis = DMatrix::zeros(full_dim, dim);
    for (c, &k) in order.iter().take(dim).enumerate() {
        let row = v_t.row(k);
        let mut pivot = 0;
        for j in 0..full_dim {
            if row[j].abs() > row[pivot].abs() {
                pivot = j;
            }
        }
        let sign = if row[pivot] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..full_dim {
            basis[(j, c)] = sign * row[j];
        }
    }
    AffineSubspace::new(basis, DVector::from_column_slice(offset), SubspaceKind::Svd)
}

/// Stack parameter vectors as rows of an `n × D` matrix.
pub fn iterate_matrix(iterates: &[ParamVector]) -> DMatrix<f64> {
    let n = iterates.len();
    let full = iterates.first().map(|p| p.len()).unwrap_or(0);
    DMatrix::from_fn(n, full, |i, j| iterates[i][j])
}

pub fn lift(sub: &AffineSubspace, z: &DVector<f64>) -> Result<ParamVector> {
    sub.lift(z)
}

pub fn project_gradient(sub: &AffineSubspace, g: &[f64]) -> Result<DVector<f64>> {
    sub.project_gradient(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use proptest::prelude::*;
    use rand::Rng;

    fn rand_vec(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn one_by_one_random_basis_is_unit() {
        let s = random_subspace(1, 1, &ParamVector::zeros(1), 4).unwrap();
        assert!((s.basis[(0, 0)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_columns_have_unit_norm() {
        let s = random_subspace(100, 10, &ParamVector::zeros(100), 1).unwrap();
        for col in s.basis.column_iter() {
            assert!((col.norm() - 1.0).abs() < 1e-10);
        }
        let t = random_subspace(100, 10, &ParamVector::zeros(100), 2).unwrap();
        assert_ne!(s.basis, t.basis);
        assert_eq!(s, random_subspace(100, 10, &ParamVector::zeros(100), 1).unwrap());
        assert!(matches!(random_subspace(3, 4, &ParamVector::zeros(3), 0), Err(Error::Dimension(_))));
    }

    #[test]
    fn degenerate_iterates_still_orthonormal() {
        let offset = ParamVector(vec![0.5, -1.0, 2.0, 0.0, 1.0]);
        let it = DMatrix::from_fn(4, 5, |_, j| offset[j]);
        let s = svd_subspace(&it, 3, &offset, 1).unwrap();
        let gram = s.basis.tr_mul(&s.basis);
        assert!(max_abs_diff(&gram, &DMatrix::identity(3, 3)) < 1e-10);
    }

    #[test]
    fn rank_one_iterates_recover_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let offset = rand_vec(20, &mut rng);
        let v = rand_vec(20, &mut rng);
        let it = DMatrix::from_fn(8, 20, |i, j| offset[j] + (i as f64 - 3.0) * v[j]);
        let s = svd_subspace(&it, 1, &ParamVector(offset.as_slice().to_vec()), 1).unwrap();
        let unit = &v / v.norm();
        let col = s.basis.column(0);
        let cos = col.dot(&unit);
        assert!((cos.abs() - 1.0).abs() < 1e-10);
        // largest-magnitude entry positive
        let imax = col.iamax();
        assert!(col[imax] > 0.0);
    }

    #[test]
    fn svd_basis_orthonormal_on_random_iterates() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let it = DMatrix::from_fn(50, 200, |_, _| rng.random_range(-1.0..1.0));
        let offset = ParamVector((0..200).map(|j| it[(49, j)]).collect());
        let s = svd_subspace(&it, 5, &offset, 1).unwrap();
        assert!(max_abs_diff(&s.basis.tr_mul(&s.basis), &DMatrix::identity(5, 5)) < 1e-10);
        assert!(matches!(svd_subspace(&it, 51, &offset, 1), Err(Error::Dimension(_))));
        // thinning keeps every other row
        assert!(svd_subspace(&it, 25, &offset, 2).is_ok());
        assert!(svd_subspace(&it, 26, &offset, 2).is_err());
    }

    #[test]
    fn svd_reconstruction_error_non_increasing_in_dim() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let it = DMatrix::from_fn(30, 40, |_, _| rng.random_range(-1.0..1.0));
        let offset = ParamVector(vec![0.1; 40]);
        let mut last = f64::INFINITY;
        for d in 1..=30 {
            let s = svd_subspace(&it, d, &offset, 1).unwrap();
            let mut err = 0.0;
            for i in 0..30 {
                let x = DVector::from_fn(40, |j, _| it[(i, j)] - offset[j]);
                let r = &x - &s.basis * s.basis.tr_mul(&x);
                err += r.norm_squared();
            }
            assert!(err <= last + 1e-9);
            last = err;
        }
        assert!(last < 1e-8);
    }

    #[test]
    fn lift_and_project_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let offset = rand_vec(6, &mut rng);
        let s = random_subspace(6, 3, &ParamVector(offset.as_slice().to_vec()), 1).unwrap();
        assert_eq!(s.lift_vector(&DVector::zeros(3)).unwrap(), offset);
        let id = AffineSubspace::identity(DVector::zeros(4));
        let z = rand_vec(4, &mut rng);
        assert_eq!(id.lift_vector(&z).unwrap(), z);
        assert_eq!(id.project_gradient(z.as_slice()).unwrap(), z);
        // dense oracle
        let z = rand_vec(3, &mut rng);
        let mut manual = offset.clone();
        for i in 0..6 {
            for k in 0..3 {
                manual[i] += s.basis[(i, k)] * z[k];
            }
        }
        assert!((s.lift_vector(&z).unwrap() - manual).amax() < 1e-12);
        assert!(matches!(s.lift_vector(&DVector::zeros(2)), Err(Error::Shape(_))));
        assert!(matches!(s.project_gradient(&[0.0; 5]), Err(Error::Shape(_))));
    }

    #[test]
    fn gradient_orthogonal_to_basis_projects_to_zero() {
        let basis = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let s = AffineSubspace::new(basis, DVector::zeros(3), SubspaceKind::Custom).unwrap();
        assert_eq!(s.project_gradient(&[0.0, 0.0, 7.0]).unwrap(), DVector::zeros(2));
    }

    #[test]
    fn subspace_bytes_round_trip() {
        let s = random_subspace(7, 3, &ParamVector(vec![0.25; 7]), 2).unwrap();
        let bytes = s.to_bytes();
        assert_eq!(&bytes[..4], b"SKSB");
        assert_eq!(AffineSubspace::from_bytes(&bytes).unwrap(), s);
        assert!(AffineSubspace::from_bytes(&bytes[..30]).is_err());
    }

    proptest! {
        #[test]
        fn lift_is_affine(seed in 0u64..500, alpha in -2.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let offset = ParamVector((0..12).map(|_| rng.random_range(-1.0..1.0)).collect());
            let s = random_subspace(12, 4, &offset, seed).unwrap();
            let z1 = rand_vec(4, &mut rng);
            let z2 = rand_vec(4, &mut rng);
            let mixed = s.lift_vector(&(&z1 * alpha + &z2 * (1.0 - alpha))).unwrap();
            let combo = s.lift_vector(&z1).unwrap() * alpha + s.lift_vector(&z2).unwrap() * (1.0 - alpha);
            prop_assert!((mixed - combo).amax() < 1e-10);
        }
    }
}
