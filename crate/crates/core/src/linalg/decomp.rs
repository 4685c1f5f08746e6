//! SVD-backed rank and subspace primitives, symmetric eigendecomposition
//! and signature.
//!
//! The Jacobi kernels do the factoring; this module fixes orderings,
//! tolerances and the error contract around them.

use serde::{Deserialize, Serialize};

use super::kernels;
use super::DenseMatrix;
use crate::error::{Error, Result};

/// Default relative tolerance for numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Relative asymmetry accepted by [`sym_eigen`].
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Thin singular value decomposition `M = U diag(s) V^T`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `rows x k` with orthonormal columns, `k = min(rows, cols)`.
    pub u: DenseMatrix,
    /// Non-increasing, non-negative.
    pub singular_values: Vec<f64>,
    /// `cols x k` with orthonormal columns.
    pub v: DenseMatrix,
}

pub fn svd(m: &DenseMatrix) -> Result<Svd> {
    if !m.is_finite() {
        return Err(Error::NonFinite("svd input"));
    }
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(Svd {
            u: DenseMatrix::zeros(rows, 0),
            singular_values: Vec::new(),
            v: DenseMatrix::zeros(cols, 0),
        });
    }
    let (u, singular_values, v) = kernels::svd(m).ok_or(Error::NonConvergence("svd"))?;
    Ok(Svd {
        u,
        singular_values,
        v,
    })
}

fn check_tol(rel_tol: f64) -> Result<()> {
    if !(rel_tol > 0.0 && rel_tol.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "relative tolerance must be positive, got {rel_tol}"
        )));
    }
    Ok(())
}

/// Number of singular values above `rel_tol * sigma_max` in a
/// non-increasing list.
pub fn rank_from_singular_values(singular_values: &[f64], rel_tol: f64) -> usize {
    let Some(&max) = singular_values.first() else {
        return 0;
    };
    if max == 0.0 {
        return 0;
    }
    singular_values.iter().filter(|&&s| s > rel_tol * max).count()
}

pub fn numerical_rank(m: &DenseMatrix, rel_tol: f64) -> Result<usize> {
    check_tol(rel_tol)?;
    let s = svd(m)?;
    Ok(rank_from_singular_values(&s.singular_values, rel_tol))
}

/// Orthonormal basis of a column space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceBasis {
    ambient_dim: usize,
    basis: DenseMatrix,
}

impl SubspaceBasis {
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    /// `ambient_dim x rank`, orthonormal columns.
    pub fn matrix(&self) -> &DenseMatrix {
        &self.basis
    }

    /// Orthogonal projector onto the subspace.
    pub fn projector(&self) -> DenseMatrix {
        &self.basis * &self.basis.transpose()
    }
}

pub fn orthonormal_basis(m: &DenseMatrix, rel_tol: f64) -> Result<SubspaceBasis> {
    check_tol(rel_tol)?;
    let s = svd(m)?;
    let r = rank_from_singular_values(&s.singular_values, rel_tol);
    Ok(SubspaceBasis {
        ambient_dim: m.rows(),
        basis: s.u.leading_columns(r),
    })
}

fn check_ambient(b1: &SubspaceBasis, b2: &SubspaceBasis) -> Result<()> {
    if b1.ambient_dim != b2.ambient_dim {
        return Err(Error::DimensionMismatch {
            context: "subspace comparison",
            expected: format!("ambient dimension {}", b1.ambient_dim),
            found: format!("ambient dimension {}", b2.ambient_dim),
        });
    }
    Ok(())
}

/// Principal angles in `[0, pi/2]`, non-decreasing; `min(r1, r2)` of them.
pub fn principal_angles(b1: &SubspaceBasis, b2: &SubspaceBasis) -> Result<Vec<f64>> {
    check_ambient(b1, b2)?;
    if b1.rank() == 0 || b2.rank() == 0 {
        return Err(Error::EmptyBasis);
    }
    let cross = &b1.basis.transpose() * &b2.basis;
    let s = svd(&cross)?;
    // Sines come from the part of each paired direction outside the other
    // subspace; `acos` alone cannot resolve angles below about 1e-8.
    let scaled = &s.u * &DenseMatrix::from_diagonal(&s.singular_values);
    let residual = &(&b2.basis * &s.v) - &(&b1.basis * &scaled);
    let mut angles: Vec<f64> = s
        .singular_values
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let sin = residual.column(k).iter().map(|x| x * x).sum::<f64>().sqrt();
            sin.atan2(c.max(0.0))
        })
        .collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// `||P1 - P2||_F` for the orthogonal projectors of two subspaces.
pub fn projector_distance(b1: &SubspaceBasis, b2: &SubspaceBasis) -> Result<f64> {
    check_ambient(b1, b2)?;
    Ok((&b1.projector() - &b2.projector()).frobenius_norm())
}

/// Eigenpairs of a symmetric matrix, eigenvalues non-increasing.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub eigenvalues: Vec<f64>,
    /// Column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: DenseMatrix,
}

/// Relative asymmetry `||S - S^T||_F / max(1, ||S||_F)`.
pub fn asymmetry(s: &DenseMatrix) -> Result<f64> {
    if !s.is_square() {
        return Err(Error::NotSquare {
            rows: s.rows(),
            cols: s.cols(),
        });
    }
    Ok((s - &s.transpose()).frobenius_norm() / s.frobenius_norm().max(1.0))
}

pub fn sym_eigen(s: &DenseMatrix) -> Result<SymEigen> {
    if !s.is_finite() {
        return Err(Error::NonFinite("sym_eigen input"));
    }
    let residual = asymmetry(s)?;
    if residual > SYMMETRY_TOL {
        return Err(Error::Asymmetric { residual });
    }
    let sym = (s + &s.transpose()).scale(0.5);
    let (eigenvalues, eigenvectors) =
        kernels::sym_eigen(&sym).ok_or(Error::NonConvergence("symmetric eigendecomposition"))?;
    Ok(SymEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Inertia of a symmetric matrix: counts of positive, negative and zero
/// eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl Signature {
    pub fn new(positive: usize, negative: usize, zero: usize) -> Self {
        Self {
            positive,
            negative,
            zero,
        }
    }

    pub fn order(&self) -> usize {
        self.positive + self.negative + self.zero
    }

    pub fn rank(&self) -> usize {
        self.positive + self.negative
    }

    /// Sum of absolute count differences.
    pub fn distance(&self, other: &Signature) -> usize {
        self.positive.abs_diff(other.positive)
            + self.negative.abs_diff(other.negative)
            + self.zero.abs_diff(other.zero)
    }
}

pub fn signature_from_eigenvalues(eigenvalues: &[f64], rel_tol: f64) -> Signature {
    let theta = rel_tol * eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut sig = Signature::new(0, 0, 0);
    for &l in eigenvalues {
        if l > theta {
            sig.positive += 1;
        } else if l < -theta {
            sig.negative += 1;
        } else {
            sig.zero += 1;
        }
    }
    sig
}

pub fn signature(s: &DenseMatrix, rel_tol: f64) -> Result<Signature> {
    check_tol(rel_tol)?;
    Ok(signature_from_eigenvalues(&sym_eigen(s)?.eigenvalues, rel_tol))
}

/// `W ⊗ I_d`: block `(i, j)` is `w_ij I_d`.
pub fn kronecker_with_identity(w: &DenseMatrix, d: usize) -> Result<DenseMatrix> {
    if !w.is_square() {
        return Err(Error::NotSquare {
            rows: w.rows(),
            cols: w.cols(),
        });
    }
    if d == 0 {
        return Err(Error::InvalidArgument("block size must be at least 1".into()));
    }
    let n = w.rows();
    let mut out = DenseMatrix::zeros(n * d, n * d);
    for i in 0..n {
        for j in 0..n {
            let v = w[(i, j)];
            if v != 0.0 {
                for k in 0..d {
                    out[(i * d + k, j * d + k)] = v;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, SQRT_2};

    use super::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    fn basis_of(cols: &[&[f64]]) -> SubspaceBasis {
        let d = cols[0].len();
        let mat = DenseMatrix::from_columns(d, &cols.iter().map(|c| c.to_vec()).collect::<Vec<_>>());
        orthonormal_basis(&mat, DEFAULT_RANK_TOL).unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len(), "{a:?} vs {b:?}");
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn svd_examples() {
        assert_close(&svd(&DenseMatrix::identity(2)).unwrap().singular_values, &[1.0, 1.0], 1e-14);
        assert_close(&svd(&m(&[&[3.0, 0.0], &[0.0, 0.0]])).unwrap().singular_values, &[3.0, 0.0], 1e-14);
        assert_close(&svd(&m(&[&[1.0, 1.0], &[1.0, 1.0]])).unwrap().singular_values, &[2.0, 0.0], 1e-14);
    }

    #[test]
    fn svd_rejects_non_finite() {
        let mut a = DenseMatrix::identity(2);
        a[(0, 1)] = f64::NAN;
        assert_eq!(svd(&a).unwrap_err(), Error::NonFinite("svd input"));
    }

    #[test]
    fn svd_of_wide_and_tall_reconstructs() {
        for a in [
            m(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.5]]),
            m(&[&[1.0, -2.0], &[0.5, 5.0], &[4.0, 0.0]]),
        ] {
            let s = svd(&a).unwrap();
            let recon = &(&s.u * &DenseMatrix::from_diagonal(&s.singular_values)) * &s.v.transpose();
            assert!((&recon - &a).frobenius_norm() < 1e-12);
            assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(numerical_rank(&DenseMatrix::zeros(3, 3), 1e-8).unwrap(), 0);
        assert_eq!(numerical_rank(&m(&[&[1.0, 2.0], &[2.0, 4.0]]), 1e-8).unwrap(), 1);
        assert!(numerical_rank(&DenseMatrix::identity(2), 0.0).is_err());
        assert!(numerical_rank(&DenseMatrix::identity(2), -1.0).is_err());
    }

    #[test]
    fn basis_examples() {
        let b = orthonormal_basis(&DenseMatrix::identity(3), 1e-8).unwrap();
        assert_eq!(b.rank(), 3);
        let gram = &b.matrix().transpose() * b.matrix();
        assert!((&gram - &DenseMatrix::identity(3)).frobenius_norm() < 1e-12);

        let b = orthonormal_basis(&m(&[&[1.0], &[1.0]]), 1e-8).unwrap();
        assert_eq!(b.rank(), 1);
        let v = b.matrix().column(0);
        let sign = v[0].signum();
        assert_close(&[sign * v[0], sign * v[1]], &[FRAC_1_SQRT_2, FRAC_1_SQRT_2], 1e-14);

        let b = orthonormal_basis(&DenseMatrix::zeros(3, 2), 1e-8).unwrap();
        assert_eq!(b.rank(), 0);
        assert_eq!(b.ambient_dim(), 3);
    }

    #[test]
    fn principal_angle_examples() {
        let e1 = basis_of(&[&[1.0, 0.0]]);
        let e2 = basis_of(&[&[0.0, 1.0]]);
        let diag = basis_of(&[&[1.0, 1.0]]);
        assert_close(&principal_angles(&e1, &e1).unwrap(), &[0.0], 1e-15);
        assert_close(&principal_angles(&e1, &e2).unwrap(), &[FRAC_PI_2], 1e-14);
        assert_close(&principal_angles(&e1, &diag).unwrap(), &[FRAC_PI_4], 1e-14);
    }

    #[test]
    fn tiny_angles_are_resolved() {
        let e1 = basis_of(&[&[1.0, 0.0]]);
        let tilted = basis_of(&[&[1.0, 1e-10]]);
        let theta = principal_angles(&e1, &tilted).unwrap()[0];
        assert!((theta - 1e-10).abs() < 1e-20, "{theta}");
    }

    #[test]
    fn principal_angle_errors() {
        let e1 = basis_of(&[&[1.0, 0.0]]);
        let e1_3 = basis_of(&[&[1.0, 0.0, 0.0]]);
        let empty = orthonormal_basis(&DenseMatrix::zeros(2, 1), 1e-8).unwrap();
        assert!(matches!(principal_angles(&e1, &e1_3), Err(Error::DimensionMismatch { .. })));
        assert_eq!(principal_angles(&e1, &empty), Err(Error::EmptyBasis));
    }

    #[test]
    fn projector_distance_examples() {
        let e1 = basis_of(&[&[1.0, 0.0]]);
        let e2 = basis_of(&[&[0.0, 1.0]]);
        let plane = basis_of(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!(projector_distance(&e1, &e1).unwrap() < 1e-15);
        assert!((projector_distance(&e1, &e2).unwrap() - SQRT_2).abs() < 1e-14);
        assert!((projector_distance(&e1, &plane).unwrap() - 1.0).abs() < 1e-14);
        let e1_3 = basis_of(&[&[1.0, 0.0, 0.0]]);
        assert!(projector_distance(&e1, &e1_3).is_err());
    }

    #[test]
    fn sym_eigen_examples() {
        assert_close(&sym_eigen(&DenseMatrix::from_diagonal(&[2.0, -1.0])).unwrap().eigenvalues, &[2.0, -1.0], 1e-14);
        assert_close(&sym_eigen(&m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap().eigenvalues, &[1.0, -1.0], 1e-14);
        assert_close(&sym_eigen(&DenseMatrix::identity(4)).unwrap().eigenvalues, &[1.0; 4], 1e-14);
    }

    #[test]
    fn sym_eigen_rejects_asymmetry() {
        let a = m(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert!(matches!(sym_eigen(&a), Err(Error::Asymmetric { .. })));
        assert!(matches!(sym_eigen(&m(&[&[1.0, 2.0]])), Err(Error::NotSquare { .. })));
        // Tiny asymmetry is symmetrized, not rejected.
        let b = m(&[&[1.0, 1.0 + 1e-12], &[1.0, 1.0]]);
        assert!(sym_eigen(&b).is_ok());
    }

    #[test]
    fn signature_examples() {
        assert_eq!(signature(&DenseMatrix::identity(3), 1e-8).unwrap(), Signature::new(3, 0, 0));
        assert_eq!(
            signature(&DenseMatrix::from_diagonal(&[2.0, -1.0, 0.0]), 1e-8).unwrap(),
            Signature::new(1, 1, 1)
        );
        assert_eq!(signature(&m(&[&[0.0, 1.0], &[1.0, 0.0]]), 1e-8).unwrap(), Signature::new(1, 1, 0));
        assert_eq!(signature(&DenseMatrix::zeros(2, 2), 1e-8).unwrap(), Signature::new(0, 0, 2));
    }

    #[test]
    fn kronecker_examples() {
        assert_eq!(
            kronecker_with_identity(&m(&[&[2.0]]), 2).unwrap(),
            DenseMatrix::from_diagonal(&[2.0, 2.0])
        );
        assert_eq!(kronecker_with_identity(&DenseMatrix::identity(2), 2).unwrap(), DenseMatrix::identity(4));
        let k = kronecker_with_identity(&m(&[&[0.0, 1.0], &[0.0, 0.0]]), 2).unwrap();
        let mut expected = DenseMatrix::zeros(4, 4);
        expected.set_block(0, 2, &DenseMatrix::identity(2));
        assert_eq!(k, expected);
        assert!(kronecker_with_identity(&m(&[&[1.0, 2.0]]), 2).is_err());
    }
}
