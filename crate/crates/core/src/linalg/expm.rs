//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants (Higham 2005 degree selection).

use super::DenseMatrix;
use crate::error::{Error, Result};

/// 1-norm bounds below which the degree-m Padé approximant is accurate to
/// unit roundoff.
const THETA: [(usize, f64); 5] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
    (13, 5.371_920_351_148_152),
];

fn pade_coefficients(m: usize) -> Vec<f64> {
    // b_{k+1} / b_k = (m - k) / ((2m - k)(k + 1)), b_0 = 1.
    let mut b = Vec::with_capacity(m + 1);
    b.push(1.0);
    for k in 0..m {
        let next = b[k] * (m - k) as f64 / (((2 * m - k) * (k + 1)) as f64);
        b.push(next);
    }
    b
}

/// `U` and `V` of the degree-m approximant `(V - U)^{-1} (V + U)`.
fn pade_terms(a: &DenseMatrix, m: usize) -> (DenseMatrix, DenseMatrix) {
    let n = a.rows();
    let b = pade_coefficients(m);
    let eye = DenseMatrix::identity(n);
    let a2 = a * a;
    if m == 13 {
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let mut inner = a6.scale(b[13]);
        inner.axpy(b[11], &a4);
        inner.axpy(b[9], &a2);
        let mut odd = &a6 * &inner;
        odd.axpy(b[7], &a6);
        odd.axpy(b[5], &a4);
        odd.axpy(b[3], &a2);
        odd.axpy(b[1], &eye);
        let u = a * &odd;

        let mut inner = a6.scale(b[12]);
        inner.axpy(b[10], &a4);
        inner.axpy(b[8], &a2);
        let mut v = &a6 * &inner;
        v.axpy(b[6], &a6);
        v.axpy(b[4], &a4);
        v.axpy(b[2], &a2);
        v.axpy(b[0], &eye);
        return (u, v);
    }
    let mut odd = eye.scale(b[1]);
    let mut v = eye.scale(b[0]);
    let mut power = eye;
    for k in (2..=m).step_by(2) {
        power = &power * &a2;
        v.axpy(b[k], &power);
        if k < m {
            odd.axpy(b[k + 1], &power);
        }
    }
    (a * &odd, v)
}

fn solve(lhs: &DenseMatrix, rhs: &DenseMatrix) -> Result<DenseMatrix> {
    super::kernels::lu_solve(lhs, rhs).ok_or(Error::NonConvergence("Padé denominator solve"))
}

pub fn matrix_exponential(m: &DenseMatrix) -> Result<DenseMatrix> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("matrix exponential input"));
    }
    let n = m.rows();
    if m.is_zero() {
        return Ok(DenseMatrix::identity(n));
    }
    let norm = m.one_norm();
    if !norm.is_finite() {
        return Err(Error::Overflow { norm });
    }

    for &(degree, theta) in &THETA[..4] {
        if norm <= theta {
            let (u, v) = pade_terms(m, degree);
            return finish(&u, &v, 0, norm);
        }
    }

    let theta13 = THETA[4].1;
    let squarings = (norm / theta13).log2().ceil().max(0.0) as i32;
    if squarings > 1000 {
        return Err(Error::Overflow { norm });
    }
    let scaled = m.scale(2f64.powi(-squarings));
    let (u, v) = pade_terms(&scaled, 13);
    finish(&u, &v, squarings, norm)
}

fn finish(u: &DenseMatrix, v: &DenseMatrix, squarings: i32, norm: f64) -> Result<DenseMatrix> {
    let mut r = solve(&(v - u), &(v + u))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if !r.is_finite() {
        return Err(Error::Overflow { norm });
    }
    Ok(r)
}
