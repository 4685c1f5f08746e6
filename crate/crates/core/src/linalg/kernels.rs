//! Factorization kernels: one-sided Jacobi SVD, cyclic Jacobi symmetric
//! eigensolver, LU solve with partial pivoting.
//!
//! Jacobi methods are slow for big matrices but accurate to working
//! precision in every singular value/eigenvector relative to the norm,
//! which matters more here than speed at the sizes involved.

use super::matrix::DenseMatrix;

const MAX_SWEEPS: usize = 80;

/// Columns of a row-major matrix.
fn columns(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.cols()).map(|j| m.column(j)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rotate(a: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = a.split_at_mut(q);
    let (ap, aq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in ap.iter_mut().zip(aq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Extends orthonormal `basis` (vectors of length `dim`) to `k` vectors.
fn complete_basis(basis: &mut Vec<Vec<f64>>, dim: usize, k: usize) {
    let mut e = 0;
    while basis.len() < k && e < dim {
        let mut v = vec![0.0; dim];
        v[e] = 1.0;
        e += 1;
        // Two Gram-Schmidt passes.
        for _ in 0..2 {
            for b in basis.iter() {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
}

/// `(U columns, sigma, V columns)`.
type ColumnSvd = (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>);

/// Thin SVD of a `rows >= cols` matrix, sorted by decreasing sigma.
fn jacobi_tall(m: &DenseMatrix) -> Option<ColumnSvd> {
    let (rows, n) = m.shape();
    let mut a = columns(m);
    // Columns below this squared norm are rounding noise: rotating them
    // against anything never meets the relative test.
    let noise = (f64::EPSILON * m.frobenius_norm()).powi(2);
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        converged = true;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() || alpha.min(beta) <= noise {
                    continue;
                }
                converged = false;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
    }
    if !converged {
        return None;
    }
    let sigma: Vec<f64> = a.iter().map(|col| dot(col, col).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]));
    let mut u: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut sv = Vec::with_capacity(n);
    let mut vv = Vec::with_capacity(n);
    let mut zero_cols = Vec::new();
    for &j in &order {
        if sigma[j] * sigma[j] > noise {
            u.push(a[j].iter().map(|x| x / sigma[j]).collect());
            sv.push(sigma[j]);
        } else {
            zero_cols.push(j);
            sv.push(0.0);
        }
        vv.push(v[j].clone());
    }
    if !zero_cols.is_empty() {
        complete_basis(&mut u, rows, n);
    }
    Some((u, sv, vv))
}

/// `(U, sigma, V)` with `U: rows x k`, `V: cols x k`, `k = min(rows, cols)`,
/// sigma non-increasing.
pub(crate) fn svd(m: &DenseMatrix) -> Option<(DenseMatrix, Vec<f64>, DenseMatrix)> {
    let (rows, cols) = m.shape();
    if rows >= cols {
        let (u, s, v) = jacobi_tall(m)?;
        Some((DenseMatrix::from_columns(rows, &u), s, DenseMatrix::from_columns(cols, &v)))
    } else {
        let (v, s, u) = jacobi_tall(&m.transpose())?;
        Some((DenseMatrix::from_columns(rows, &u), s, DenseMatrix::from_columns(cols, &v)))
    }
}

/// Eigenvalues and column eigenvectors of a symmetric matrix, eigenvalues
/// non-increasing.
pub(crate) fn sym_eigen(s: &DenseMatrix) -> Option<(Vec<f64>, DenseMatrix)> {
    let n = s.rows();
    let mut a = s.clone();
    let mut v = DenseMatrix::identity(n);
    let scale = a.frobenius_norm();
    let mut converged = n < 2 || scale == 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * scale {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(y, y)].total_cmp(&a[(x, x)]));
    let eigenvalues = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Some((eigenvalues, vectors))
}

/// Solves `A X = B` by LU with partial pivoting; `None` if `A` is singular.
pub(crate) fn lu_solve(a: &DenseMatrix, b: &DenseMatrix) -> Option<DenseMatrix> {
    let n = a.rows();
    let mut lu = a.clone();
    let mut x = b.clone();
    let m = x.cols();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| lu[(i, k)].abs().total_cmp(&lu[(j, k)].abs()))?;
        if lu[(p, k)] == 0.0 {
            return None;
        }
        if p != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
            for j in 0..m {
                let tmp = x[(k, j)];
                x[(k, j)] = x[(p, j)];
                x[(p, j)] = tmp;
            }
        }
        for i in k + 1..n {
            let f = lu[(i, k)] / lu[(k, k)];
            if f == 0.0 {
                continue;
            }
            lu[(i, k)] = f;
            for j in k + 1..n {
                lu[(i, j)] -= f * lu[(k, j)];
            }
            for j in 0..m {
                x[(i, j)] -= f * x[(k, j)];
            }
        }
    }
    for i in (0..n).rev() {
        for j in 0..m {
            let mut acc = x[(i, j)];
            for k in i + 1..n {
                acc -= lu[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = acc / lu[(i, i)];
        }
    }
    x.is_finite().then_some(x)
}
