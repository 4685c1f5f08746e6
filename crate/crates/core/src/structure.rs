//! Structural conditions on matrix couplings.
//!
//! A matrix-coupled system keeps `rank X(t)` constant for every initial
//! state exactly when its flow can be written `X' = A X + X B`, i.e. when
//!
//! ```text
//! W_ii = A + b_ii I      (every agent shares one drift A, up to c I)
//! W_ij = b_ji I          (every coupling is a multiple of the identity)
//! ```
//!
//! The checks here test those identities block by block at sampled times
//! and recover `A` and `B`. The shift `A -> A + c I`, `b_ii -> b_ii - c`
//! leaves the blocks unchanged; recovery fixes it with `b_00 = 0`, so the
//! recovered `A` is `W_00`.
//!
//! For square states (`d = n`) the symmetric variant requires `B = A^T`:
//! `W_ij = a_ij I` and `W_ii = A + a_ii I`, the form of the congruence
//! flow `X' = A X + X A^T` that also preserves the signature of symmetric
//! states.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::Trajectory;
use crate::linalg::DenseMatrix;
use crate::par;
use crate::system::{BlockGrid, CoupledSystem, CouplingSpec};

pub const DEFAULT_STRUCTURE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSample {
    pub t: f64,
    pub blocks: BlockGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub i: usize,
    pub j: usize,
    pub t: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureVerdict {
    /// Blocks have the `A + b_ii I` / `b_ji I` form at every sample.
    pub rank_preserving_form: bool,
    /// Blocks have the symmetric `B = A^T` form at every sample; `None`
    /// when `d != n`.
    pub symmetric_form: Option<bool>,
    pub sample_times: Vec<f64>,
    pub recovered_a: Vec<DenseMatrix>,
    pub recovered_b: Vec<DenseMatrix>,
    /// Largest relative residual over all blocks and samples.
    pub max_residual: f64,
    pub violations: Vec<Violation>,
}

/// `(c, ||M - c I||_F / max(1, ||M||_F))` with `c = trace(M) / d`.
fn scalar_fit(m: &DenseMatrix) -> (f64, f64) {
    let d = m.rows();
    let c = m.trace() / d as f64;
    let mut r = m.clone();
    for k in 0..d {
        r[(k, k)] -= c;
    }
    (c, r.frobenius_norm() / m.frobenius_norm().max(1.0))
}

/// `Some(c)` when `M` is within `tol` (relative) of `c I`.
pub fn nearest_scalar_multiple(m: &DenseMatrix, tol: f64) -> Option<f64> {
    if !m.is_square() || m.rows() == 0 {
        return None;
    }
    let (c, residual) = scalar_fit(m);
    (residual <= tol).then_some(c)
}

struct SampleFit {
    a: DenseMatrix,
    b: DenseMatrix,
    max_residual: f64,
    violations: Vec<Violation>,
}

fn check_uniform(samples: &[BlockSample]) -> Result<(usize, usize)> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("structure check needs at least one sample".into()))?;
    let (n, d) = (first.blocks.n(), first.blocks.d());
    for s in samples {
        if (s.blocks.n(), s.blocks.d()) != (n, d) {
            return Err(Error::DimensionMismatch {
                context: "block samples",
                expected: format!("{n}x{n} grid of {d}x{d} blocks"),
                found: format!("{}x{} grid of {}x{} blocks", s.blocks.n(), s.blocks.n(), s.blocks.d(), s.blocks.d()),
            });
        }
    }
    Ok((n, d))
}

fn fit_rank_form(s: &BlockSample, tol: f64) -> SampleFit {
    let g = &s.blocks;
    let n = g.n();
    let a = g.block(0, 0).clone();
    let mut b = DenseMatrix::zeros(n, n);
    let mut violations = Vec::new();
    let mut max_residual: f64 = 0.0;
    let mut record = |i: usize, j: usize, residual: f64, violations: &mut Vec<Violation>| {
        max_residual = max_residual.max(residual);
        if residual > tol {
            violations.push(Violation { i, j, t: s.t, residual });
        }
    };
    for i in 0..n {
        for j in 0..n {
            if i == j {
                if i == 0 {
                    continue;
                }
                let diff = g.block(i, i) - &a;
                let (c, residual) = scalar_fit(&diff);
                b[(i, i)] = c;
                record(i, i, residual, &mut violations);
            } else {
                let (c, residual) = scalar_fit(g.block(i, j));
                b[(j, i)] = c;
                record(i, j, residual, &mut violations);
            }
        }
    }
    SampleFit {
        a,
        b,
        max_residual,
        violations,
    }
}

fn fit_symmetric_form(s: &BlockSample, tol: f64) -> SampleFit {
    let g = &s.blocks;
    let n = g.n();
    let mut a = DenseMatrix::zeros(n, n);
    let mut violations = Vec::new();
    let mut max_residual: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                a[(i, i)] = g.block(i, i)[(i, i)] / 2.0;
            } else {
                let (c, residual) = scalar_fit(g.block(i, j));
                a[(i, j)] = c;
                max_residual = max_residual.max(residual);
                if residual > tol {
                    violations.push(Violation { i, j, t: s.t, residual });
                }
            }
        }
    }
    for i in 0..n {
        let w = g.block(i, i);
        let mut r = w - &a;
        for k in 0..n {
            r[(k, k)] -= a[(i, i)];
        }
        let residual = r.frobenius_norm() / w.frobenius_norm().max(1.0);
        max_residual = max_residual.max(residual);
        if residual > tol {
            violations.push(Violation { i, j: i, t: s.t, residual });
        }
    }
    SampleFit {
        b: a.transpose(),
        a,
        max_residual,
        violations,
    }
}

fn collect(samples: &[BlockSample], fits: Vec<SampleFit>) -> (StructureVerdict, bool) {
    let ok = fits.iter().all(|f| f.violations.is_empty());
    let mut verdict = StructureVerdict {
        rank_preserving_form: ok,
        symmetric_form: None,
        sample_times: samples.iter().map(|s| s.t).collect(),
        recovered_a: Vec::with_capacity(fits.len()),
        recovered_b: Vec::with_capacity(fits.len()),
        max_residual: 0.0,
        violations: Vec::new(),
    };
    for f in fits {
        verdict.max_residual = verdict.max_residual.max(f.max_residual);
        verdict.recovered_a.push(f.a);
        verdict.recovered_b.push(f.b);
        verdict.violations.extend(f.violations);
    }
    (verdict, ok)
}

/// Tests the rank-preserving block form at every sample and recovers
/// `A(t)` (gauge `b_00 = 0`) and `B(t)`. When `d = n` the symmetric form is
/// evaluated as well.
pub fn check_rank_structure(samples: &[BlockSample], tol: f64) -> Result<StructureVerdict> {
    let (n, d) = check_uniform(samples)?;
    let fits = par::map(samples, |s| fit_rank_form(s, tol));
    let (mut verdict, _) = collect(samples, fits);
    if n == d {
        let fits = par::map(samples, |s| fit_symmetric_form(s, tol));
        verdict.symmetric_form = Some(fits.iter().all(|f| f.violations.is_empty()));
    }
    Ok(verdict)
}

/// Tests the symmetric form `W_ij = a_ij I`, `W_ii = A + a_ii I` (needs
/// `d = n`). The recovered `A` is assembled from the coupling scalars and
/// the halved diagonal entries; `recovered_b` holds `A^T`. The
/// rank-preserving verdict is filled in from [`check_rank_structure`]; the
/// violations listed are those of the symmetric form.
pub fn check_symmetric_structure(samples: &[BlockSample], tol: f64) -> Result<StructureVerdict> {
    let (n, d) = check_uniform(samples)?;
    if n != d {
        return Err(Error::InvalidArgument(format!(
            "symmetric structure needs square states (d = n), got d = {d}, n = {n}"
        )));
    }
    let rank_ok = par::map(samples, |s| fit_rank_form(s, tol)).iter().all(|f| f.violations.is_empty());
    let fits = par::map(samples, |s| fit_symmetric_form(s, tol));
    let (mut verdict, ok) = collect(samples, fits);
    verdict.rank_preserving_form = rank_ok;
    verdict.symmetric_form = Some(ok);
    Ok(verdict)
}

/// Blocks of a system sampled at the times and states of a trajectory.
/// Scalar couplings are lifted to `w_ij I`.
pub fn sample_along(sys: &CoupledSystem, traj: &Trajectory) -> Result<Vec<BlockSample>> {
    let items: Vec<_> = traj.samples().collect();
    par::try_map(&items, |&(t, x)| {
        Ok(BlockSample {
            t,
            blocks: sys.lifted_block_grid(t, x)?,
        })
    })
}

/// A matrix-valued coefficient that is either fixed or a function of time.
#[derive(Clone)]
pub enum MatrixFunction {
    Constant(DenseMatrix),
    TimeVarying(Arc<dyn Fn(f64) -> DenseMatrix + Send + Sync>),
}

impl MatrixFunction {
    pub fn time_varying(f: impl Fn(f64) -> DenseMatrix + Send + Sync + 'static) -> Self {
        MatrixFunction::TimeVarying(Arc::new(f))
    }

    pub fn at(&self, t: f64) -> DenseMatrix {
        match self {
            MatrixFunction::Constant(m) => m.clone(),
            MatrixFunction::TimeVarying(f) => f(t),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, MatrixFunction::Constant(_))
    }
}

impl From<DenseMatrix> for MatrixFunction {
    fn from(m: DenseMatrix) -> Self {
        MatrixFunction::Constant(m)
    }
}

fn decomposition_blocks(a: &DenseMatrix, b: &DenseMatrix, n: usize, d: usize) -> BlockGrid {
    let mut grid = BlockGrid::zeros(n, d);
    let eye = DenseMatrix::identity(d);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                let mut w = a.clone();
                w.axpy(b[(i, i)], &eye);
                grid.set_block(i, i, w);
            } else {
                grid.set_block(i, j, eye.scale(b[(j, i)]));
            }
        }
    }
    grid
}

/// Matrix coupling realizing `X' = A(t) X + X B(t)`: `W_ii = A + b_ii I`,
/// `W_ij = b_ji I`. Shapes are validated at `t = 0`; a time-varying
/// coefficient that changes shape later panics on evaluation.
pub fn build_from_decomposition(
    a: MatrixFunction,
    b: MatrixFunction,
    n: usize,
    d: usize,
) -> Result<CouplingSpec> {
    let (a0, b0) = (a.at(0.0), b.at(0.0));
    if a0.shape() != (d, d) {
        return Err(Error::dims("drift matrix A", (d, d), a0.shape()));
    }
    if b0.shape() != (n, n) {
        return Err(Error::dims("coupling matrix B", (n, n), b0.shape()));
    }
    if a.is_constant() && b.is_constant() {
        return CouplingSpec::matrix_constant(decomposition_blocks(&a0, &b0, n, d));
    }
    CouplingSpec::matrix_time_varying(n, d, move |t| decomposition_blocks(&a.at(t), &b.at(t), n, d))
}
