//! Coupled systems `x_i' = sum_j k_ij x_j` with scalar or `d x d` matrix
//! couplings, and their right-hand sides in matrix-flow and stacked-vector
//! form.
//!
//! Agent indices are 0-based throughout. The state matrix `X` is `d x n`
//! with column `i` holding agent `i`; the stacked vector is
//! `[x_0; x_1; ...; x_{n-1}]`, i.e. `X` in column-major order.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kronecker_with_identity, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CouplingKind {
    ScalarConstant,
    ScalarTimeVarying,
    ScalarStateDependent,
    MatrixConstant,
    MatrixTimeVarying,
    MatrixStateDependent,
}

impl CouplingKind {
    pub fn is_scalar(self) -> bool {
        matches!(
            self,
            CouplingKind::ScalarConstant | CouplingKind::ScalarTimeVarying | CouplingKind::ScalarStateDependent
        )
    }

    pub fn is_constant(self) -> bool {
        matches!(self, CouplingKind::ScalarConstant | CouplingKind::MatrixConstant)
    }

    pub fn is_state_dependent(self) -> bool {
        matches!(self, CouplingKind::ScalarStateDependent | CouplingKind::MatrixStateDependent)
    }
}

/// `d x n` matrix whose column `i` is the state of agent `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateMatrix(DenseMatrix);

impl StateMatrix {
    pub fn new(x: DenseMatrix) -> Self {
        Self(x)
    }

    pub fn zeros(d: usize, n: usize) -> Self {
        Self(DenseMatrix::zeros(d, n))
    }

    /// Builds `X` from agent positions (one slice per agent).
    pub fn from_agents(agents: &[Vec<f64>]) -> Result<Self> {
        let d = agents.first().map_or(0, Vec::len);
        if agents.iter().any(|a| a.len() != d) {
            return Err(Error::InvalidArgument("agents must share one state dimension".into()));
        }
        let x = DenseMatrix::from_columns(d, agents);
        if !x.is_finite() {
            return Err(Error::NonFinite("agent states"));
        }
        Ok(Self(x))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn agents(&self) -> usize {
        self.0.cols()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.0
    }

    /// Column-major stacking `[x_0; x_1; ...]`.
    pub fn stack(&self) -> Vec<f64> {
        stack(&self.0)
    }

    pub fn unstack(x: &[f64], d: usize, n: usize) -> Result<Self> {
        if x.len() != d * n {
            return Err(Error::DimensionMismatch {
                context: "unstack",
                expected: format!("length {}", d * n),
                found: format!("length {}", x.len()),
            });
        }
        Ok(Self(DenseMatrix::from_fn(d, n, |i, j| x[j * d + i])))
    }
}

impl Deref for StateMatrix {
    type Target = DenseMatrix;

    fn deref(&self) -> &DenseMatrix {
        &self.0
    }
}

pub(crate) fn stack(x: &DenseMatrix) -> Vec<f64> {
    let (d, n) = x.shape();
    let mut out = Vec::with_capacity(d * n);
    for j in 0..n {
        for i in 0..d {
            out.push(x[(i, j)]);
        }
    }
    out
}

/// Complete `n x n` grid of `d x d` blocks; block `(i, j)` couples agent `j`
/// into agent `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockGrid {
    n: usize,
    d: usize,
    blocks: Vec<DenseMatrix>,
}

impl BlockGrid {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            n,
            d,
            blocks: vec![DenseMatrix::zeros(d, d); n * n],
        }
    }

    /// `rows[i][j]` is block `(i, j)`.
    pub fn from_rows(rows: Vec<Vec<DenseMatrix>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidArgument("block grid needs at least one agent".into()));
        }
        let d = rows[0].first().map_or(0, DenseMatrix::rows);
        if d == 0 {
            return Err(Error::InvalidArgument("blocks must be non-empty".into()));
        }
        let mut blocks = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "block grid",
                    expected: format!("{n} blocks in row {i}"),
                    found: format!("{}", row.len()),
                });
            }
            for block in row {
                if block.shape() != (d, d) {
                    return Err(Error::dims("block grid", (d, d), block.shape()));
                }
                blocks.push(block);
            }
        }
        Ok(Self { n, d, blocks })
    }

    pub fn from_fn(n: usize, d: usize, mut f: impl FnMut(usize, usize) -> DenseMatrix) -> Result<Self> {
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            rows.push((0..n).map(|j| f(i, j)).collect());
        }
        let grid = Self::from_rows(rows)?;
        if grid.d != d {
            return Err(Error::dims("block grid", (d, d), (grid.d, grid.d)));
        }
        Ok(grid)
    }

    /// Splits a `dn x dn` matrix into `d x d` blocks.
    pub fn from_block_matrix(m: &DenseMatrix, d: usize) -> Result<Self> {
        if d == 0 || !m.is_square() || !m.rows().is_multiple_of(d) {
            return Err(Error::InvalidArgument(format!(
                "{}x{} matrix cannot be split into {d}x{d} blocks",
                m.rows(),
                m.cols()
            )));
        }
        let n = m.rows() / d;
        Self::from_fn(n, d, |i, j| m.block(i * d, j * d, d, d))
    }

    /// Lifts scalar couplings to `w_ij I_d` blocks.
    pub fn lift_scalar(w: &DenseMatrix, d: usize) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::NotSquare {
                rows: w.rows(),
                cols: w.cols(),
            });
        }
        let eye = DenseMatrix::identity(d);
        Self::from_fn(w.rows(), d, |i, j| eye.scale(w[(i, j)]))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn block(&self, i: usize, j: usize) -> &DenseMatrix {
        &self.blocks[i * self.n + j]
    }

    pub fn set_block(&mut self, i: usize, j: usize, block: DenseMatrix) {
        assert_eq!(block.shape(), (self.d, self.d), "block shape");
        self.blocks[i * self.n + j] = block;
    }

    pub fn to_block_matrix(&self) -> DenseMatrix {
        let (n, d) = (self.n, self.d);
        let mut out = DenseMatrix::zeros(n * d, n * d);
        for i in 0..n {
            for j in 0..n {
                out.set_block(i * d, j * d, self.block(i, j));
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(DenseMatrix::is_finite)
    }
}

pub type ScalarCouplingFn = dyn Fn(f64, &DenseMatrix) -> DenseMatrix + Send + Sync;
pub type BlockCouplingFn = dyn Fn(f64, &DenseMatrix) -> BlockGrid + Send + Sync;

#[derive(Clone)]
enum Evaluator {
    ScalarConst(DenseMatrix),
    Scalar(Arc<ScalarCouplingFn>),
    MatrixConst(BlockGrid),
    Matrix(Arc<BlockCouplingFn>),
}

/// Coupling weights of a system together with their kind and sizes.
///
/// Evaluators receive `(t, X)` with the full `d x n` state and must be pure
/// and continuous. Scalar evaluators return the `n x n` matrix `W` whose
/// entry `(i, j)` is `w_ij`; `(i, i)` is the self-coefficient.
#[derive(Clone)]
pub struct CouplingSpec {
    kind: CouplingKind,
    n: usize,
    d: usize,
    eval: Evaluator,
}

fn check_sizes(n: usize, d: usize) -> Result<()> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument(format!(
            "agent count and state dimension must be positive (n = {n}, d = {d})"
        )));
    }
    Ok(())
}

impl CouplingSpec {
    pub fn scalar_constant(w: DenseMatrix, d: usize) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::NotSquare {
                rows: w.rows(),
                cols: w.cols(),
            });
        }
        check_sizes(w.rows(), d)?;
        if !w.is_finite() {
            return Err(Error::NonFinite("coupling matrix"));
        }
        Ok(Self {
            kind: CouplingKind::ScalarConstant,
            n: w.rows(),
            d,
            eval: Evaluator::ScalarConst(w),
        })
    }

    pub fn scalar_time_varying(
        n: usize,
        d: usize,
        w: impl Fn(f64) -> DenseMatrix + Send + Sync + 'static,
    ) -> Result<Self> {
        check_sizes(n, d)?;
        Ok(Self {
            kind: CouplingKind::ScalarTimeVarying,
            n,
            d,
            eval: Evaluator::Scalar(Arc::new(move |t, _| w(t))),
        })
    }

    pub fn scalar_state_dependent(
        n: usize,
        d: usize,
        w: impl Fn(f64, &DenseMatrix) -> DenseMatrix + Send + Sync + 'static,
    ) -> Result<Self> {
        check_sizes(n, d)?;
        Ok(Self {
            kind: CouplingKind::ScalarStateDependent,
            n,
            d,
            eval: Evaluator::Scalar(Arc::new(w)),
        })
    }

    /// Scalar coupling from a per-pair function `(i, j, t, X) -> w_ij`.
    pub fn scalar_entrywise(
        kind: CouplingKind,
        n: usize,
        d: usize,
        w: impl Fn(usize, usize, f64, &DenseMatrix) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        check_sizes(n, d)?;
        if !kind.is_scalar() || kind.is_constant() {
            return Err(Error::InvalidArgument(format!(
                "entrywise scalar coupling needs a time-varying or state-dependent scalar kind, got {kind:?}"
            )));
        }
        Ok(Self {
            kind,
            n,
            d,
            eval: Evaluator::Scalar(Arc::new(move |t, x| DenseMatrix::from_fn(n, n, |i, j| w(i, j, t, x)))),
        })
    }

    pub fn matrix_constant(grid: BlockGrid) -> Result<Self> {
        if !grid.is_finite() {
            return Err(Error::NonFinite("coupling blocks"));
        }
        Ok(Self {
            kind: CouplingKind::MatrixConstant,
            n: grid.n(),
            d: grid.d(),
            eval: Evaluator::MatrixConst(grid),
        })
    }

    pub fn matrix_time_varying(
        n: usize,
        d: usize,
        blocks: impl Fn(f64) -> BlockGrid + Send + Sync + 'static,
    ) -> Result<Self> {
        check_sizes(n, d)?;
        Ok(Self {
            kind: CouplingKind::MatrixTimeVarying,
            n,
            d,
            eval: Evaluator::Matrix(Arc::new(move |t, _| blocks(t))),
        })
    }

    pub fn matrix_state_dependent(
        n: usize,
        d: usize,
        blocks: impl Fn(f64, &DenseMatrix) -> BlockGrid + Send + Sync + 'static,
    ) -> Result<Self> {
        check_sizes(n, d)?;
        Ok(Self {
            kind: CouplingKind::MatrixStateDependent,
            n,
            d,
            eval: Evaluator::Matrix(Arc::new(blocks)),
        })
    }

    pub fn kind(&self) -> CouplingKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }
}

impl fmt::Debug for CouplingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CouplingSpec")
            .field("kind", &self.kind)
            .field("n", &self.n)
            .field("d", &self.d)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub struct CoupledSystem {
    pub spec: CouplingSpec,
    pub label: String,
}

impl CoupledSystem {
    pub fn new(spec: CouplingSpec, label: impl Into<String>) -> Self {
        Self {
            spec,
            label: label.into(),
        }
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }

    pub fn kind(&self) -> CouplingKind {
        self.spec.kind
    }

    pub fn check_state(&self, x: &DenseMatrix) -> Result<()> {
        if x.shape() != (self.d(), self.n()) {
            return Err(Error::dims("state matrix", (self.d(), self.n()), x.shape()));
        }
        Ok(())
    }

    /// `W(t, X)` for scalar kinds.
    pub fn assemble_scalar_w(&self, t: f64, x: &StateMatrix) -> Result<DenseMatrix> {
        self.check_state(x)?;
        self.scalar_w(t, x)
    }

    fn scalar_w(&self, t: f64, x: &DenseMatrix) -> Result<DenseMatrix> {
        let w = match &self.spec.eval {
            Evaluator::ScalarConst(w) => return Ok(w.clone()),
            Evaluator::Scalar(f) => f(t, x),
            _ => {
                return Err(Error::KindMismatch {
                    expected: "a scalar coupling",
                    found: self.kind(),
                })
            }
        };
        let n = self.n();
        if w.shape() != (n, n) {
            return Err(Error::dims("scalar coupling evaluator", (n, n), w.shape()));
        }
        Ok(w)
    }

    /// Blocks `W_ij(t, X)` for matrix kinds.
    pub fn block_grid(&self, t: f64, x: &StateMatrix) -> Result<BlockGrid> {
        self.check_state(x)?;
        self.blocks(t, x)
    }

    fn blocks(&self, t: f64, x: &DenseMatrix) -> Result<BlockGrid> {
        let grid = match &self.spec.eval {
            Evaluator::MatrixConst(g) => return Ok(g.clone()),
            Evaluator::Matrix(f) => f(t, x),
            _ => {
                return Err(Error::KindMismatch {
                    expected: "a matrix coupling",
                    found: self.kind(),
                })
            }
        };
        if grid.n() != self.n() || grid.d() != self.d() {
            return Err(Error::DimensionMismatch {
                context: "block coupling evaluator",
                expected: format!("{}x{} grid of {}x{} blocks", self.n(), self.n(), self.d(), self.d()),
                found: format!("{}x{} grid of {}x{} blocks", grid.n(), grid.n(), grid.d(), grid.d()),
            });
        }
        Ok(grid)
    }

    /// Blocks for any kind; scalar couplings are lifted to `w_ij I_d`.
    pub fn lifted_block_grid(&self, t: f64, x: &StateMatrix) -> Result<BlockGrid> {
        self.check_state(x)?;
        if self.kind().is_scalar() {
            BlockGrid::lift_scalar(&self.scalar_w(t, x)?, self.d())
        } else {
            self.blocks(t, x)
        }
    }

    /// The `dn x dn` matrix with block `(i, j)` equal to `W_ij(t, X)`.
    pub fn assemble_block_matrix(&self, t: f64, x: &StateMatrix) -> Result<DenseMatrix> {
        Ok(self.block_grid(t, x)?.to_block_matrix())
    }

    /// `X'`: `X W^T` for scalar kinds, column `i` = `sum_j W_ij x_j` for
    /// matrix kinds.
    pub fn rhs_matrix_form(&self, t: f64, x: &StateMatrix) -> Result<DenseMatrix> {
        self.check_state(x)?;
        self.rhs(t, x)
    }

    pub(crate) fn rhs(&self, t: f64, x: &DenseMatrix) -> Result<DenseMatrix> {
        if self.kind().is_scalar() {
            let w = self.scalar_w(t, x)?;
            return Ok(x.matmul_unchecked(&w.transpose()));
        }
        let grid = self.blocks(t, x)?;
        let (d, n) = (self.d(), self.n());
        let mut out = DenseMatrix::zeros(d, n);
        let columns: Vec<Vec<f64>> = (0..n).map(|j| x.column(j)).collect();
        for i in 0..n {
            let mut acc = vec![0.0; d];
            for (j, col) in columns.iter().enumerate() {
                let b = grid.block(i, j);
                for (r, a) in acc.iter_mut().enumerate() {
                    *a += (0..d).map(|k| b[(r, k)] * col[k]).sum::<f64>();
                }
            }
            out.set_column(i, &acc);
        }
        Ok(out)
    }

    /// `x'` on the stacked state: `(W ⊗ I_d) x` for scalar kinds, the block
    /// matrix times `x` for matrix kinds.
    pub fn rhs_vector_form(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let state = StateMatrix::unstack(x, self.d(), self.n())?;
        let lifted = if self.kind().is_scalar() {
            kronecker_with_identity(&self.scalar_w(t, &state)?, self.d())?
        } else {
            self.blocks(t, &state)?.to_block_matrix()
        };
        lifted.matvec(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_consensus() -> CoupledSystem {
        let w = DenseMatrix::from_rows(&[[-1.0, 1.0, 0.0], [1.0, -2.0, 1.0], [0.0, 1.0, -1.0]]).unwrap();
        CoupledSystem::new(CouplingSpec::scalar_constant(w, 2).unwrap(), "path")
    }

    #[test]
    fn zero_coupling_gives_zero_rhs() {
        let sys = CoupledSystem::new(CouplingSpec::scalar_constant(DenseMatrix::zeros(3, 3), 2).unwrap(), "zero");
        let x = StateMatrix::new(DenseMatrix::from_fn(2, 3, |i, j| (i + 2 * j) as f64));
        assert!(sys.assemble_scalar_w(0.0, &x).unwrap().is_zero());
        assert!(sys.rhs_matrix_form(0.0, &x).unwrap().is_zero());
        assert!(sys.rhs_vector_form(0.0, &x.stack()).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_agent_decay() {
        let sys = CoupledSystem::new(
            CouplingSpec::scalar_constant(DenseMatrix::from_rows(&[[-1.0]]).unwrap(), 1).unwrap(),
            "decay",
        );
        let x = StateMatrix::new(DenseMatrix::from_rows(&[[2.0]]).unwrap());
        assert_eq!(sys.rhs_matrix_form(0.0, &x).unwrap()[(0, 0)], -2.0);
    }

    #[test]
    fn path_consensus_on_collinear_state() {
        // X W^T by hand: column i = sum_j w_ij x_j.
        let sys = path_consensus();
        let x = StateMatrix::new(DenseMatrix::from_rows(&[[0.0, 1.0, 2.0], [0.0, 1.0, 2.0]]).unwrap());
        let expected = DenseMatrix::from_rows(&[[1.0, 0.0, -1.0], [1.0, 0.0, -1.0]]).unwrap();
        assert_eq!(sys.rhs_matrix_form(0.0, &x).unwrap(), expected);
        let v = sys.rhs_vector_form(0.0, &x.stack()).unwrap();
        let stacked = stack(&expected);
        for (a, b) in v.iter().zip(&stacked) {
            assert!((a - b).abs() <= 1e-14);
        }
    }

    #[test]
    fn swap_coupling_vector_form() {
        let w = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let sys = CoupledSystem::new(CouplingSpec::scalar_constant(w, 1).unwrap(), "swap");
        assert_eq!(sys.rhs_vector_form(0.0, &[3.0, -5.0]).unwrap(), vec![-5.0, 3.0]);
        assert!(matches!(sys.rhs_vector_form(0.0, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn kind_mismatch_errors() {
        let sys = path_consensus();
        let x = StateMatrix::zeros(2, 3);
        assert!(matches!(sys.assemble_block_matrix(0.0, &x), Err(Error::KindMismatch { .. })));
        let m = CoupledSystem::new(CouplingSpec::matrix_constant(BlockGrid::zeros(2, 2)).unwrap(), "m");
        assert!(matches!(
            m.assemble_scalar_w(0.0, &StateMatrix::zeros(2, 2)),
            Err(Error::KindMismatch { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_in_state() {
        let sys = path_consensus();
        assert!(matches!(
            sys.rhs_matrix_form(0.0, &StateMatrix::zeros(3, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn block_matrix_examples() {
        let grid = BlockGrid::zeros(2, 2);
        let sys = CoupledSystem::new(CouplingSpec::matrix_constant(grid).unwrap(), "zero");
        assert!(sys.assemble_block_matrix(0.0, &StateMatrix::zeros(2, 2)).unwrap().is_zero());

        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let mut grid = BlockGrid::zeros(2, 2);
        grid.set_block(0, 0, a.clone());
        grid.set_block(1, 1, a.clone());
        let sys = CoupledSystem::new(CouplingSpec::matrix_constant(grid).unwrap(), "diag");
        let m = sys.assemble_block_matrix(0.0, &StateMatrix::zeros(2, 2)).unwrap();
        assert_eq!(m.block(0, 0, 2, 2), a);
        assert_eq!(m.block(2, 2, 2, 2), a);
        assert!(m.block(0, 2, 2, 2).is_zero() && m.block(2, 0, 2, 2).is_zero());
    }

    #[test]
    fn evaluator_shape_is_checked() {
        let spec = CouplingSpec::scalar_time_varying(3, 1, |_| DenseMatrix::zeros(2, 2)).unwrap();
        let sys = CoupledSystem::new(spec, "bad");
        assert!(matches!(
            sys.rhs_matrix_form(0.0, &StateMatrix::zeros(1, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn stack_roundtrip() {
        let x = StateMatrix::new(DenseMatrix::from_fn(3, 2, |i, j| (10 * j + i) as f64));
        assert_eq!(x.stack(), vec![0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        assert_eq!(StateMatrix::unstack(&x.stack(), 3, 2).unwrap(), x);
    }
}
