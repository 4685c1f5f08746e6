//! Builders for networked systems over a graph.
//!
//! Edge `(i, j)` of a directed graph means agent `i` listens to `j`
//! (`j` is a neighbor of `i`). Undirected edges act in both directions with
//! the same weight. Indices are 0-based.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, DenseMatrix, DEFAULT_RANK_TOL};
use crate::system::{BlockGrid, CoupledSystem, CouplingKind, CouplingSpec, StateMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    directed: bool,
}

impl Graph {
    pub fn new(n: usize, edges: Vec<Edge>, directed: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph needs at least one vertex".into()));
        }
        let mut seen = HashSet::new();
        for e in &edges {
            if e.i >= n || e.j >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) out of range for {n} vertices",
                    e.i, e.j
                )));
            }
            if e.i == e.j {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {}", e.i)));
            }
            if !e.weight.is_finite() {
                return Err(Error::InvalidGraph(format!("non-finite weight on edge ({}, {})", e.i, e.j)));
            }
            let key = if directed { (e.i, e.j) } else { (e.i.min(e.j), e.i.max(e.j)) };
            if !seen.insert(key) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({}, {})", e.i, e.j)));
            }
        }
        Ok(Self { n, edges, directed })
    }

    /// Undirected graph from `(i, j, weight)` triples.
    pub fn undirected(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        Self::new(n, edges.iter().map(|&(i, j, weight)| Edge { i, j, weight }).collect(), false)
    }

    pub fn directed(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        Self::new(n, edges.iter().map(|&(i, j, weight)| Edge { i, j, weight }).collect(), true)
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|k| (k - 1, k, 1.0)).collect();
        Self::undirected(n, &edges)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGraph(format!("cycle needs at least 3 vertices, got {n}")));
        }
        let edges: Vec<_> = (0..n).map(|k| (k, (k + 1) % n, 1.0)).collect();
        Self::undirected(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j, 1.0));
            }
        }
        Self::undirected(n, &edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// `(listener, neighbor, edge index)` for every directed action;
    /// undirected edges appear twice.
    pub fn arcs(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(2 * self.edges.len());
        for (k, e) in self.edges.iter().enumerate() {
            out.push((e.i, e.j, k));
            if !self.directed {
                out.push((e.j, e.i, k));
            }
        }
        out
    }

    /// Laplacian-type weight matrix: `w_ij = a_ij`, `w_ii = -sum_j a_ij`.
    pub fn consensus_matrix(&self) -> DenseMatrix {
        let mut w = DenseMatrix::zeros(self.n, self.n);
        for (i, j, k) in self.arcs() {
            let a = self.edges[k].weight;
            w[(i, j)] += a;
            w[(i, i)] -= a;
        }
        w
    }
}

/// Constant-weight consensus `x_i' = sum_j a_ij (x_j - x_i)`.
pub fn consensus(graph: &Graph, d: usize) -> Result<CoupledSystem> {
    let spec = CouplingSpec::scalar_constant(graph.consensus_matrix(), d)?;
    Ok(CoupledSystem::new(spec, "consensus"))
}

/// Consensus with every weight scaled by `profile(t)`.
pub fn consensus_with_profile(
    graph: &Graph,
    d: usize,
    profile: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> Result<CoupledSystem> {
    let base = graph.consensus_matrix();
    let spec = CouplingSpec::scalar_time_varying(graph.n(), d, move |t| base.scale(profile(t)))?;
    Ok(CoupledSystem::new(spec, "consensus (time-varying)"))
}

pub type GainFn = dyn Fn(f64) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum Gain {
    /// `g(e) = e`
    Quadratic,
    Custom(Arc<GainFn>),
}

impl Gain {
    pub fn custom(g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Gain::Custom(Arc::new(g))
    }

    pub fn eval(&self, e: f64) -> f64 {
        match self {
            Gain::Quadratic => e,
            Gain::Custom(g) => g(e),
        }
    }
}

impl fmt::Debug for Gain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gain::Quadratic => f.write_str("Quadratic"),
            Gain::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Desired inter-agent distances, one per graph edge in edge order.
#[derive(Debug, Clone)]
pub struct FormationTarget {
    pub distances: Vec<f64>,
    pub gain: Gain,
}

impl FormationTarget {
    pub fn quadratic(distances: Vec<f64>) -> Self {
        Self {
            distances,
            gain: Gain::Quadratic,
        }
    }
}

fn squared_distance(x: &DenseMatrix, i: usize, j: usize) -> f64 {
    (0..x.rows()).map(|k| (x[(k, i)] - x[(k, j)]).powi(2)).sum()
}

/// Distance-based formation control
/// `x_i' = -sum_j g(||x_i - x_j||^2 - d_ij^2) (x_i - x_j)`.
pub fn distance_formation(graph: &Graph, target: FormationTarget, d: usize) -> Result<CoupledSystem> {
    if graph.is_directed() {
        return Err(Error::InvalidGraph("formation control needs an undirected graph".into()));
    }
    if !(d == 2 || d == 3) {
        return Err(Error::InvalidArgument(format!("formation dimension must be 2 or 3, got {d}")));
    }
    if target.distances.len() != graph.edges().len() {
        return Err(Error::DimensionMismatch {
            context: "formation distances",
            expected: format!("{} (one per edge)", graph.edges().len()),
            found: target.distances.len().to_string(),
        });
    }
    if let Some(bad) = target.distances.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(format!("desired distances must be positive, got {bad}")));
    }
    let g0 = target.gain.eval(0.0);
    if g0.abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("gain must vanish at zero, g(0) = {g0}")));
    }
    let n = graph.n();
    let edges: Vec<(usize, usize, f64)> = graph
        .edges()
        .iter()
        .zip(&target.distances)
        .map(|(e, &dist)| (e.i, e.j, dist * dist))
        .collect();
    let gain = target.gain;
    let spec = CouplingSpec::scalar_state_dependent(n, d, move |_, x| {
        let mut w = DenseMatrix::zeros(n, n);
        for &(i, j, d2) in &edges {
            let g = gain.eval(squared_distance(x, i, j) - d2);
            w[(i, j)] += g;
            w[(j, i)] += g;
            w[(i, i)] -= g;
            w[(j, j)] -= g;
        }
        w
    })?;
    Ok(CoupledSystem::new(spec, "distance formation"))
}

/// Formation potential `(1/4) sum_edges e_ij^2`; the quadratic-gain
/// formation flow is its negative gradient.
pub fn formation_potential(graph: &Graph, distances: &[f64], x: &DenseMatrix) -> f64 {
    graph
        .edges()
        .iter()
        .zip(distances)
        .map(|(e, &dist)| (squared_distance(x, e.i, e.j) - dist * dist).powi(2))
        .sum::<f64>()
        / 4.0
}

/// Affine coordination `x_i' = sum_j u_ij(t, X) (x_j - x_i)`; `u` is called
/// as `u(i, j, t, X)` for each directed action.
pub fn affine_coordination(
    graph: &Graph,
    d: usize,
    u: impl Fn(usize, usize, f64, &DenseMatrix) -> f64 + Send + Sync + 'static,
) -> Result<CoupledSystem> {
    let n = graph.n();
    let arcs: Vec<(usize, usize)> = graph.arcs().into_iter().map(|(i, j, _)| (i, j)).collect();
    let spec = CouplingSpec::scalar_state_dependent(n, d, move |t, x| {
        let mut w = DenseMatrix::zeros(n, n);
        for &(i, j) in &arcs {
            let v = u(i, j, t, x);
            w[(i, j)] += v;
            w[(i, i)] -= v;
        }
        w
    })?;
    debug_assert_eq!(spec.kind(), CouplingKind::ScalarStateDependent);
    Ok(CoupledSystem::new(spec, "affine coordination"))
}

fn check_blocks(context: &'static str, blocks: &[DenseMatrix], count: usize, d: usize) -> Result<()> {
    if blocks.len() != count {
        return Err(Error::DimensionMismatch {
            context,
            expected: count.to_string(),
            found: blocks.len().to_string(),
        });
    }
    for b in blocks {
        if b.shape() != (d, d) {
            return Err(Error::dims(context, (d, d), b.shape()));
        }
    }
    Ok(())
}

fn edge_block_grid(graph: &Graph, d: usize, diag: &[DenseMatrix], edge: impl Fn(usize) -> DenseMatrix) -> BlockGrid {
    let mut grid = BlockGrid::zeros(graph.n(), d);
    for (i, a) in diag.iter().enumerate() {
        grid.set_block(i, i, a.clone());
    }
    for (i, j, k) in graph.arcs() {
        let q = edge(k);
        let wij = grid.block(i, j) + &q;
        grid.set_block(i, j, wij);
        let wii = grid.block(i, i) - &q;
        grid.set_block(i, i, wii);
    }
    grid
}

/// `W_ij = Q_ij`, `W_ii = -sum_j Q_ij`; one block per edge, shared by both
/// directions of an undirected edge.
pub fn matrix_weighted_consensus(graph: &Graph, q: &[DenseMatrix], d: usize) -> Result<CoupledSystem> {
    check_blocks("edge weight blocks", q, graph.edges().len(), d)?;
    let zeros = vec![DenseMatrix::zeros(d, d); graph.n()];
    let grid = edge_block_grid(graph, d, &zeros, |k| q[k].clone());
    Ok(CoupledSystem::new(CouplingSpec::matrix_constant(grid)?, "matrix-weighted consensus"))
}

/// Linear synchronization `x_i' = A_i x_i - sum_j b_ij(t) (x_i - x_j)` with
/// `b_ij(t) = weight * profile(t)` (profile defaults to 1).
pub fn linear_sync_type1(
    graph: &Graph,
    a: &[DenseMatrix],
    profile: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
) -> Result<CoupledSystem> {
    let d = a.first().map(|m| m.rows()).unwrap_or(0);
    if d == 0 {
        return Err(Error::InvalidArgument("agent drift matrices required".into()));
    }
    check_blocks("agent drift matrices", a, graph.n(), d)?;
    let eye = DenseMatrix::identity(d);
    let weights: Vec<f64> = graph.edges().iter().map(|e| e.weight).collect();
    let label = "linear synchronization (type I)";
    match profile {
        None => {
            let grid = edge_block_grid(graph, d, a, |k| eye.scale(weights[k]));
            Ok(CoupledSystem::new(CouplingSpec::matrix_constant(grid)?, label))
        }
        Some(p) => {
            let graph = graph.clone();
            let a = a.to_vec();
            let spec = CouplingSpec::matrix_time_varying(graph.n(), d, move |t| {
                let s = p(t);
                edge_block_grid(&graph, d, &a, |k| eye.scale(weights[k] * s))
            })?;
            Ok(CoupledSystem::new(spec, label))
        }
    }
}

/// Linear synchronization with matrix couplings: `W_ij = B_ij`,
/// `W_ii = A_i - sum_j B_ij`.
pub fn linear_sync_type2(graph: &Graph, a: &[DenseMatrix], b: &[DenseMatrix]) -> Result<CoupledSystem> {
    let d = a.first().map(|m| m.rows()).unwrap_or(0);
    if d == 0 {
        return Err(Error::InvalidArgument("agent drift matrices required".into()));
    }
    check_blocks("agent drift matrices", a, graph.n(), d)?;
    check_blocks("edge coupling blocks", b, graph.edges().len(), d)?;
    let grid = edge_block_grid(graph, d, a, |k| b[k].clone());
    Ok(CoupledSystem::new(
        CouplingSpec::matrix_constant(grid)?,
        "linear synchronization (type II)",
    ))
}

/// General linear system `x_i' = sum_j A_ij x_j` with the grid used verbatim.
pub fn collinear_general(grid: BlockGrid) -> Result<CoupledSystem> {
    Ok(CoupledSystem::new(CouplingSpec::matrix_constant(grid)?, "collinear system"))
}

/// Seeded `d x n` state of numerical rank `r`, the product of Gaussian
/// `d x r` and `r x n` factors.
pub fn random_state_with_rank(d: usize, n: usize, r: usize, seed: u64) -> Result<StateMatrix> {
    if d == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!("state shape must be positive, got {d}x{n}")));
    }
    if r > d.min(n) {
        return Err(Error::InvalidArgument(format!("rank {r} exceeds min({d}, {n})")));
    }
    if r == 0 {
        return Ok(StateMatrix::zeros(d, n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let left = DenseMatrix::from_fn(d, r, |_, _| draw());
    let right = DenseMatrix::from_fn(r, n, |_, _| draw());
    let x = left.matmul_unchecked(&right);
    let got = numerical_rank(&x, DEFAULT_RANK_TOL)?;
    if got != r {
        return Err(Error::DegenerateInput(format!(
            "seed {seed} produced rank {got}, requested {r}"
        )));
    }
    Ok(StateMatrix::new(x))
}

/// Seeded `n x n` symmetric state with `p` positive, `q` negative and
/// `n - p - q` zero eigenvalues: `U diag(..) U^T` for a random orthogonal
/// `U` and eigenvalue magnitudes in `[0.5, 2)`.
pub fn random_symmetric_state(n: usize, p: usize, q: usize, seed: u64) -> Result<StateMatrix> {
    if n == 0 || p + q > n {
        return Err(Error::InvalidArgument(format!("signature ({p}, {q}) does not fit order {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DenseMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let u = crate::linalg::svd(&g)?.u;
    let mags: Vec<f64> = (0..n).map(|_| 0.5 + 1.5 * rand::Rng::random::<f64>(&mut rng)).collect();
    let diag: Vec<f64> = (0..n)
        .map(|k| {
            if k < p {
                mags[k]
            } else if k < p + q {
                -mags[k]
            } else {
                0.0
            }
        })
        .collect();
    let s = u.matmul_unchecked(&DenseMatrix::from_diagonal(&diag)).matmul_unchecked(&u.transpose());
    // Exact symmetry.
    let s = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    Ok(StateMatrix::new(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::signature;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn graph_validation() {
        assert!(Graph::undirected(3, &[(0, 0, 1.0)]).is_err());
        assert!(Graph::undirected(3, &[(0, 3, 1.0)]).is_err());
        assert!(Graph::undirected(3, &[(0, 1, 1.0), (1, 0, 1.0)]).is_err());
        assert!(Graph::directed(3, &[(0, 1, 1.0), (1, 0, 1.0)]).is_ok());
        assert!(Graph::new(0, vec![], false).is_err());
        assert_eq!(Graph::complete(4).unwrap().edges().len(), 6);
        assert_eq!(Graph::cycle(5).unwrap().edges().len(), 5);
    }

    #[test]
    fn consensus_examples() {
        let w = Graph::path(3).unwrap().consensus_matrix();
        assert_eq!(w, m(&[&[-1.0, 1.0, 0.0], &[1.0, -2.0, 1.0], &[0.0, 1.0, -1.0]]));
        assert_eq!(Graph::path(1).unwrap().consensus_matrix(), DenseMatrix::zeros(1, 1));
        let k2 = Graph::undirected(2, &[(0, 1, 3.0)]).unwrap();
        assert_eq!(k2.consensus_matrix(), m(&[&[-3.0, 3.0], &[3.0, -3.0]]));
    }

    #[test]
    fn directed_consensus_rows_sum_to_zero() {
        let g = Graph::directed(3, &[(0, 1, 2.0), (2, 0, 0.5)]).unwrap();
        let w = g.consensus_matrix();
        assert_eq!(w[(0, 1)], 2.0);
        assert_eq!(w[(1, 0)], 0.0);
        for i in 0..3 {
            assert_eq!((0..3).map(|j| w[(i, j)]).sum::<f64>(), 0.0);
        }
    }

    #[test]
    fn formation_at_target_is_stationary() {
        let g = Graph::complete(3).unwrap();
        let sys = distance_formation(&g, FormationTarget::quadratic(vec![1.0; 3]), 2).unwrap();
        let h = 3f64.sqrt() / 2.0;
        let x = StateMatrix::new(m(&[&[0.0, 1.0, 0.5], &[0.0, 0.0, h]]));
        assert!(sys.rhs_matrix_form(0.0, &x).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn formation_two_agents() {
        let g = Graph::path(2).unwrap();
        let sys = distance_formation(&g, FormationTarget::quadratic(vec![1.5]), 2).unwrap();
        let x = StateMatrix::new(m(&[&[0.0, 2.0], &[0.0, 0.0]]));
        let dx = sys.rhs_matrix_form(0.0, &x).unwrap();
        let e = 4.0 - 2.25;
        assert!((dx[(0, 0)] - (-e * (0.0 - 2.0))).abs() < 1e-14);
        assert!((dx[(0, 1)] + dx[(0, 0)]).abs() < 1e-14);
    }

    #[test]
    fn formation_rejects_bad_input() {
        let g = Graph::path(2).unwrap();
        let dg = Graph::directed(2, &[(0, 1, 1.0)]).unwrap();
        assert!(distance_formation(&dg, FormationTarget::quadratic(vec![1.0]), 2).is_err());
        assert!(distance_formation(&g, FormationTarget::quadratic(vec![1.0]), 4).is_err());
        assert!(distance_formation(&g, FormationTarget::quadratic(vec![-1.0]), 2).is_err());
        assert!(distance_formation(&g, FormationTarget::quadratic(vec![]), 2).is_err());
        let t = FormationTarget {
            distances: vec![1.0],
            gain: Gain::custom(|e| e + 1.0),
        };
        assert!(distance_formation(&g, t, 2).is_err());
    }

    #[test]
    fn coordination_reductions() {
        let g = Graph::complete(3).unwrap();
        let zero = affine_coordination(&g, 2, |_, _, _, _| 0.0).unwrap();
        let x = random_state_with_rank(2, 3, 2, 1).unwrap();
        assert!(zero.rhs_matrix_form(0.0, &x).unwrap().is_zero());
        let unit = affine_coordination(&g, 2, |_, _, _, _| 1.0).unwrap();
        let cons = consensus(&g, 2).unwrap();
        let diff = &unit.rhs_matrix_form(0.3, &x).unwrap() - &cons.rhs_matrix_form(0.3, &x).unwrap();
        assert!(diff.max_abs() < 1e-15);
    }

    #[test]
    fn matrix_weighted_blocks() {
        let g = Graph::path(2).unwrap();
        let q = DenseMatrix::from_diagonal(&[1.0, 2.0]);
        let sys = matrix_weighted_consensus(&g, std::slice::from_ref(&q), 2).unwrap();
        let grid = sys.block_grid(0.0, &StateMatrix::zeros(2, 2)).unwrap();
        assert_eq!(grid.block(0, 1), &q);
        assert_eq!(grid.block(1, 0), &q);
        assert_eq!(grid.block(0, 0), &q.scale(-1.0));
        assert!(matrix_weighted_consensus(&g, &[DenseMatrix::identity(3)], 2).is_err());
    }

    #[test]
    fn sync_type1_blocks() {
        let g = Graph::undirected(2, &[(0, 1, 0.5)]).unwrap();
        let a = vec![m(&[&[0.0, 1.0], &[-1.0, 0.0]]); 2];
        let sys = linear_sync_type1(&g, &a, None).unwrap();
        let grid = sys.block_grid(0.0, &StateMatrix::zeros(2, 2)).unwrap();
        assert_eq!(grid.block(0, 1), &DenseMatrix::identity(2).scale(0.5));
        assert_eq!(grid.block(1, 1), &m(&[&[-0.5, 1.0], &[-1.0, -0.5]]));

        let tv = linear_sync_type1(&g, &a, Some(Arc::new(|t: f64| 2.0 + t))).unwrap();
        assert_eq!(tv.kind(), CouplingKind::MatrixTimeVarying);
        let grid = tv.block_grid(1.0, &StateMatrix::zeros(2, 2)).unwrap();
        assert_eq!(grid.block(1, 0), &DenseMatrix::identity(2).scale(1.5));
    }

    #[test]
    fn sync_type2_equals_type1_for_scalar_blocks() {
        let g = Graph::path(3).unwrap();
        let a = vec![m(&[&[0.1, 0.2], &[0.0, -0.3]]); 3];
        let b = vec![DenseMatrix::identity(2); 2];
        let s1 = linear_sync_type1(&g, &a, None).unwrap();
        let s2 = linear_sync_type2(&g, &a, &b).unwrap();
        let x = StateMatrix::zeros(2, 3);
        assert_eq!(s1.block_grid(0.0, &x).unwrap(), s2.block_grid(0.0, &x).unwrap());
    }

    #[test]
    fn random_states() {
        let x = random_state_with_rank(3, 5, 2, 7).unwrap();
        assert_eq!(numerical_rank(&x, DEFAULT_RANK_TOL).unwrap(), 2);
        assert_eq!(x.matrix(), random_state_with_rank(3, 5, 2, 7).unwrap().matrix());
        assert!(random_state_with_rank(3, 5, 4, 7).is_err());
        assert!(random_state_with_rank(3, 5, 0, 7).unwrap().is_zero());

        let s = random_symmetric_state(4, 2, 1, 3).unwrap();
        let sig = signature(&s, 1e-8).unwrap();
        assert_eq!((sig.positive, sig.negative, sig.zero), (2, 1, 1));
    }
}
