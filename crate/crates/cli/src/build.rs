//! Model construction from scenario parameters.

use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use rankflow::models::{self, Edge, FormationTarget, Gain, Graph};
use rankflow::structure::{build_from_decomposition, MatrixFunction};
use rankflow::{BlockGrid, CoupledSystem, CouplingSpec, DenseMatrix};

use crate::error::{CliError, Result};

pub const MODELS: &[&str] = &[
    "linear_network",
    "consensus",
    "distance_formation",
    "affine_coordination",
    "matrix_weighted_consensus",
    "linear_sync_type1",
    "linear_sync_type2",
    "collinear_general",
    "decomposition",
    "symmetric_congruence",
];

pub struct BuiltModel {
    pub system: CoupledSystem,
    /// Couplings are symmetric with zero row sums, so the affine
    /// (centered) configuration class is invariant as well.
    pub affine_invariant: bool,
}

type Rows = Vec<Vec<f64>>;

fn matrix(context: &str, rows: &Rows) -> Result<DenseMatrix> {
    DenseMatrix::from_rows(rows).map_err(|e| CliError::input(format!("{context}: {e}")))
}

fn square(context: &str, rows: &Rows, size: usize) -> Result<DenseMatrix> {
    let m = matrix(context, rows)?;
    if m.shape() != (size, size) {
        return Err(CliError::input(format!(
            "{context}: expected {size}x{size}, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(m)
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum NamedGraph {
    Path,
    Cycle,
    Complete,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EdgeSpec {
    Weighted(usize, usize, f64),
    Unit(usize, usize),
    Object(Edge),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GraphSpec {
    Named {
        kind: NamedGraph,
        n: usize,
    },
    Explicit {
        n: usize,
        edges: Vec<EdgeSpec>,
        #[serde(default)]
        directed: bool,
    },
}

impl GraphSpec {
    fn build(&self, n_state: usize) -> Result<Graph> {
        let graph = match self {
            GraphSpec::Named { kind, n } => match kind {
                NamedGraph::Path => Graph::path(*n),
                NamedGraph::Cycle => Graph::cycle(*n),
                NamedGraph::Complete => Graph::complete(*n),
            },
            GraphSpec::Explicit { n, edges, directed } => {
                let edges = edges
                    .iter()
                    .map(|e| match *e {
                        EdgeSpec::Weighted(i, j, weight) => Edge { i, j, weight },
                        EdgeSpec::Unit(i, j) => Edge { i, j, weight: 1.0 },
                        EdgeSpec::Object(e) => e,
                    })
                    .collect();
                Graph::new(*n, edges, *directed)
            }
        }?;
        if graph.n() != n_state {
            return Err(CliError::input(format!(
                "x0 has {n_state} agents (columns) but the graph has {m}; expected a d x {m} state",
                m = graph.n()
            )));
        }
        Ok(graph)
    }
}

/// Scalar time profile `p(t)`.
#[derive(Deserialize, Clone, Copy)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum Profile {
    Constant {
        value: f64,
    },
    /// `offset + amplitude * sin(frequency * t + phase)`
    Sinusoid {
        #[serde(default = "one")]
        offset: f64,
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Profile {
    fn eval(self, t: f64) -> f64 {
        match self {
            Profile::Constant { value } => value,
            Profile::Sinusoid {
                offset,
                amplitude,
                frequency,
                phase,
            } => offset + amplitude * (frequency * t + phase).sin(),
        }
    }
}

fn params<T: DeserializeOwned>(model: &str, value: &Value) -> Result<T> {
    let value = if value.is_null() { Value::Object(Default::default()) } else { value.clone() };
    serde_json::from_value(value).map_err(|e| CliError::input(format!("params for model `{model}`: {e}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearNetworkParams {
    w: Rows,
    #[serde(default)]
    profile: Option<Profile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConsensusParams {
    graph: GraphSpec,
    #[serde(default)]
    profile: Option<Profile>,
}

#[derive(Deserialize, Clone, Copy, Default)]
#[serde(rename_all = "snake_case")]
enum GainName {
    #[default]
    Quadratic,
    Tanh,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FormationParams {
    graph: GraphSpec,
    #[serde(default)]
    distances: Option<Vec<f64>>,
    #[serde(default)]
    distance: Option<f64>,
    #[serde(default)]
    gain: GainName,
}

#[derive(Deserialize, Clone, Copy)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum CoordinationGain {
    Constant {
        value: f64,
    },
    Sinusoid {
        #[serde(default = "one")]
        offset: f64,
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `gain / (1 + ||x_i - x_j||^2)`
    InverseDistance {
        gain: f64,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CoordinationParams {
    graph: GraphSpec,
    u: CoordinationGain,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixWeightedParams {
    graph: GraphSpec,
    #[serde(default)]
    q: Option<Vec<Rows>>,
    #[serde(default)]
    q_all: Option<Rows>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SyncParams {
    graph: GraphSpec,
    #[serde(default)]
    a: Option<Vec<Rows>>,
    #[serde(default)]
    a_all: Option<Rows>,
    #[serde(default)]
    b: Option<Vec<Rows>>,
    #[serde(default)]
    b_all: Option<Rows>,
    #[serde(default)]
    profile: Option<Profile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BlocksParams {
    blocks: Vec<Vec<Rows>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecompositionParams {
    a: Rows,
    #[serde(default)]
    b: Option<Rows>,
    #[serde(default)]
    a1: Option<Rows>,
    #[serde(default)]
    b1: Option<Rows>,
    #[serde(default = "one")]
    frequency: f64,
}

/// One matrix per item, or a shared one repeated `count` times.
fn per_item(context: &str, each: &Option<Vec<Rows>>, all: &Option<Rows>, count: usize, d: usize) -> Result<Vec<DenseMatrix>> {
    match (each, all) {
        (Some(list), None) => {
            if list.len() != count {
                return Err(CliError::input(format!("{context}: expected {count} matrices, got {}", list.len())));
            }
            list.iter().map(|m| square(context, m, d)).collect()
        }
        (None, Some(m)) => Ok(vec![square(context, m, d)?; count]),
        (None, None) => Err(CliError::input(format!("{context}: give either a list or a shared `_all` matrix"))),
        (Some(_), Some(_)) => Err(CliError::input(format!("{context}: give a list or a shared matrix, not both"))),
    }
}

fn sinusoidal(m0: DenseMatrix, m1: Option<DenseMatrix>, frequency: f64) -> MatrixFunction {
    match m1 {
        None => MatrixFunction::Constant(m0),
        Some(m1) => MatrixFunction::time_varying(move |t| &m0 + &m1.scale((frequency * t).sin())),
    }
}

pub fn build(model: &str, value: &Value, d: usize, n: usize) -> Result<BuiltModel> {
    let scalar = |system: CoupledSystem, affine_invariant: bool| Ok(BuiltModel {
        system,
        affine_invariant,
    });
    match model {
        "linear_network" => {
            let p: LinearNetworkParams = params(model, value)?;
            let w = square("w", &p.w, n)?;
            let spec = match p.profile {
                None => CouplingSpec::scalar_constant(w, d)?,
                Some(prof) => CouplingSpec::scalar_time_varying(n, d, move |t| w.scale(prof.eval(t)))?,
            };
            scalar(CoupledSystem::new(spec, "linear network"), false)
        }
        "consensus" => {
            let p: ConsensusParams = params(model, value)?;
            let graph = p.graph.build(n)?;
            let symmetric = !graph.is_directed();
            let sys = match p.profile {
                None => models::consensus(&graph, d)?,
                Some(prof) => models::consensus_with_profile(&graph, d, move |t| prof.eval(t))?,
            };
            scalar(sys, symmetric)
        }
        "distance_formation" => {
            let p: FormationParams = params(model, value)?;
            let graph = p.graph.build(n)?;
            let distances = match (p.distances, p.distance) {
                (Some(list), None) => list,
                (None, Some(v)) => vec![v; graph.edges().len()],
                _ => return Err(CliError::input("distance_formation: give `distances` (per edge) or `distance`")),
            };
            let gain = match p.gain {
                GainName::Quadratic => Gain::Quadratic,
                GainName::Tanh => Gain::custom(f64::tanh),
            };
            let sys = models::distance_formation(&graph, FormationTarget { distances, gain }, d)?;
            scalar(sys, true)
        }
        "affine_coordination" => {
            let p: CoordinationParams = params(model, value)?;
            let graph = p.graph.build(n)?;
            let symmetric = !graph.is_directed();
            let u = p.u;
            let sys = models::affine_coordination(&graph, d, move |i, j, t, x| match u {
                CoordinationGain::Constant { value } => value,
                CoordinationGain::Sinusoid {
                    offset,
                    amplitude,
                    frequency,
                    phase,
                } => offset + amplitude * (frequency * t + phase).sin(),
                CoordinationGain::InverseDistance { gain } => {
                    let r2: f64 = (0..x.rows()).map(|k| (x[(k, i)] - x[(k, j)]).powi(2)).sum();
                    gain / (1.0 + r2)
                }
            })?;
            scalar(sys, symmetric)
        }
        "matrix_weighted_consensus" => {
            let p: MatrixWeightedParams = params(model, value)?;
            let graph = p.graph.build(n)?;
            let q = per_item("q", &p.q, &p.q_all, graph.edges().len(), d)?;
            scalar(models::matrix_weighted_consensus(&graph, &q, d)?, false)
        }
        "linear_sync_type1" => {
            let p: SyncParams = params(model, value)?;
            if p.b.is_some() || p.b_all.is_some() {
                return Err(CliError::input("linear_sync_type1 takes scalar edge weights from the graph, not `b`"));
            }
            let graph = p.graph.build(n)?;
            let a = per_item("a", &p.a, &p.a_all, n, d)?;
            let profile = p
                .profile
                .map(|prof| Arc::new(move |t: f64| prof.eval(t)) as Arc<dyn Fn(f64) -> f64 + Send + Sync>);
            scalar(models::linear_sync_type1(&graph, &a, profile)?, false)
        }
        "linear_sync_type2" => {
            let p: SyncParams = params(model, value)?;
            if p.profile.is_some() {
                return Err(CliError::input("linear_sync_type2 has constant couplings; drop `profile`"));
            }
            let graph = p.graph.build(n)?;
            let a = per_item("a", &p.a, &p.a_all, n, d)?;
            let b = per_item("b", &p.b, &p.b_all, graph.edges().len(), d)?;
            scalar(models::linear_sync_type2(&graph, &a, &b)?, false)
        }
        "collinear_general" => {
            let p: BlocksParams = params(model, value)?;
            if p.blocks.len() != n {
                return Err(CliError::input(format!("blocks: expected {n} block rows, got {}", p.blocks.len())));
            }
            let rows = p
                .blocks
                .iter()
                .map(|row| row.iter().map(|b| square("blocks", b, d)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            scalar(models::collinear_general(BlockGrid::from_rows(rows)?)?, false)
        }
        "decomposition" => {
            let p: DecompositionParams = params(model, value)?;
            let a = square("a", &p.a, d)?;
            let b = match &p.b {
                Some(rows) => square("b", rows, n)?,
                None => DenseMatrix::zeros(n, n),
            };
            let a1 = p.a1.as_ref().map(|m| square("a1", m, d)).transpose()?;
            let b1 = p.b1.as_ref().map(|m| square("b1", m, n)).transpose()?;
            let spec = build_from_decomposition(sinusoidal(a, a1, p.frequency), sinusoidal(b, b1, p.frequency), n, d)?;
            scalar(CoupledSystem::new(spec, "drift/coupling decomposition"), false)
        }
        "symmetric_congruence" => {
            let p: DecompositionParams = params(model, value)?;
            if p.b.is_some() || p.b1.is_some() {
                return Err(CliError::input("symmetric_congruence uses B = A^T; drop `b`/`b1`"));
            }
            if d != n {
                return Err(CliError::input(format!("symmetric_congruence needs a square state, got {d}x{n}")));
            }
            let a = square("a", &p.a, d)?;
            let a1 = p.a1.as_ref().map(|m| square("a1", m, d)).transpose()?;
            let (at, a1t) = (a.transpose(), a1.as_ref().map(DenseMatrix::transpose));
            let spec =
                build_from_decomposition(sinusoidal(a, a1, p.frequency), sinusoidal(at, a1t, p.frequency), n, d)?;
            scalar(CoupledSystem::new(spec, "symmetric congruence"), false)
        }
        other => Err(CliError::input(format!(
            "unknown model `{other}` (known: {})",
            MODELS.join(", ")
        ))),
    }
}
