//! Inputs for `check-structure`: sampled block grids, or a scenario whose
//! couplings are sampled along its own trajectory.

use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use rankflow::structure::{check_rank_structure, check_symmetric_structure, sample_along, BlockSample};
use rankflow::{integrate, BlockGrid, DenseMatrix};

use crate::build::build;
use crate::error::{CliError, Result};
use crate::run::{initial_state, StructureReport};
use crate::scenario::Scenario;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSample {
    t: f64,
    /// `blocks[i][j]` is the `d x d` block coupling agent `j` into agent `i`.
    blocks: Vec<Vec<DenseMatrix>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleFile {
    samples: Vec<RawSample>,
    #[serde(default)]
    tol: Option<f64>,
}

pub struct StructureInput {
    pub samples: Vec<BlockSample>,
    pub tol: f64,
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> CliError + '_ {
    move |source| CliError::Json {
        path: path.to_path_buf(),
        source,
    }
}

pub fn parse(text: &str, origin: &Path) -> Result<StructureInput> {
    let value: Value = serde_json::from_str(text).map_err(json_err(origin))?;
    if value.get("samples").is_some() {
        let file: SampleFile = serde_json::from_value(value).map_err(json_err(origin))?;
        if file.samples.is_empty() {
            return Err(CliError::input("no samples"));
        }
        let samples = file
            .samples
            .into_iter()
            .map(|s| {
                Ok(BlockSample {
                    t: s.t,
                    blocks: BlockGrid::from_rows(s.blocks)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let tol = file.tol.unwrap_or(rankflow::structure::DEFAULT_STRUCTURE_TOL);
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(CliError::input(format!("tol must be positive, got {tol}")));
        }
        return Ok(StructureInput { samples, tol });
    }
    let scenario = Scenario::from_json(text, origin)?;
    let x0 = initial_state(&scenario)?;
    let (d, n) = x0.shape();
    let model = build(&scenario.model, &scenario.params, d, n)?;
    let [t0, t1] = scenario.horizon;
    let traj = integrate(&model.system, &x0, t0, t1, &scenario.integrator.to_config()?)?;
    Ok(StructureInput {
        samples: sample_along(&model.system, &traj)?,
        tol: scenario.tolerances.structure_tol,
    })
}

pub fn load(path: &Path) -> Result<StructureInput> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text, path)
}

/// Runs the requested check; `symmetric` requires square states.
pub fn check(input: &StructureInput, symmetric: bool) -> Result<StructureReport> {
    let verdict = if symmetric {
        check_symmetric_structure(&input.samples, input.tol)?
    } else {
        check_rank_structure(&input.samples, input.tol)?
    };
    Ok(StructureReport::from_verdict(&verdict, input.tol))
}
