//! Scenario file schema.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rankflow::diagnostics::DEFAULT_SUBSPACE_THRESHOLD;
use rankflow::linalg::DEFAULT_RANK_TOL;
use rankflow::structure::DEFAULT_STRUCTURE_TOL;
use rankflow::{IntegratorConfig, Method};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub model: String,
    #[serde(default)]
    pub params: serde_json::Value,
    pub x0: InitialState,
    pub horizon: [f64; 2],
    #[serde(default)]
    pub integrator: IntegratorSettings,
    #[serde(default = "default_diagnostics")]
    pub diagnostics: Vec<Diagnostic>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputPaths,
    /// Fallback seed for random initial states without their own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Expected verdicts, overriding the defaults `verify` derives from the
    /// coupling structure.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub expect: BTreeMap<Diagnostic, bool>,
}

fn default_diagnostics() -> Vec<Diagnostic> {
    vec![Diagnostic::Rank, Diagnostic::Subspace]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnostic {
    Rank,
    Subspace,
    RowSubspace,
    Grassmann,
    Signature,
    Collinearity,
    Structure,
}

impl Diagnostic {
    pub fn name(self) -> &'static str {
        match self {
            Diagnostic::Rank => "rank",
            Diagnostic::Subspace => "subspace",
            Diagnostic::RowSubspace => "row_subspace",
            Diagnostic::Grassmann => "grassmann",
            Diagnostic::Signature => "signature",
            Diagnostic::Collinearity => "collinearity",
            Diagnostic::Structure => "structure",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// `d` rows of `n` entries; column `j` is agent `j`.
    Explicit(Vec<Vec<f64>>),
    Random(RandomState),
    RandomSymmetric(RandomSymmetric),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomState {
    pub d: usize,
    pub n: usize,
    pub rank: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSymmetric {
    pub n: usize,
    pub positive: usize,
    pub negative: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    #[default]
    Dp54,
    Rk4,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSettings {
    #[serde(default)]
    pub method: MethodName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_interval: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
}

impl IntegratorSettings {
    pub fn to_config(&self) -> Result<IntegratorConfig> {
        let base = IntegratorConfig::default();
        let method = match self.method {
            MethodName::Dp54 => {
                if self.h.is_some() {
                    return Err(CliError::input("integrator: `h` applies to rk4 only"));
                }
                let (rtol, atol) = match base.method {
                    Method::Dp54 { rtol, atol } => (rtol, atol),
                    Method::Rk4 { .. } => unreachable!(),
                };
                Method::Dp54 {
                    rtol: self.rtol.unwrap_or(rtol),
                    atol: self.atol.unwrap_or(atol),
                }
            }
            MethodName::Rk4 => {
                if self.rtol.is_some() || self.atol.is_some() {
                    return Err(CliError::input("integrator: `rtol`/`atol` apply to dp54 only"));
                }
                Method::Rk4 {
                    h: self.h.unwrap_or(0.01),
                }
            }
        };
        let cfg = IntegratorConfig {
            method,
            sample_interval: self.sample_interval.unwrap_or(base.sample_interval),
            max_steps: self.max_steps.unwrap_or(base.max_steps),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "rank_tol")]
    pub rank_rel_tol: f64,
    #[serde(default = "subspace_threshold")]
    pub subspace_threshold: f64,
    #[serde(default = "structure_tol")]
    pub structure_tol: f64,
}

fn rank_tol() -> f64 {
    DEFAULT_RANK_TOL
}

fn subspace_threshold() -> f64 {
    DEFAULT_SUBSPACE_THRESHOLD
}

fn structure_tol() -> f64 {
    DEFAULT_STRUCTURE_TOL
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_rel_tol: rank_tol(),
            subspace_threshold: subspace_threshold(),
            structure_tol: structure_tol(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_json: Option<PathBuf>,
}

impl Scenario {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|source| CliError::Json {
            path: origin.to_path_buf(),
            source,
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        let [t0, t1] = self.horizon;
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(CliError::input(format!("horizon must satisfy t0 < t1, got [{t0}, {t1}]")));
        }
        let tol = &self.tolerances;
        for (name, v) in [
            ("rank_rel_tol", tol.rank_rel_tol),
            ("subspace_threshold", tol.subspace_threshold),
            ("structure_tol", tol.structure_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::input(format!("tolerances.{name} must be positive, got {v}")));
            }
        }
        self.integrator.to_config()?;
        let own_seed = match &self.x0 {
            InitialState::Random(r) => Some(r.seed),
            InitialState::RandomSymmetric(r) => Some(r.seed),
            InitialState::Explicit(_) => None,
        };
        if own_seed == Some(None) && self.seed.is_none() {
            return Err(CliError::input("random x0 needs a seed (in x0 or at top level)"));
        }
        Ok(())
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.model)
    }

    /// Replaces every seed in the scenario.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = Some(seed);
        match &mut self.x0 {
            InitialState::Random(r) => r.seed = Some(seed),
            InitialState::RandomSymmetric(r) => r.seed = Some(seed),
            InitialState::Explicit(_) => {}
        }
    }
}
