//! Running a scenario: integrate, evaluate diagnostics, judge verdicts.

use serde::Serialize;

use rankflow::diagnostics::{
    check_collinearity_class, check_rank_invariance, check_row_subspace_preservation, check_signature_preservation,
    check_subspace_preservation, grassmann_drift, CollinearityReport, InvarianceReport,
};
use rankflow::integrate::{oracle_error, TrajectoryMeta};
use rankflow::models;
use rankflow::structure::{check_rank_structure, sample_along, StructureVerdict, Violation};
use rankflow::{integrate, CoupledSystem, CouplingKind, Error, IntegratorConfig, StateMatrix, Trajectory};

use crate::build::{build, BuiltModel};
use crate::error::{CliError, Result};
use crate::scenario::{Diagnostic, InitialState, Scenario};

/// Violations kept in a report; the count is always exact.
const MAX_LISTED_VIOLATIONS: usize = 20;

#[derive(Debug, Clone, Serialize)]
pub struct GrassmannReport {
    pub holds: bool,
    pub threshold: f64,
    pub max_distance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_changed_at: Option<f64>,
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StructureReport {
    pub rank_preserving_form: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symmetric_form: Option<bool>,
    pub tol: f64,
    pub samples: usize,
    pub max_residual: f64,
    pub violation_count: usize,
    pub violations: Vec<Violation>,
}

impl StructureReport {
    pub fn from_verdict(v: &StructureVerdict, tol: f64) -> Self {
        Self {
            rank_preserving_form: v.rank_preserving_form,
            symmetric_form: v.symmetric_form,
            tol,
            samples: v.sample_times.len(),
            max_residual: v.max_residual,
            violation_count: v.violations.len(),
            violations: v.violations.iter().take(MAX_LISTED_VIOLATIONS).cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub diagnostic: Diagnostic,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matches: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub name: String,
    pub scenario: Scenario,
    pub model: String,
    pub system: String,
    pub kind: CouplingKind,
    pub n: usize,
    pub d: usize,
    pub horizon: [f64; 2],
    pub integrator: IntegratorConfig,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<TrajectoryMeta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<InvarianceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subspace: Option<InvarianceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row_subspace: Option<InvarianceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grassmann: Option<GrassmannReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signature: Option<InvarianceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collinearity: Option<CollinearityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureReport>,
    pub verdicts: Vec<Verdict>,
}

impl Report {
    /// Verdicts whose outcome contradicts the expectation.
    pub fn mismatches(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| v.matches == Some(false))
    }

    pub fn all_match(&self) -> bool {
        self.mismatches().next().is_none()
    }
}

pub struct Outcome {
    pub report: Report,
    pub trajectory: Trajectory,
}

pub fn initial_state(s: &Scenario) -> Result<StateMatrix> {
    // Validation guarantees a seed for random states.
    let fallback = s.seed.unwrap_or_default();
    match &s.x0 {
        InitialState::Explicit(rows) => {
            let m = rankflow::DenseMatrix::from_rows(rows).map_err(|e| CliError::input(format!("x0: {e}")))?;
            if m.rows() == 0 || m.cols() == 0 {
                return Err(CliError::input("x0: empty state"));
            }
            if !m.is_finite() {
                return Err(CliError::input("x0: non-finite entries"));
            }
            Ok(StateMatrix::new(m))
        }
        InitialState::Random(r) => Ok(models::random_state_with_rank(r.d, r.n, r.rank, r.seed.unwrap_or(fallback))?),
        InitialState::RandomSymmetric(r) => Ok(models::random_symmetric_state(
            r.n,
            r.positive,
            r.negative,
            r.seed.unwrap_or(fallback),
        )?),
    }
}

/// Expectations implied by the coupling structure alone.
fn default_expectation(
    diag: Diagnostic,
    kind: CouplingKind,
    model: &BuiltModel,
    structure: Option<&StructureVerdict>,
) -> Option<bool> {
    let rank_form = structure.map(|v| v.rank_preserving_form);
    match diag {
        Diagnostic::Rank => kind.is_scalar().then_some(true).or(rank_form.filter(|&b| b)),
        Diagnostic::Subspace | Diagnostic::Grassmann => kind.is_scalar().then_some(true),
        Diagnostic::Structure => kind.is_scalar().then_some(true),
        Diagnostic::Signature => structure.and_then(|v| v.symmetric_form).filter(|&b| b),
        Diagnostic::Collinearity => model.affine_invariant.then_some(true),
        Diagnostic::RowSubspace => None,
    }
}

fn grassmann(traj: &Trajectory, rel_tol: f64, threshold: f64) -> Result<GrassmannReport> {
    match grassmann_drift(traj, rel_tol) {
        Ok(series) => {
            let max_distance = series.max_distance();
            Ok(GrassmannReport {
                holds: max_distance <= threshold,
                threshold,
                max_distance,
                rank_changed_at: None,
                times: series.times,
                distances: series.distances,
            })
        }
        Err(Error::RankNotConstant { t, .. }) => Ok(GrassmannReport {
            holds: false,
            threshold,
            max_distance: f64::NAN,
            rank_changed_at: Some(t),
            times: Vec::new(),
            distances: Vec::new(),
        }),
        Err(e) => Err(e.into()),
    }
}

pub fn run(s: &Scenario) -> Result<Outcome> {
    let x0 = initial_state(s)?;
    let (d, n) = x0.shape();
    let model = build(&s.model, &s.params, d, n)?;
    let sys: &CoupledSystem = &model.system;
    let config = s.integrator.to_config()?;
    let [t0, t1] = s.horizon;
    let traj = integrate(sys, &x0, t0, t1, &config)?;
    let tol = &s.tolerances;
    let kind = sys.kind();

    let wants = |d: Diagnostic| s.diagnostics.contains(&d);
    let needs_structure =
        wants(Diagnostic::Structure) || (!kind.is_scalar() && (wants(Diagnostic::Rank) || wants(Diagnostic::Signature)));
    let structure = if needs_structure {
        Some(check_rank_structure(&sample_along(sys, &traj)?, tol.structure_tol)?)
    } else {
        None
    };

    let mut report = Report {
        name: s.label().to_string(),
        scenario: s.clone(),
        model: s.model.clone(),
        system: sys.label.clone(),
        kind,
        n,
        d,
        horizon: s.horizon,
        integrator: config,
        samples: traj.len(),
        meta: traj.meta().cloned(),
        oracle_error: if kind.is_constant() { Some(oracle_error(&traj, sys)?) } else { None },
        rank: None,
        subspace: None,
        row_subspace: None,
        grassmann: None,
        signature: None,
        collinearity: None,
        structure: None,
        verdicts: Vec::new(),
    };

    let mut seen = Vec::new();
    for &diag in &s.diagnostics {
        if seen.contains(&diag) {
            continue;
        }
        seen.push(diag);
        let holds = match diag {
            Diagnostic::Rank => {
                let r = check_rank_invariance(&traj, tol.rank_rel_tol)?;
                let h = r.holds;
                report.rank = Some(r);
                h
            }
            Diagnostic::Subspace => {
                let r = check_subspace_preservation(&traj, tol.rank_rel_tol, tol.subspace_threshold)?;
                let h = r.holds;
                report.subspace = Some(r);
                h
            }
            Diagnostic::RowSubspace => {
                let r = check_row_subspace_preservation(&traj, tol.rank_rel_tol, tol.subspace_threshold)?;
                let h = r.holds;
                report.row_subspace = Some(r);
                h
            }
            Diagnostic::Grassmann => {
                let r = grassmann(&traj, tol.rank_rel_tol, tol.subspace_threshold)?;
                let h = r.holds;
                report.grassmann = Some(r);
                h
            }
            Diagnostic::Signature => {
                let r = check_signature_preservation(&traj, tol.rank_rel_tol)?;
                let h = r.holds;
                report.signature = Some(r);
                h
            }
            Diagnostic::Collinearity => {
                let r = check_collinearity_class(&traj, tol.rank_rel_tol)?;
                let h = r.affine.holds;
                report.collinearity = Some(r);
                h
            }
            Diagnostic::Structure => {
                let v = structure.as_ref().expect("structure evaluated when requested");
                report.structure = Some(StructureReport::from_verdict(v, tol.structure_tol));
                v.rank_preserving_form
            }
        };
        let expected = s
            .expect
            .get(&diag)
            .copied()
            .or_else(|| default_expectation(diag, kind, &model, structure.as_ref()));
        report.verdicts.push(Verdict {
            diagnostic: diag,
            holds,
            expected,
            matches: expected.map(|e| e == holds),
        });
    }
    Ok(Outcome {
        report,
        trajectory: traj,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn scenario(text: &str) -> Scenario {
        Scenario::from_json(text, Path::new("<test>")).unwrap()
    }

    #[test]
    fn consensus_verdicts_match_defaults() {
        let s = scenario(
            r#"{"model": "consensus", "params": {"graph": {"kind": "cycle", "n": 4}},
                "x0": {"random": {"d": 3, "n": 4, "rank": 2, "seed": 1}}, "horizon": [0, 2],
                "diagnostics": ["rank", "subspace", "grassmann", "structure"]}"#,
        );
        let out = run(&s).unwrap();
        assert_eq!(out.report.verdicts.len(), 4);
        assert!(out.report.verdicts.iter().all(|v| v.holds && v.matches == Some(true)));
        assert!(out.report.oracle_error.unwrap() < 1e-7);
        assert_eq!(out.report.samples, 21);
    }

    #[test]
    fn explicit_expectation_overrides_default() {
        let s = scenario(
            r#"{"model": "consensus", "params": {"graph": {"kind": "path", "n": 2}},
                "x0": {"explicit": [[1, 2]]}, "horizon": [0, 1], "expect": {"rank": false}}"#,
        );
        let out = run(&s).unwrap();
        assert_eq!(out.report.verdicts[0].matches, Some(false));
        assert!(!out.report.all_match());
    }

    #[test]
    fn dimension_error_is_input() {
        let s = scenario(
            r#"{"model": "consensus", "params": {"graph": {"kind": "path", "n": 3}},
                "x0": {"explicit": [[1, 2]]}, "horizon": [0, 1]}"#,
        );
        assert!(matches!(run(&s), Err(CliError::Input(_))));
    }

    #[test]
    fn grassmann_reports_rank_change() {
        let s = scenario(
            r#"{"model": "collinear_general",
                "params": {"blocks": [[[[0, 0], [0, 0]], [[0, 0], [1, 0]]], [[[0, 0], [0, 0]], [[0, 0], [0, 0]]]]},
                "x0": {"explicit": [[1, 1], [0, 0]]}, "horizon": [0, 1],
                "diagnostics": ["rank", "grassmann", "structure"]}"#,
        );
        let r = run(&s).unwrap().report;
        let g = r.grassmann.unwrap();
        assert!(!g.holds && g.rank_changed_at.is_some());
        assert!(!r.structure.unwrap().rank_preserving_form);
        assert_eq!(r.verdicts[0].expected, None);
    }
}
