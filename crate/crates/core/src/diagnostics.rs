//! Invariance verdicts over sampled trajectories.
//!
//! Every check compares each sample against the value at the first sample.
//! Verdicts are about the sampled finite horizon only; nothing here says
//! anything about limits as `t` grows without bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::Trajectory;
use crate::linalg::{
    asymmetry, orthonormal_basis, principal_angles, projector_distance, rank_from_singular_values,
    signature_from_eigenvalues, svd, sym_eigen, DenseMatrix, Signature, SubspaceBasis, SYMMETRY_TOL,
};
use crate::par;

/// Default threshold on projector distance for subspace checks.
pub const DEFAULT_SUBSPACE_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Principle {
    RankInvariance,
    SubspacePreservation,
    RowSubspacePreservation,
    SignaturePreservation,
    Collinearity,
    Coplanarity,
}

/// Geometric class of a point set by the rank of its coordinate matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometricClass {
    /// Rank 0.
    Coincident,
    /// Rank 1.
    Collinear,
    /// Rank 2.
    Planar,
    /// Rank 3 or more.
    Spatial,
}

impl GeometricClass {
    pub fn from_rank(rank: usize) -> Self {
        match rank {
            0 => GeometricClass::Coincident,
            1 => GeometricClass::Collinear,
            2 => GeometricClass::Planar,
            _ => GeometricClass::Spatial,
        }
    }

    /// At most one-dimensional.
    pub fn is_collinear(self) -> bool {
        matches!(self, GeometricClass::Coincident | GeometricClass::Collinear)
    }

    /// At most two-dimensional.
    pub fn is_coplanar(self) -> bool {
        !matches!(self, GeometricClass::Spatial)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum InitialValue {
    Rank(usize),
    Signature(Signature),
    Basis(SubspaceBasis),
    Class(GeometricClass),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub t: f64,
    pub deviation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signature: Option<Signature>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<GeometricClass>,
}

impl SampleRecord {
    fn new(t: f64, deviation: f64) -> Self {
        Self {
            t,
            deviation,
            rank: None,
            signature: None,
            class: None,
        }
    }
}

/// Verdict for one principle over a trajectory.
///
/// If the verdict fails, `worst_time` is the first sample that breaks it;
/// otherwise it is the sample with the largest deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub principle: Principle,
    pub holds: bool,
    pub threshold: f64,
    pub initial_value: InitialValue,
    pub worst_deviation: f64,
    pub worst_time: f64,
    pub samples: Vec<SampleRecord>,
}

impl InvarianceReport {
    fn assemble(
        principle: Principle,
        threshold: f64,
        initial_value: InitialValue,
        samples: Vec<SampleRecord>,
        ok: impl Fn(&SampleRecord) -> bool,
    ) -> Self {
        let first_bad = samples.iter().find(|s| !ok(s)).map(|s| s.t);
        let (worst_deviation, mut worst_time) = samples
            .iter()
            .fold((0.0_f64, samples[0].t), |(d, t), s| if s.deviation > d { (s.deviation, s.t) } else { (d, t) });
        if let Some(t) = first_bad {
            worst_time = t;
        }
        Self {
            principle,
            holds: first_bad.is_none(),
            threshold,
            initial_value,
            worst_deviation,
            worst_time,
            samples,
        }
    }
}

/// Rank and leakage `sigma_{r0+1} / sigma_1` of one matrix.
fn rank_and_leakage(m: &DenseMatrix, rel_tol: f64, r0: usize) -> Result<(usize, f64)> {
    let s = svd(m)?.singular_values;
    let rank = rank_from_singular_values(&s, rel_tol);
    let leak = match (s.first(), s.get(r0)) {
        (Some(&max), Some(&next)) if max > 0.0 => next / max,
        _ => 0.0,
    };
    Ok((rank, leak))
}

fn check_tol(rel_tol: f64) -> Result<()> {
    if !(rel_tol > 0.0 && rel_tol.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "relative tolerance must be positive, got {rel_tol}"
        )));
    }
    Ok(())
}

pub fn rank_trajectory(traj: &Trajectory, rel_tol: f64) -> Result<Vec<usize>> {
    check_tol(rel_tol)?;
    par::try_map(traj.states(), |x| {
        Ok(rank_from_singular_values(&svd(x.matrix())?.singular_values, rel_tol))
    })
}

/// Rank of `X(t)` must equal the rank of `X(t0)` at every sample. The
/// per-sample deviation is `sigma_{r+1}(t) / sigma_1(t)`, the relative size
/// of the first direction outside the initial rank.
pub fn check_rank_invariance(traj: &Trajectory, rel_tol: f64) -> Result<InvarianceReport> {
    check_tol(rel_tol)?;
    let r0 = rank_from_singular_values(&svd(traj.initial_state().matrix())?.singular_values, rel_tol);
    let per_sample = par::try_map(traj.states(), |x| rank_and_leakage(x.matrix(), rel_tol, r0))?;
    let samples = traj
        .times()
        .iter()
        .zip(per_sample)
        .map(|(&t, (rank, leak))| SampleRecord {
            rank: Some(rank),
            ..SampleRecord::new(t, leak)
        })
        .collect();
    Ok(InvarianceReport::assemble(
        Principle::RankInvariance,
        rel_tol,
        InitialValue::Rank(r0),
        samples,
        |s| s.rank == Some(r0),
    ))
}

fn span_report(
    principle: Principle,
    times: &[f64],
    mats: &[DenseMatrix],
    rel_tol: f64,
    threshold: f64,
) -> Result<InvarianceReport> {
    check_tol(rel_tol)?;
    let b0 = orthonormal_basis(&mats[0], rel_tol)?;
    if b0.rank() == 0 {
        return Err(Error::DegenerateInput("initial state matrix is numerically zero".into()));
    }
    let per_sample = par::try_map(mats, |m| {
        let b = orthonormal_basis(m, rel_tol)?;
        Ok::<_, Error>((b.rank(), projector_distance(&b, &b0)?))
    })?;
    let samples = times
        .iter()
        .zip(per_sample)
        .map(|(&t, (rank, dist))| SampleRecord {
            rank: Some(rank),
            ..SampleRecord::new(t, dist)
        })
        .collect();
    Ok(InvarianceReport::assemble(
        principle,
        threshold,
        InitialValue::Basis(b0),
        samples,
        |s| s.deviation <= threshold,
    ))
}

/// Column span of `X(t)` against the span of `X(t0)` by projector
/// distance.
pub fn check_subspace_preservation(traj: &Trajectory, rel_tol: f64, threshold: f64) -> Result<InvarianceReport> {
    let mats: Vec<DenseMatrix> = traj.states().iter().map(|s| s.matrix().clone()).collect();
    span_report(Principle::SubspacePreservation, traj.times(), &mats, rel_tol, threshold)
}

/// Row span of `X(t)`, i.e. the column span of `X(t)^T`.
pub fn check_row_subspace_preservation(
    traj: &Trajectory,
    rel_tol: f64,
    threshold: f64,
) -> Result<InvarianceReport> {
    let mats: Vec<DenseMatrix> = traj.states().iter().map(|s| s.matrix().transpose()).collect();
    span_report(Principle::RowSubspacePreservation, traj.times(), &mats, rel_tol, threshold)
}

/// Largest principal angle between `span X(t)` and `span X(t0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrassmannDriftSeries {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub ranks: Vec<usize>,
}

impl GrassmannDriftSeries {
    pub fn max_distance(&self) -> f64 {
        self.distances.iter().copied().fold(0.0, f64::max)
    }
}

pub fn grassmann_drift(traj: &Trajectory, rel_tol: f64) -> Result<GrassmannDriftSeries> {
    check_tol(rel_tol)?;
    let bases = par::try_map(traj.states(), |x| orthonormal_basis(x.matrix(), rel_tol))?;
    let r0 = bases[0].rank();
    if let Some((t, b)) = traj.times().iter().zip(&bases).find(|(_, b)| b.rank() != r0) {
        return Err(Error::RankNotConstant {
            t: *t,
            expected: r0,
            found: b.rank(),
        });
    }
    let distances = if r0 == 0 {
        vec![0.0; bases.len()]
    } else {
        par::try_map(&bases, |b| {
            Ok::<_, Error>(principal_angles(&bases[0], b)?.last().copied().unwrap_or(0.0))
        })?
    };
    Ok(GrassmannDriftSeries {
        times: traj.times().to_vec(),
        distances,
        ranks: vec![r0; bases.len()],
    })
}

/// Signature of each (square, symmetric) sample; the zero threshold is
/// relative to the largest absolute eigenvalue of that sample.
pub fn signature_trajectory(traj: &Trajectory, rel_tol: f64) -> Result<Vec<Signature>> {
    check_tol(rel_tol)?;
    let items: Vec<(f64, &DenseMatrix)> = traj.samples().map(|(t, x)| (t, x.matrix())).collect();
    par::try_map(&items, |&(t, x)| {
        let residual = asymmetry(x)?;
        if residual > SYMMETRY_TOL {
            return Err(Error::AsymmetricSample { t, residual });
        }
        Ok(signature_from_eigenvalues(&sym_eigen(x)?.eigenvalues, rel_tol))
    })
}

/// Signature must equal the initial signature at every sample. Deviation
/// is the total count difference.
pub fn check_signature_preservation(traj: &Trajectory, rel_tol: f64) -> Result<InvarianceReport> {
    let sigs = signature_trajectory(traj, rel_tol)?;
    let s0 = sigs[0];
    let samples = traj
        .times()
        .iter()
        .zip(&sigs)
        .map(|(&t, s)| SampleRecord {
            signature: Some(*s),
            ..SampleRecord::new(t, s.distance(&s0) as f64)
        })
        .collect();
    Ok(InvarianceReport::assemble(
        Principle::SignaturePreservation,
        0.0,
        InitialValue::Signature(s0),
        samples,
        |s| s.deviation == 0.0,
    ))
}

/// Through-origin and affine (centered) class verdicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollinearityReport {
    pub through_origin: InvarianceReport,
    pub affine: InvarianceReport,
}

/// `X C` with `C = I - (1/n) 1 1^T`: agent positions relative to their
/// centroid.
pub fn centered(x: &DenseMatrix) -> DenseMatrix {
    let (d, n) = x.shape();
    let mut out = x.clone();
    for i in 0..d {
        let mean = (0..n).map(|j| x[(i, j)]).sum::<f64>() / n as f64;
        for j in 0..n {
            out[(i, j)] -= mean;
        }
    }
    out
}

fn class_report(principle: Principle, times: &[f64], mats: &[DenseMatrix], rel_tol: f64) -> Result<InvarianceReport> {
    let r0 = rank_from_singular_values(&svd(&mats[0])?.singular_values, rel_tol);
    let c0 = GeometricClass::from_rank(r0);
    let per_sample = par::try_map(mats, |m| rank_and_leakage(m, rel_tol, r0))?;
    let samples = times
        .iter()
        .zip(per_sample)
        .map(|(&t, (rank, leak))| SampleRecord {
            rank: Some(rank),
            class: Some(GeometricClass::from_rank(rank)),
            ..SampleRecord::new(t, leak)
        })
        .collect();
    Ok(InvarianceReport::assemble(
        principle,
        rel_tol,
        InitialValue::Class(c0),
        samples,
        |s| s.class == Some(c0),
    ))
}

/// Collinearity (2-D) or coplanarity (3-D) class of agent positions at
/// each sample, read two ways: as the span through the origin (`rank X`)
/// and as an affine configuration (`rank X C`). Each verdict holds when the
/// class never changes; the deviation is `sigma_{k+1} / sigma_1` with `k`
/// the initial rank.
pub fn check_collinearity_class(traj: &Trajectory, rel_tol: f64) -> Result<CollinearityReport> {
    check_tol(rel_tol)?;
    let d = traj.initial_state().dim();
    let principle = match d {
        2 => Principle::Collinearity,
        3 => Principle::Coplanarity,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "collinearity classes are defined for d = 2 or 3, got d = {d}"
            )))
        }
    };
    let raw: Vec<DenseMatrix> = traj.states().iter().map(|s| s.matrix().clone()).collect();
    let cen: Vec<DenseMatrix> = raw.iter().map(centered).collect();
    Ok(CollinearityReport {
        through_origin: class_report(principle, traj.times(), &raw, rel_tol)?,
        affine: class_report(principle, traj.times(), &cen, rel_tol)?,
    })
}
