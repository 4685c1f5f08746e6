//! Time integration of matrix flows `X' = F(t, X)` and the exact solution
//! of constant-coupling systems through the matrix exponential.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matrix_exponential, DenseMatrix};
use crate::system::{CoupledSystem, StateMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    /// Classical Runge-Kutta with a fixed nominal step.
    Rk4 { h: f64 },
    /// Dormand-Prince 5(4) with embedded error control.
    Dp54 { rtol: f64, atol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    #[serde(flatten)]
    pub method: Method,
    pub sample_interval: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Dp54 {
                rtol: 1e-9,
                atol: 1e-12,
            },
            sample_interval: 0.1,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn dp54(rtol: f64, atol: f64, sample_interval: f64) -> Self {
        Self {
            method: Method::Dp54 { rtol, atol },
            sample_interval,
            ..Self::default()
        }
    }

    pub fn rk4(h: f64, sample_interval: f64) -> Self {
        Self {
            method: Method::Rk4 { h },
            sample_interval,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
            }
        };
        match self.method {
            Method::Rk4 { h } => positive("h", h)?,
            Method::Dp54 { rtol, atol } => {
                positive("rtol", rtol)?;
                positive("atol", atol)?;
            }
        }
        positive("sample_interval", self.sample_interval)?;
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub method: Method,
    pub rhs_evaluations: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// Sampled solution of a matrix flow.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<StateMatrix>,
    meta: Option<TrajectoryMeta>,
}

impl Trajectory {
    /// Trajectory from externally produced samples (no integration
    /// metadata). Times must be strictly increasing and states finite and
    /// of one shape.
    pub fn from_samples(times: Vec<f64>, states: Vec<StateMatrix>) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return Err(Error::InvalidArgument(format!(
                "trajectory needs matching non-empty times and states ({} vs {})",
                times.len(),
                states.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("trajectory times must be finite and strictly increasing".into()));
        }
        let shape = states[0].shape();
        for (t, s) in times.iter().zip(&states) {
            if s.shape() != shape {
                return Err(Error::dims("trajectory sample", shape, s.shape()));
            }
            if !s.is_finite() {
                return Err(Error::NonFiniteState { t: *t });
            }
        }
        Ok(Self {
            times,
            states,
            meta: None,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[StateMatrix] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn initial_state(&self) -> &StateMatrix {
        &self.states[0]
    }

    pub fn final_state(&self) -> &StateMatrix {
        self.states.last().expect("trajectory is non-empty")
    }

    pub fn meta(&self) -> Option<&TrajectoryMeta> {
        self.meta.as_ref()
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, &StateMatrix)> {
        self.times.iter().copied().zip(&self.states)
    }
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4_step<F>(rhs: &mut F, t: f64, x: &DenseMatrix, h: f64) -> Result<DenseMatrix>
where
    F: FnMut(f64, &DenseMatrix) -> Result<DenseMatrix>,
{
    let stage = |k: DenseMatrix, at: f64| if k.is_finite() { Ok(k) } else { Err(Error::NonFiniteState { t: at }) };
    let k1 = stage(rhs(t, x)?, t)?;
    let mut y = x.clone();
    y.axpy(0.5 * h, &k1);
    let k2 = stage(rhs(t + 0.5 * h, &y)?, t + 0.5 * h)?;
    let mut y = x.clone();
    y.axpy(0.5 * h, &k2);
    let k3 = stage(rhs(t + 0.5 * h, &y)?, t + 0.5 * h)?;
    let mut y = x.clone();
    y.axpy(h, &k3);
    let k4 = stage(rhs(t + h, &y)?, t + h)?;

    let mut out = x.clone();
    out.axpy(h / 6.0, &k1);
    out.axpy(h / 3.0, &k2);
    out.axpy(h / 3.0, &k3);
    out.axpy(h / 6.0, &k4);
    if !out.is_finite() {
        return Err(Error::NonFiniteState { t: t + h });
    }
    Ok(out)
}

fn sample_grid(t0: f64, t1: f64, dt: f64) -> Result<Vec<f64>> {
    let span = t1 - t0;
    let count = span / dt;
    if count > 1e7 {
        return Err(Error::InvalidArgument(format!(
            "sample interval {dt} gives more than 1e7 samples over [{t0}, {t1}]"
        )));
    }
    let mut grid = Vec::with_capacity(count.ceil() as usize + 1);
    let mut k = 1u64;
    loop {
        let t = t0 + k as f64 * dt;
        if t >= t1 - 1e-9 * dt {
            break;
        }
        grid.push(t);
        k += 1;
    }
    grid.push(t1);
    Ok(grid)
}

/// Integrates the system from `x0` over `[t0, t1]`.
pub fn integrate(
    sys: &CoupledSystem,
    x0: &StateMatrix,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    sys.check_state(x0)?;
    integrate_flow(|t, x| sys.rhs(t, x), x0, t0, t1, cfg)
}

/// Integrates an arbitrary matrix flow `X' = F(t, X)`.
///
/// Samples land on `t0 + k * sample_interval` and on `t1`; steps are
/// shortened to end exactly on each sample time.
pub fn integrate_flow<F>(
    mut rhs: F,
    x0: &StateMatrix,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory>
where
    F: FnMut(f64, &DenseMatrix) -> Result<DenseMatrix>,
{
    cfg.validate()?;
    if !t0.is_finite() || !t1.is_finite() || t1 <= t0 {
        return Err(Error::InvalidArgument(format!("horizon must satisfy t0 < t1, got [{t0}, {t1}]")));
    }
    if !x0.is_finite() {
        return Err(Error::NonFiniteState { t: t0 });
    }
    let grid = sample_grid(t0, t1, cfg.sample_interval)?;
    let mut times = Vec::with_capacity(grid.len() + 1);
    let mut states = Vec::with_capacity(grid.len() + 1);
    times.push(t0);
    states.push(x0.clone());

    let mut counted = |t: f64, x: &DenseMatrix, evals: &mut usize| {
        *evals += 1;
        rhs(t, x)
    };
    let mut meta = TrajectoryMeta {
        method: cfg.method,
        rhs_evaluations: 0,
        accepted_steps: 0,
        rejected_steps: 0,
    };

    match cfg.method {
        Method::Rk4 { h } => {
            let mut x = x0.matrix().clone();
            let mut t = t0;
            for &target in &grid {
                let gap = target - t;
                let substeps = (gap / h - 1e-9).ceil().max(1.0) as usize;
                let step = gap / substeps as f64;
                for k in 0..substeps {
                    if meta.accepted_steps >= cfg.max_steps {
                        return Err(Error::StepLimit { t, limit: cfg.max_steps });
                    }
                    let ts = t + k as f64 * step;
                    let mut evals = 0;
                    x = rk4_step(&mut |s, y| counted(s, y, &mut evals), ts, &x, step)?;
                    meta.rhs_evaluations += evals;
                    meta.accepted_steps += 1;
                }
                t = target;
                times.push(t);
                states.push(StateMatrix::new(x.clone()));
            }
        }
        Method::Dp54 { rtol, atol } => {
            let mut stepper = DormandPrince::new(rtol, atol, t1 - t0, cfg.max_steps);
            let mut x = x0.matrix().clone();
            let mut t = t0;
            let mut k1 = counted(t, &x, &mut meta.rhs_evaluations)?;
            if !k1.is_finite() {
                return Err(Error::NonFiniteState { t });
            }
            stepper.h = stepper.initial_step(&mut counted, &mut meta.rhs_evaluations, t, &x, &k1)?;
            for &target in &grid {
                while t < target {
                    stepper.advance(&mut counted, &mut meta, &mut t, &mut x, &mut k1, target)?;
                }
                times.push(target);
                states.push(StateMatrix::new(x.clone()));
            }
        }
    }
    Ok(Trajectory {
        times,
        states,
        meta: Some(meta),
    })
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus the embedded fourth-order ones.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct DormandPrince {
    rtol: f64,
    atol: f64,
    h: f64,
    h_min: f64,
    h_max: f64,
    max_steps: usize,
    last_rejected: bool,
}

type Counted<'a> = dyn FnMut(f64, &DenseMatrix, &mut usize) -> Result<DenseMatrix> + 'a;

impl DormandPrince {
    fn new(rtol: f64, atol: f64, span: f64, max_steps: usize) -> Self {
        Self {
            rtol,
            atol,
            h: 0.0,
            h_min: 1e-12 * span,
            h_max: span,
            max_steps,
            last_rejected: false,
        }
    }

    fn scaled_norm(&self, v: &DenseMatrix, x: &DenseMatrix, y: Option<&DenseMatrix>) -> f64 {
        let n = v.as_slice().len().max(1) as f64;
        let sum: f64 = v
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let mag = match y {
                    Some(y) => x.as_slice()[i].abs().max(y.as_slice()[i].abs()),
                    None => x.as_slice()[i].abs(),
                };
                let r = e / (self.atol + self.rtol * mag);
                r * r
            })
            .sum();
        (sum / n).sqrt()
    }

    fn initial_step(
        &self,
        rhs: &mut Counted<'_>,
        evals: &mut usize,
        t: f64,
        x: &DenseMatrix,
        f0: &DenseMatrix,
    ) -> Result<f64> {
        let d0 = self.scaled_norm(x, x, None);
        let d1 = self.scaled_norm(f0, x, None);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.h_max);
        let mut y = x.clone();
        y.axpy(h0, f0);
        let f1 = rhs(t + h0, &y, evals)?;
        let d2 = self.scaled_norm(&(&f1 - f0), x, None) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        Ok((100.0 * h0).min(h1).min(self.h_max).max(self.h_min))
    }

    fn advance(
        &mut self,
        rhs: &mut Counted<'_>,
        meta: &mut TrajectoryMeta,
        t: &mut f64,
        x: &mut DenseMatrix,
        k1: &mut DenseMatrix,
        target: f64,
    ) -> Result<()> {
        loop {
            if meta.accepted_steps + meta.rejected_steps >= self.max_steps {
                return Err(Error::StepLimit {
                    t: *t,
                    limit: self.max_steps,
                });
            }
            if self.h < self.h_min {
                return Err(Error::StepUnderflow { t: *t, h: self.h });
            }
            let remaining = target - *t;
            let landing = self.h >= remaining;
            let h = if landing { remaining } else { self.h };

            let mut k: Vec<DenseMatrix> = Vec::with_capacity(7);
            k.push(k1.clone());
            for s in 1..7 {
                let mut y = x.clone();
                for (j, kj) in k.iter().enumerate() {
                    let a = A[s][j];
                    if a != 0.0 {
                        y.axpy(h * a, kj);
                    }
                }
                let ks = rhs(*t + C[s] * h, &y, &mut meta.rhs_evaluations)?;
                if !ks.is_finite() {
                    return Err(Error::NonFiniteState { t: *t + C[s] * h });
                }
                if s == 6 {
                    // Row 6 of A holds the fifth-order weights, so `y` is the
                    // new solution and `ks` its derivative (FSAL).
                    let mut err = DenseMatrix::zeros(x.rows(), x.cols());
                    for (j, kj) in k.iter().enumerate() {
                        if E[j] != 0.0 {
                            err.axpy(h * E[j], kj);
                        }
                    }
                    err.axpy(h * E[6], &ks);
                    let e = self.scaled_norm(&err, x, Some(&y));
                    if !e.is_finite() {
                        return Err(Error::NonFiniteState { t: *t + h });
                    }
                    if e <= 1.0 {
                        let mut fac = if e == 0.0 { 10.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 10.0) };
                        if self.last_rejected {
                            fac = fac.min(1.0);
                        }
                        self.last_rejected = false;
                        meta.accepted_steps += 1;
                        *t = if landing { target } else { *t + h };
                        *x = y;
                        *k1 = ks;
                        // A shortened landing step does not shrink the
                        // proposal for the next interval.
                        let proposal = (h * fac).min(self.h_max);
                        self.h = if landing { self.h.max(proposal) } else { proposal };
                        return Ok(());
                    }
                    meta.rejected_steps += 1;
                    self.last_rejected = true;
                    self.h = h * (0.9 * e.powf(-0.2)).clamp(0.2, 1.0);
                    break;
                }
                k.push(ks);
            }
        }
    }
}

fn constant_propagator(sys: &CoupledSystem, elapsed: f64) -> Result<(bool, DenseMatrix)> {
    if !sys.kind().is_constant() {
        return Err(Error::KindMismatch {
            expected: "a constant coupling",
            found: sys.kind(),
        });
    }
    let probe = StateMatrix::zeros(sys.d(), sys.n());
    if sys.kind().is_scalar() {
        let w = sys.assemble_scalar_w(0.0, &probe)?;
        Ok((true, matrix_exponential(&w.transpose().scale(elapsed))?))
    } else {
        let big = sys.assemble_block_matrix(0.0, &probe)?;
        Ok((false, matrix_exponential(&big.scale(elapsed))?))
    }
}

/// Exact state after `elapsed` time units for constant couplings:
/// `X0 exp(t W^T)` (scalar) or `exp(t W_block) vec(X0)` (matrix).
pub fn lti_exact_solution(sys: &CoupledSystem, x0: &StateMatrix, elapsed: f64) -> Result<StateMatrix> {
    sys.check_state(x0)?;
    let (scalar, phi) = constant_propagator(sys, elapsed)?;
    if scalar {
        Ok(StateMatrix::new(x0.matrix() * &phi))
    } else {
        let v = phi.matvec(&x0.stack())?;
        StateMatrix::unstack(&v, sys.d(), sys.n())
    }
}

/// Largest `||X_num(t) - X_exact(t)||_F / max(1, ||X_exact(t)||_F)` over
/// the samples of a trajectory of a constant-coupling system.
pub fn oracle_error(traj: &Trajectory, sys: &CoupledSystem) -> Result<f64> {
    let x0 = traj.initial_state();
    let t0 = traj.t0();
    let mut worst: f64 = 0.0;
    for (t, x) in traj.samples() {
        let exact = lti_exact_solution(sys, x0, t - t0)?;
        let err = (x.matrix() - exact.matrix()).frobenius_norm() / exact.frobenius_norm().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use super::*;
    use crate::system::{BlockGrid, CouplingSpec};

    fn scalar(x: f64) -> DenseMatrix {
        DenseMatrix::from_rows(&[[x]]).unwrap()
    }

    #[test]
    fn rk4_zero_rhs_is_identity() {
        let x = DenseMatrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let mut f = |_: f64, y: &DenseMatrix| Ok(DenseMatrix::zeros(y.rows(), y.cols()));
        assert_eq!(rk4_step(&mut f, 0.0, &x, 0.3).unwrap(), x);
    }

    #[test]
    fn rk4_growth_step() {
        // RK4 on x' = x reproduces the Taylor polynomial to order 4:
        // 1 + h + h^2/2 + h^3/6 + h^4/24.
        let mut f = |_: f64, y: &DenseMatrix| Ok(y.clone());
        let y = rk4_step(&mut f, 0.0, &scalar(1.0), 0.1).unwrap();
        let taylor = 1.0 + 0.1 + 0.01 / 2.0 + 0.001 / 6.0 + 0.0001 / 24.0;
        assert!((y[(0, 0)] - taylor).abs() < 1e-15);
        // Local error is the h^5/120 Taylor remainder, about 8.5e-8.
        let err = 0.1f64.exp() - y[(0, 0)];
        assert!(err > 8.0e-8 && err < 9.0e-8, "{err}");
    }

    #[test]
    fn rk4_decay_twenty_steps() {
        let mut f = |_: f64, y: &DenseMatrix| Ok(y.scale(-1.0));
        let mut x = scalar(1.0);
        for k in 0..20 {
            x = rk4_step(&mut f, 0.5 * k as f64, &x, 0.5).unwrap();
        }
        // Amplification factor per step: 1 - h + h^2/2 - h^3/6 + h^4/24 at h = 0.5.
        let g: f64 = 1.0 - 0.5 + 0.125 - 0.125 / 6.0 + 0.0625 / 24.0;
        assert!((x[(0, 0)] - g.powi(20)).abs() < 1e-15);
        assert!((x[(0, 0)] - (-10.0f64).exp()).abs() / (-10.0f64).exp() < 1e-2);
        assert!((x[(0, 0)] - (-10.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn rk4_reports_non_finite_stage() {
        let mut f = |t: f64, y: &DenseMatrix| Ok(if t > 0.0 { y.scale(f64::INFINITY) } else { y.clone() });
        assert!(matches!(
            rk4_step(&mut f, 0.0, &scalar(1.0), 0.2),
            Err(Error::NonFiniteState { t }) if (t - 0.1).abs() < 1e-15
        ));
    }

    #[test]
    fn zero_system_is_constant() {
        let sys = CoupledSystem::new(CouplingSpec::scalar_constant(DenseMatrix::zeros(2, 2), 2).unwrap(), "zero");
        let x0 = StateMatrix::new(DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap());
        for cfg in [IntegratorConfig::default(), IntegratorConfig::rk4(0.1, 0.25)] {
            let traj = integrate(&sys, &x0, 0.0, 1.0, &cfg).unwrap();
            assert!(traj.states().iter().all(|s| s == &x0));
            assert_eq!(*traj.times().last().unwrap(), 1.0);
        }
    }

    #[test]
    fn sample_grid_hits_multiples_and_end() {
        let g = sample_grid(0.0, 1.0, 0.3).unwrap();
        assert_eq!(g.len(), 4);
        assert!((g[2] - 0.9).abs() < 1e-15);
        assert_eq!(g[3], 1.0);
        // No near-duplicate of t1.
        assert_eq!(sample_grid(0.0, 1.0, 0.1).unwrap().len(), 10);
    }

    #[test]
    fn two_agent_consensus_closed_form() {
        // Laplacian eigenpairs: 0 on (1, 1), 2 on (1, -1). With x(0) = (0, 2)
        // the mean 1 stays and the difference decays as e^{-2t}.
        let w = DenseMatrix::from_rows(&[[-1.0, 1.0], [1.0, -1.0]]).unwrap();
        let sys = CoupledSystem::new(CouplingSpec::scalar_constant(w, 1).unwrap(), "k2");
        let x0 = StateMatrix::new(DenseMatrix::from_rows(&[[0.0, 2.0]]).unwrap());
        let expected = [1.0 - (-2.0f64).exp(), 1.0 + (-2.0f64).exp()];
        let traj = integrate(&sys, &x0, 0.0, 1.0, &IntegratorConfig::default()).unwrap();
        let xf = traj.final_state();
        assert!((xf[(0, 0)] - expected[0]).abs() < 1e-8);
        assert!((xf[(0, 1)] - expected[1]).abs() < 1e-8);
        let exact = lti_exact_solution(&sys, &x0, 1.0).unwrap();
        assert!((exact[(0, 0)] - expected[0]).abs() < 1e-12);
        assert!((exact[(0, 1)] - expected[1]).abs() < 1e-12);
    }

    fn rotation_drift() -> CoupledSystem {
        let g = DenseMatrix::from_rows(&[[0.0, -1.0], [1.0, 0.0]]).unwrap();
        let mut grid = BlockGrid::zeros(2, 2);
        grid.set_block(0, 0, g.clone());
        grid.set_block(1, 1, g);
        CoupledSystem::new(CouplingSpec::matrix_constant(grid).unwrap(), "rotation")
    }

    #[test]
    fn rotation_drift_quarter_turn() {
        let sys = rotation_drift();
        let x0 = StateMatrix::new(DenseMatrix::from_rows(&[[1.0, 1.0], [0.0, 0.0]]).unwrap());
        let traj = integrate(&sys, &x0, 0.0, FRAC_PI_2, &IntegratorConfig::default()).unwrap();
        let expected = DenseMatrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        assert!((traj.final_state().matrix() - &expected).max_abs() < 1e-7);
    }

    #[test]
    fn lti_exact_examples() {
        let sys = rotation_drift();
        let x0 = StateMatrix::new(DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap());
        assert_eq!(lti_exact_solution(&sys, &x0, 0.0).unwrap(), x0);

        // W = [[0, 1], [0, 0]] so x_0' = x_1, x_1' = 0: X(t) = [a + t b, b].
        let w = DenseMatrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap();
        let nil = CoupledSystem::new(CouplingSpec::scalar_constant(w, 1).unwrap(), "nilpotent");
        let (a, b, t) = (1.5, -0.5, 2.0);
        let x0 = StateMatrix::new(DenseMatrix::from_rows(&[[a, b]]).unwrap());
        let x = lti_exact_solution(&nil, &x0, t).unwrap();
        assert!((x[(0, 0)] - (a + t * b)).abs() < 1e-14);
        assert!((x[(0, 1)] - b).abs() < 1e-14);
    }

    #[test]
    fn lti_exact_rejects_non_constant() {
        let spec = CouplingSpec::scalar_time_varying(1, 1, |t| DenseMatrix::from_rows(&[[t]]).unwrap()).unwrap();
        let sys = CoupledSystem::new(spec, "tv");
        assert!(matches!(
            lti_exact_solution(&sys, &StateMatrix::zeros(1, 1), 1.0),
            Err(Error::KindMismatch { .. })
        ));
    }

    #[test]
    fn oracle_error_zero_and_consensus() {
        let zero = CoupledSystem::new(CouplingSpec::scalar_constant(DenseMatrix::zeros(2, 2), 1).unwrap(), "zero");
        let x0 = StateMatrix::new(DenseMatrix::from_rows(&[[0.0, 2.0]]).unwrap());
        let traj = integrate(&zero, &x0, 0.0, 1.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(oracle_error(&traj, &zero).unwrap(), 0.0);

        let w = DenseMatrix::from_rows(&[[-1.0, 1.0], [1.0, -1.0]]).unwrap();
        let sys = CoupledSystem::new(CouplingSpec::scalar_constant(w, 1).unwrap(), "k2");
        let traj = integrate(&sys, &x0, 0.0, 5.0, &IntegratorConfig::dp54(1e-10, 1e-12, 0.1)).unwrap();
        assert!(oracle_error(&traj, &sys).unwrap() <= 1e-7);
    }

    #[test]
    fn rk4_halving_reduces_error_sixteenfold() {
        let sys = rotation_drift();
        let x0 = StateMatrix::new(DenseMatrix::from_rows(&[[1.0, 0.3], [0.2, -1.0]]).unwrap());
        let err = |h: f64| {
            let traj = integrate(&sys, &x0, 0.0, 2.0, &IntegratorConfig::rk4(h, 2.0)).unwrap();
            oracle_error(&traj, &sys).unwrap()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::rk4(0.0, 1.0).validate().is_err());
        assert!(IntegratorConfig::dp54(1e-9, -1.0, 1.0).validate().is_err());
        assert!(IntegratorConfig::dp54(1e-9, 1e-12, 0.0).validate().is_err());
        let sys = rotation_drift();
        let x0 = StateMatrix::zeros(2, 2);
        assert!(integrate(&sys, &x0, 1.0, 1.0, &IntegratorConfig::default()).is_err());
        assert!(integrate(&sys, &StateMatrix::zeros(3, 2), 0.0, 1.0, &IntegratorConfig::default()).is_err());
    }

    #[test]
    fn finite_escape_is_reported() {
        // x' = x^2 from x(0) = 1 escapes at t = 1.
        let spec = CouplingSpec::scalar_state_dependent(1, 1, |_, x| x.clone()).unwrap();
        let sys = CoupledSystem::new(spec, "blowup");
        let x0 = StateMatrix::new(scalar(1.0));
        let err = integrate(&sys, &x0, 0.0, 2.0, &IntegratorConfig::default()).unwrap_err();
        assert!(err.is_numerical(), "{err:?}");
    }
}
