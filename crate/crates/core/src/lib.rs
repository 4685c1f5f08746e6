//! Simulation of coupled networked dynamical systems and numerical checks
//! of the invariance properties of their solutions: rank of the state
//! matrix, column and row spans, signature of symmetric states, and
//! collinearity/coplanarity of agent positions.
//!
//! The pieces:
//!
//! * [`linalg`]: dense matrices, SVD-backed rank and subspace tools,
//!   symmetric eigendecomposition, matrix exponential.
//! * [`system`]: coupled systems with scalar or matrix couplings and their
//!   right-hand sides.
//! * [`integrate`]: RK4 and Dormand-Prince integration plus the exact
//!   constant-coefficient solution.
//! * [`diagnostics`]: invariance verdicts over trajectories.
//! * [`structure`]: structural conditions on matrix couplings under which
//!   rank is preserved, with recovery of the drift/coupling decomposition.
//! * [`models`]: builders for consensus, formation, coordination and
//!   synchronization networks.

pub mod diagnostics;
pub mod error;
pub mod integrate;
pub mod linalg;
pub mod models;
pub mod par;
pub mod structure;
pub mod system;

pub use error::{Error, Result};
pub use integrate::{integrate, IntegratorConfig, Method, Trajectory};
pub use linalg::DenseMatrix;
pub use system::{BlockGrid, CoupledSystem, CouplingKind, CouplingSpec, StateMatrix};
