//! Dense real linear algebra used by the simulator and the diagnostics.

mod decomp;
mod expm;
mod kernels;
mod matrix;

pub use decomp::{
    asymmetry, kronecker_with_identity, numerical_rank, orthonormal_basis, principal_angles,
    projector_distance, rank_from_singular_values, signature, signature_from_eigenvalues, svd,
    sym_eigen, Signature, SubspaceBasis, Svd, SymEigen, DEFAULT_RANK_TOL, SYMMETRY_TOL,
};
pub use expm::matrix_exponential;
pub use matrix::DenseMatrix;
