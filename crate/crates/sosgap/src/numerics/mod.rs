//! Dense numerical kernels sized for this problem.
//!
//! Every matrix in the pipeline is at most 35 x 35 (dim H_{4,4}), so
//! the kernels favor robustness and determinism over asymptotics:
//! eigendecomposition is cyclic Jacobi, nullspaces and least squares
//! go through the eigendecomposition of A^T A with the tolerance test
//! re-done against the original matrix, sphere minimization is
//! projected gradient descent with seeded restarts floored by a fixed
//! low-discrepancy sample, and root finding is damped Newton in a
//! random rotation chart.

mod mat;
mod newton;
mod sphere;

pub use mat::{
    lstsq_min_norm, nullspace, spectral_norm, sym_eig, Mat, SpectralResult, SymMatrix,
};
pub use newton::{
    complex_sigma_min, newton_from, newton_solve, solve_complex, ChartSystem, NEWTON_MAX_ITERS,
    NEWTON_RESIDUAL, ROOT_DEDUP_DISTANCE,
};
pub use sphere::{min_on_sphere, min_on_sphere_penalized, SphereMin};
