//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("eigendecomposition did not converge (off-diagonal {off:.3e} after {sweeps} sweeps)")]
    EigNoConvergence { off: f64, sweeps: usize },

    #[error("no transverse roots found (no Newton start converged)")]
    NoTransverseRoots,

    #[error("degenerate intersection: found {found} distinct roots, expected {expected}")]
    DegenerateIntersection { found: usize, expected: usize },

    #[error("non-transverse intersection point: smallest Jacobian singular value {sigma:.3e} below {min:.3e}")]
    NonTransverse { sigma: f64, min: f64 },

    #[error("point configuration is not closed under conjugation")]
    NotConjugationClosed,

    #[error("points too close: projective distance {dist:.3e} below {min:.3e}")]
    PointsTooClose { dist: f64, min: f64 },

    #[error("form does not vanish at configuration point (residual {residual:.3e}, tolerance {tol:.3e})")]
    DoesNotVanish { residual: f64, tol: f64 },

    #[error("unexpected pencil dimension: expected {expected}, observed {observed}")]
    PencilDimension { expected: usize, observed: usize },

    #[error("value relation space has dimension {dim}, expected 1")]
    RelationNotUnique { dim: usize },

    #[error("relation has a near-zero coefficient (|u_{index}| = {modulus:.3e})")]
    RelationZeroCoefficient { index: usize, modulus: f64 },

    #[error("operation requires a fully real configuration ({pairs} conjugate pairs present)")]
    NotFullyReal { pairs: usize },

    #[error("operation requires exactly one conjugate pair ({pairs} present)")]
    NotOnePair { pairs: usize },

    #[error("configuration is not unit-modulus rescaled")]
    NotRescaled,

    #[error("weights must be strictly positive (a_{index} = {value:.3e})")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("tilt parameter infeasible: |t| = {t:.3e} exceeds 1/S = {bound:.3e}")]
    InfeasibleTilt { t: f64, bound: f64 },

    #[error("moment matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },

    #[error("moment matrix has rank {rank}, expected {expected}")]
    RankMismatch { rank: usize, expected: usize },

    #[error("kernel has dimension {dim}, expected {expected}")]
    KernelDimension { dim: usize, expected: usize },

    #[error("kernel forms share a near-common real zero (min of sum of squares on sphere = {min:.3e})")]
    NearCommonZero { min: f64 },

    #[error("no transverse subsystem found in kernel after {attempts} seeded draws")]
    NoTransverseSubsystem { attempts: usize },

    #[error("functional does not annihilate the requested subspace (residual {residual:.3e})")]
    NotAnnihilating { residual: f64 },

    #[error("functional is numerically zero")]
    ZeroFunctional,

    #[error("evaluation matrix is rank-deficient (rank {rank}, need {need})")]
    EvaluationRankDeficient { rank: usize, need: usize },

    #[error("vector is not on the requested boundary facet (slack {slack:.3e})")]
    NotOnBoundary { slack: f64 },

    #[error("entry {index} is negative ({value:.3e})")]
    NegativeEntry { index: usize, value: f64 },

    #[error("least-squares solve left residual {residual:.3e} above {tol:.3e}")]
    LeastSquares { residual: f64, tol: f64 },

    #[error("case mismatch: expected {expected}, got {got}")]
    CaseMismatch { expected: String, got: String },

    #[error("lift verification failed: sphere minimum {min:.3e} still negative")]
    LiftFailed { min: f64 },
}
