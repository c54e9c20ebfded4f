//! Error types shared across the crate.

use thiserror::Error;

#[derive(Error, Debug, Clone)]
pub enum GeometryError {
    #[error("matrix is not a rotation (orthogonality residual {orthogonality_residual:.3e}, determinant {determinant:.6})")]
    NotARotation {
        orthogonality_residual: f64,
        determinant: f64,
    },
    #[error("projection onto SO(3) is not unique (singular values {singular_values:?})")]
    DegenerateProjection { singular_values: [f64; 3] },
}

#[derive(Error, Debug, Clone)]
pub enum ProblemError {
    #[error("egomotion sequences have mismatched lengths ({len_a} vs {len_b})")]
    LengthMismatch { len_a: usize, len_b: usize },
    #[error("need at least 2 paired motions, got {len}")]
    TooFewMotions { len: usize },
    #[error("translations under-excited: eliminated block has condition number {condition:.3e} (limit {limit:.1e}); translation/scale recovery is ill-posed")]
    UnderExcitedTranslations { condition: f64, limit: f64 },
    #[error("known-scale dataset must embed scale 1, got {alpha}")]
    KnownScaleWithScaling { alpha: f64 },
}

#[derive(Error, Debug, Clone)]
pub enum ConstraintError {
    #[error("constraint configuration must enable row or column orthogonality")]
    NoOrthogonality,
    #[error("unknown constraint configuration '{0}' (expected R, RC, RH, or RCH)")]
    UnknownConfig(String),
}

#[derive(Error, Debug, Clone)]
pub enum SolveError {
    #[error("multiplier vector has length {got}, constraint set expects {expected}")]
    MultiplierLength { got: usize, expected: usize },
    #[error("interior-point solver did not converge after {iterations} iterations (gap {gap:.3e}, primal infeas {primal_infeasibility:.3e}, dual infeas {dual_infeasibility:.3e})")]
    NotConverged {
        iterations: usize,
        gap: f64,
        primal_infeasibility: f64,
        dual_infeasibility: f64,
    },
    #[error("interior-point iteration lost positive definiteness and could not recover")]
    NumericalBreakdown,
}

#[derive(Error, Debug, Clone)]
pub enum ExtractError {
    #[error("Z has no singular value below {threshold:.1e} (smallest is {min_singular_value:.3e}); cannot extract a primal candidate")]
    EmptyNullspace {
        threshold: f64,
        min_singular_value: f64,
    },
    #[error("no nullspace vector has a usable homogenization component (nullspace dimension {nullspace_dim}); solution is ambiguous or degenerate")]
    NoUsableCandidate { nullspace_dim: usize },
}

#[derive(Error, Debug, Clone)]
pub enum CalibrateError {
    #[error("cost assembly: {0}")]
    Build(#[from] ProblemError),
    #[error("constraint generation: {0}")]
    Constraints(#[from] ConstraintError),
    #[error("dual solve: {0}")]
    Solve(#[from] SolveError),
    #[error("primal extraction: {0}")]
    Extract(#[from] ExtractError),
}

#[derive(Error, Debug, Clone)]
pub enum BaselineError {
    #[error("reduced cost has a (near-)repeated smallest eigenvalue (gap {gap:.3e} vs spectrum scale {scale:.3e}); unconstrained minimizer is ambiguous")]
    AmbiguousMinimizer { gap: f64, scale: f64 },
    #[error("homogenization component of the minimizer is {y:.3e}; cannot normalize")]
    DegenerateHomogenization { y: f64 },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Error, Debug, Clone)]
pub enum SynthError {
    #[error("degenerate frame at sample {index}: |tangent| = {tangent_norm:.3e}")]
    DegenerateFrame { index: usize, tangent_norm: f64 },
    #[error("need at least 3 poses, got {got}")]
    TooFewPoses { got: usize },
    #[error("relative rotation at step {step} has angle {angle:.4} rad outside the configured range [{min:.4}, {max:.4}]")]
    RotationMagnitudeOutOfRange {
        step: usize,
        angle: f64,
        min: f64,
        max: f64,
    },
    #[error("ground-truth scale must be positive, got {alpha}")]
    NonPositiveScale { alpha: f64 },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}
