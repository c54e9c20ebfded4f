//! Certifiably globally optimal hand-eye (`AX = XB`) extrinsic calibration.
//!
//! Estimates the fixed rigid transform between two egomotion-producing
//! sensors, including the case where one sensor is a monocular camera whose
//! translations carry an unknown scale. The measurement residuals form a
//! quadratically constrained quadratic program over SO(3); its Lagrangian
//! dual is a small semidefinite program whose solution both recovers the
//! extrinsic transform and certifies global optimality through the duality
//! gap.
//!
//! Pipeline: [`problem::build_cost`] assembles the quadratic cost from paired
//! relative motions, [`constraints::build_constraints`] emits the homogenized
//! rotation-group constraint matrices, [`sdp::calibrate`] solves the dual SDP
//! and extracts a certified estimate, and [`baseline::calibrate_linear`]
//! provides the classical eigenvector-and-project comparison method.
//! [`synth`] generates ground-truth trajectories and noisy egomotion for
//! benchmarking, and [`experiment`] runs the success-rate and error studies.

pub mod baseline;
pub mod constraints;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod io;
pub mod problem;
pub mod sdp;
pub mod synth;
pub(crate) mod util;

#[cfg(test)]
pub(crate) mod testutil;

pub use baseline::calibrate_linear;
pub use constraints::{build_constraints, ConstraintConfig, ConstraintSet};
pub use geometry::{RigidTransform, Rotation};
pub use problem::{build_cost, evaluate_cost_residual, CostMatrices, EgomotionDataset};
pub use sdp::{calibrate, Certificate, ExtrinsicEstimate, Method, SolverOptions};
