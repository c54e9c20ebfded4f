//! Suboptimal linear comparison method.
//!
//! Minimizes the reduced quadratic cost without the rotation-group
//! constraints, projects the minimizer onto the nearest rotation, and
//! recovers translation and scale in closed form. Fast and exact on clean
//! data, but carries no optimality certificate and degrades under noise.

use crate::error::BaselineError;
use crate::geometry::{nearest_rotation, unvectorize, vectorize, Rotation, Vec9};
use crate::problem::{
    build_cost, evaluate_cost_residual, recover_translation_scale, CostMatrices, EgomotionDataset,
};
use crate::sdp::{ExtrinsicEstimate, Method};

type ScoredCandidate = (f64, f64, Rotation, nalgebra::Vector3<f64>, Option<f64>);

/// Relative eigenvalue-gap threshold below which the unconstrained minimizer
/// is declared ambiguous.
pub const EIGENVALUE_GAP_TOL: f64 = 1e-10;

fn smallest_eigenpair_checked(
    m: nalgebra::DMatrix<f64>,
) -> Result<nalgebra::DVector<f64>, BaselineError> {
    let n = m.nrows();
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let lambda_max = eig.eigenvalues[order[n - 1]].abs().max(f64::MIN_POSITIVE);
    let gap = eig.eigenvalues[order[1]] - eig.eigenvalues[order[0]];
    if gap < EIGENVALUE_GAP_TOL * lambda_max {
        return Err(BaselineError::AmbiguousMinimizer {
            gap,
            scale: lambda_max,
        });
    }
    Ok(eig.eigenvectors.column(order[0]).into_owned())
}

/// Linear hand-eye calibration: eigenvector of the reduced cost, projection
/// onto SO(3), closed-form translation/scale.
///
/// The homogeneous minimizer is only defined up to sign; both signs are
/// projected and the one with the lower full cost wins (ties go to the
/// candidate with positive recovered scale).
pub fn calibrate_linear(dataset: &EgomotionDataset) -> Result<ExtrinsicEstimate, BaselineError> {
    let cost = build_cost(dataset);
    if dataset.scale_known() {
        calibrate_linear_known_scale(dataset, &cost)
    } else {
        calibrate_linear_unknown_scale(dataset, &cost)
    }
}

fn calibrate_linear_unknown_scale(
    dataset: &EgomotionDataset,
    cost: &CostMatrices,
) -> Result<ExtrinsicEstimate, BaselineError> {
    let v = smallest_eigenpair_checked(nalgebra::DMatrix::from_iterator(
        9,
        9,
        cost.q_reduced().iter().copied(),
    ))?;
    let r0 = Vec9::from_column_slice(v.as_slice());

    let mut best: Option<ScoredCandidate> = None;
    for sign in [1.0, -1.0] {
        let m = unvectorize(&(r0 * sign));
        let rotation = nearest_rotation(&m)?;
        let (t, alpha) = recover_translation_scale(cost, &vectorize(rotation.matrix()))?;
        let c = evaluate_cost_residual(dataset, &rotation, &t, alpha.unwrap_or(1.0));
        let better = match &best {
            None => true,
            Some((c0, a0, ..)) => {
                c + 1e-12 * (1.0 + c0) < *c0
                    || ((c - c0).abs() <= 1e-12 * (1.0 + c0)
                        && *a0 <= 0.0
                        && alpha.unwrap_or(1.0) > 0.0)
            }
        };
        if better {
            best = Some((c, alpha.unwrap_or(1.0), rotation, t, alpha));
        }
    }
    let (primal_cost, _, rotation, translation, scale) = best.expect("two candidates evaluated");
    Ok(ExtrinsicEstimate {
        rotation,
        translation,
        scale,
        primal_cost,
        certificate: None,
        method: Method::Linear,
    })
}

fn calibrate_linear_known_scale(
    dataset: &EgomotionDataset,
    cost: &CostMatrices,
) -> Result<ExtrinsicEstimate, BaselineError> {
    // The known-scale reduction couples the homogenizer, so the minimizer
    // lives in the lifted space and is normalized by its y component.
    let v = smallest_eigenpair_checked(nalgebra::DMatrix::from_iterator(
        10,
        10,
        cost.q_homog().iter().copied(),
    ))?;
    let y = v[9];
    if y.abs() < 1e-6 {
        return Err(BaselineError::DegenerateHomogenization { y });
    }
    let r = Vec9::from_column_slice(&v.as_slice()[0..9]) / y;
    let rotation = nearest_rotation(&unvectorize(&r))?;
    let (translation, _) = recover_translation_scale(cost, &vectorize(rotation.matrix()))?;
    let primal_cost = evaluate_cost_residual(dataset, &rotation, &translation, 1.0);
    Ok(ExtrinsicEstimate {
        rotation,
        translation,
        scale: None,
        primal_cost,
        certificate: None,
        method: Method::Linear,
    })
}
