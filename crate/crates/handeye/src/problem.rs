//! Dataset model, quadratic cost assembly, and reductions.
//!
//! The residuals of the `AX = XB` relation over `T` paired relative motions
//! are linear in the stacked state `x = [t, s, vec(R)]`, where slot `s` holds
//! the unknown translation scale for monocular data or the homogenization
//! variable for known-scale data. Summing squared residuals gives the
//! symmetric PSD cost `Q`; eliminating the translation (and scale) block via
//! the Schur complement leaves the rotation-only cost used by both the dual
//! SDP and the linear baseline.
//!
//! State layout, fixed once here and inherited everywhere:
//!
//! ```text
//! unknown scale: x = [t (0..3), alpha (3), vec(R) (4..13)]   Q is 13x13
//! known scale:   x = [t (0..3),     y (3), vec(R) (4..13)]   same assembly,
//!                the fourth slot is pinned to the homogenizer y = 1
//! reduced:       r~ = [vec(R) (0..9), y (9)]                 Q_homog is 10x10
//! ```
//!
//! With known scale the measured translation column stays coupled to `y`, so
//! the reduced 10x10 matrix carries nonzero entries in its `y` row/column;
//! with unknown scale that column belongs to `alpha`, which is eliminated,
//! and the reduction is the familiar zero-padded 9x9 block.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use crate::constraints::{lift, Matrix10};
use crate::error::ProblemError;
use crate::geometry::{RigidTransform, Rotation, Vec9};

pub type Matrix13 = SMatrix<f64, 13, 13>;
pub type Matrix9 = SMatrix<f64, 9, 9>;

/// Condition-number limit on the eliminated translation/scale block beyond
/// which closed-form recovery is refused.
pub const TRANSLATION_CONDITION_LIMIT: f64 = 1e12;

/// Paired per-timestep relative motions of sensors `a` and `b`.
///
/// Sensor `b` is the (possibly monocular) camera; when `scale_known` is false
/// its translations are interpreted as scale-ambiguous, with the metric
/// translation equal to `alpha * t_b` for the unknown scale `alpha`.
#[derive(Debug, Clone)]
pub struct EgomotionDataset {
    motions_a: Vec<RigidTransform>,
    motions_b: Vec<RigidTransform>,
    scale_known: bool,
}

impl EgomotionDataset {
    pub fn new(
        motions_a: Vec<RigidTransform>,
        motions_b: Vec<RigidTransform>,
        scale_known: bool,
    ) -> Result<Self, ProblemError> {
        if motions_a.len() != motions_b.len() {
            return Err(ProblemError::LengthMismatch {
                len_a: motions_a.len(),
                len_b: motions_b.len(),
            });
        }
        if motions_a.len() < 2 {
            return Err(ProblemError::TooFewMotions {
                len: motions_a.len(),
            });
        }
        Ok(EgomotionDataset {
            motions_a,
            motions_b,
            scale_known,
        })
    }

    pub fn len(&self) -> usize {
        self.motions_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.motions_a.is_empty()
    }

    pub fn motions_a(&self) -> &[RigidTransform] {
        &self.motions_a
    }

    pub fn motions_b(&self) -> &[RigidTransform] {
        &self.motions_b
    }

    pub fn scale_known(&self) -> bool {
        self.scale_known
    }
}

/// Rotation residual block: `[0_{9x4} | R_a' (x) I - I (x) R_b]`.
pub(crate) fn rotation_block(ra: &Rotation, rb: &Rotation) -> SMatrix<f64, 9, 13> {
    let mut m = SMatrix::<f64, 9, 13>::zeros();
    let kron = ra.matrix().transpose().kronecker(&Matrix3::identity())
        - Matrix3::identity().kronecker(rb.matrix());
    m.fixed_view_mut::<9, 9>(0, 4).copy_from(&kron);
    m
}

/// Translation residual block: `[I - R_b | -t_b | t_a' (x) I]`.
pub(crate) fn translation_block(
    rb: &Rotation,
    tb: &Vector3<f64>,
    ta: &Vector3<f64>,
) -> SMatrix<f64, 3, 13> {
    let mut m = SMatrix::<f64, 3, 13>::zeros();
    m.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(Matrix3::identity() - rb.matrix()));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-tb));
    m.fixed_view_mut::<3, 9>(0, 4)
        .copy_from(&ta.transpose().kronecker(&Matrix3::identity()));
    m
}

/// The assembled cost and its reductions.
#[derive(Debug, Clone)]
pub struct CostMatrices {
    q: Matrix13,
    scale_known: bool,
    elim_dim: usize,
    /// Pseudo-inverse of the eliminated block (equals the inverse when the
    /// block is well conditioned).
    q_elim_pinv: SMatrix<f64, 4, 4>,
    q_reduced: Matrix9,
    q_homog: Matrix10,
    condition: f64,
    recoverable: bool,
}

impl CostMatrices {
    /// Full cost matrix over `[t, s, vec(R)]`.
    pub fn q(&self) -> &Matrix13 {
        &self.q
    }

    /// Rotation-only reduced cost (the `vec(R)` block of [`Self::q_homog`]).
    pub fn q_reduced(&self) -> &Matrix9 {
        &self.q_reduced
    }

    /// Reduced cost over the lifted state `r~ = [vec(R), y]`.
    pub fn q_homog(&self) -> &Matrix10 {
        &self.q_homog
    }

    pub fn scale_known(&self) -> bool {
        self.scale_known
    }

    /// Condition number of the eliminated translation(/scale) block.
    pub fn translation_condition(&self) -> f64 {
        self.condition
    }

    /// Whether closed-form translation/scale recovery is well posed.
    pub fn translation_recoverable(&self) -> bool {
        self.recoverable
    }

    fn check_recoverable(&self) -> Result<(), ProblemError> {
        if !self.recoverable {
            return Err(ProblemError::UnderExcitedTranslations {
                condition: self.condition,
                limit: TRANSLATION_CONDITION_LIMIT,
            });
        }
        Ok(())
    }

    /// Evaluates `x' Q x` at the given parameters.
    ///
    /// For known-scale problems the `alpha` argument is ignored and the state
    /// slot carries the homogenizer value 1.
    pub fn quadratic_cost(&self, t: &Vector3<f64>, alpha: f64, r: &Vec9) -> f64 {
        let mut x = SVector::<f64, 13>::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(t);
        x[3] = if self.scale_known { 1.0 } else { alpha };
        x.fixed_rows_mut::<9>(4).copy_from(r);
        (x.transpose() * self.q * x)[(0, 0)]
    }

    /// Reduced cost `r~' Q_homog r~` at `r~ = [r, 1]`.
    pub fn reduced_cost(&self, r: &Vec9) -> f64 {
        let rt = lift(r, 1.0);
        (rt.transpose() * self.q_homog * rt)[(0, 0)]
    }

    /// The eliminated block: `Q_ta` (4x4, unknown scale) or `Q_t` (3x3).
    pub fn q_translation_scale(&self) -> nalgebra::DMatrix<f64> {
        self.q
            .view((0, 0), (self.elim_dim, self.elim_dim))
            .into_owned()
    }

    /// Coupling of the eliminated block with `vec(R)`:
    /// `Q_{ta,r}` (4x9, unknown scale) or `Q_{t,r}` (3x9).
    pub fn q_translation_rotation(&self) -> nalgebra::DMatrix<f64> {
        self.q.view((0, 4), (self.elim_dim, 9)).into_owned()
    }

    /// The `vec(R)` diagonal block `Q_r` (9x9) of the full cost.
    pub fn q_rotation(&self) -> Matrix9 {
        self.q.fixed_view::<9, 9>(4, 4).into_owned()
    }
}

/// Assembles the cost matrices for a dataset.
///
/// Reduction uses a pseudo-inverse of the eliminated block so that degenerate
/// (under-excited) datasets still produce a well-defined `Q_homog` for
/// diagnostics; recovery operations check [`CostMatrices::translation_recoverable`]
/// and fail loudly instead of returning garbage.
pub fn build_cost(dataset: &EgomotionDataset) -> CostMatrices {
    let mut q = Matrix13::zeros();
    for (ma, mb) in dataset.motions_a().iter().zip(dataset.motions_b()) {
        let mr = rotation_block(&ma.rotation, &mb.rotation);
        let mt = translation_block(&mb.rotation, &mb.translation, &ma.translation);
        q += mr.transpose() * mr + mt.transpose() * mt;
    }
    // Enforce exact symmetry; accumulation is symmetric up to rounding.
    q = (q + q.transpose()) * 0.5;

    let elim_dim = if dataset.scale_known() { 3 } else { 4 };

    // Eliminated block and its pseudo-inverse, embedded in 4x4 storage.
    let block = q.view((0, 0), (elim_dim, elim_dim)).clone_owned();
    let svd = block.svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let condition = if s_min > 0.0 {
        s_max / s_min
    } else {
        f64::INFINITY
    };
    let recoverable = s_max > 0.0 && condition <= TRANSLATION_CONDITION_LIMIT;
    let pinv = svd
        .pseudo_inverse(1e-12 * s_max.max(f64::MIN_POSITIVE))
        .expect("svd computed");
    let mut q_elim_pinv = SMatrix::<f64, 4, 4>::zeros();
    q_elim_pinv
        .view_mut((0, 0), (elim_dim, elim_dim))
        .copy_from(&pinv);

    // Schur complement of the eliminated block in Q, over the kept indices.
    let kept = 13 - elim_dim;
    let q_ek = q.view((0, elim_dim), (elim_dim, kept)).clone_owned();
    let q_kk = q.view((elim_dim, elim_dim), (kept, kept)).clone_owned();
    let schur = &q_kk - q_ek.transpose() * pinv * &q_ek;

    let (q_reduced, q_homog) = if dataset.scale_known() {
        // schur is 10x10 over [y, r]; permute to [r, y].
        let mut h = Matrix10::zeros();
        let perm = |i: usize| if i == 9 { 0 } else { i + 1 };
        for i in 0..10 {
            for j in 0..10 {
                h[(i, j)] = schur[(perm(i), perm(j))];
            }
        }
        let r_block = h.fixed_view::<9, 9>(0, 0).clone_owned();
        (r_block, h)
    } else {
        // schur is the 9x9 rotation-only cost; zero-pad the homogenizer row.
        let mut h = Matrix10::zeros();
        h.fixed_view_mut::<9, 9>(0, 0).copy_from(&schur);
        (schur.fixed_view::<9, 9>(0, 0).clone_owned(), h)
    };

    CostMatrices {
        q,
        scale_known: dataset.scale_known(),
        elim_dim,
        q_elim_pinv,
        q_reduced,
        q_homog,
        condition,
        recoverable,
    }
}

/// Sum of squared `AX = XB` residuals at `(R, t, alpha)`.
///
/// Evaluates the residual form directly from the measurements:
/// `sum_t |R R_a - R_b R|_F^2 + sum_t |R t_a + t - R_b t - alpha t_b|^2`.
/// Known-scale datasets fix `alpha = 1` regardless of the argument.
pub fn evaluate_cost_residual(
    dataset: &EgomotionDataset,
    rotation: &Rotation,
    translation: &Vector3<f64>,
    alpha: f64,
) -> f64 {
    let alpha = if dataset.scale_known() { 1.0 } else { alpha };
    let r = rotation.matrix();
    let mut cost = 0.0;
    for (ma, mb) in dataset.motions_a().iter().zip(dataset.motions_b()) {
        let rot_res = r * ma.rotation.matrix() - mb.rotation.matrix() * r;
        let trans_res = r * ma.translation + translation
            - mb.rotation.matrix() * translation
            - alpha * mb.translation;
        cost += rot_res.norm_squared() + trans_res.norm_squared();
    }
    cost
}

/// Recovers the cost-minimizing translation (and scale) for a fixed rotation
/// parameter vector `r = vec(R)`.
///
/// Unknown scale: `[t, alpha] = -Q_ta^-1 Q_{ta,r} r`. Known scale: the
/// homogenizer is pinned to 1 and only `t` is returned.
pub fn recover_translation_scale(
    cost: &CostMatrices,
    r: &Vec9,
) -> Result<(Vector3<f64>, Option<f64>), ProblemError> {
    cost.check_recoverable()?;
    let elim = cost.elim_dim;
    let kept = 13 - elim;
    let q_ek = cost.q.view((0, elim), (elim, kept));
    let rhs = if cost.scale_known {
        // kept state is [y, r] with y = 1
        let mut k = SVector::<f64, 10>::zeros();
        k[0] = 1.0;
        k.fixed_rows_mut::<9>(1).copy_from(r);
        q_ek * k
    } else {
        q_ek * r
    };
    let pinv = cost.q_elim_pinv.view((0, 0), (elim, elim));
    let sol = -(pinv * rhs);
    let t = Vector3::new(sol[0], sol[1], sol[2]);
    let alpha = if cost.scale_known { None } else { Some(sol[3]) };
    Ok((t, alpha))
}

/// Test utility: the reduced cost at `r` and the full cost at the recovered
/// translation/scale. The Schur identity makes the two equal.
pub fn schur_consistency_check(cost: &CostMatrices, r: &Vec9) -> Result<(f64, f64), ProblemError> {
    let (t, alpha) = recover_translation_scale(cost, r)?;
    let reduced = cost.reduced_cost(r);
    let full = cost.quadratic_cost(&t, alpha.unwrap_or(1.0), r);
    Ok((reduced, full))
}

/// Tolerances for the observability (two-axes plus span) condition.
#[derive(Debug, Clone, Copy)]
pub struct ObservabilityTolerances {
    /// Minimum rotation angle for a motion to count as a rotation.
    pub angle_tol: f64,
    /// Minimum angular separation between the two rotation axes.
    pub axis_tol: f64,
    /// `sigma_min > rank_tol * sigma_max` declares the 6x4 matrix full rank.
    pub rank_tol: f64,
}

impl Default for ObservabilityTolerances {
    fn default() -> Self {
        ObservabilityTolerances {
            angle_tol: 1e-3,
            axis_tol: 1e-2,
            rank_tol: 1e-6,
        }
    }
}

/// Outcome of the observability search over measurement pairs.
#[derive(Debug, Clone)]
pub struct ObservabilityReport {
    pub ok: bool,
    /// Indices of the best measurement pair found, if any pair rotates.
    pub best_pair: Option<(usize, usize)>,
    /// Axis separation of the best pair, radians.
    pub axis_angle_between: f64,
    /// Smallest singular value of the stacked 6x4 span matrix of the best pair.
    pub span_margin: f64,
    pub messages: Vec<String>,
}

/// Checks whether the dataset determines the calibration uniquely.
///
/// Searches pairs `(i, j)` for two motions whose rotations exceed the angle
/// tolerance, whose axes are separated, and whose stacked matrix
/// `[[I - R_bi, R t_ai], [I - R_bj, R t_aj]]` has full column rank. The span
/// condition depends on the (unknown) extrinsic rotation, so the caller
/// supplies a reference: ground truth in synthetic studies, the current
/// estimate (or identity) otherwise.
pub fn observability_check(
    dataset: &EgomotionDataset,
    reference: &Rotation,
    tols: &ObservabilityTolerances,
) -> ObservabilityReport {
    let rotations: Vec<_> = dataset
        .motions_b()
        .iter()
        .map(|m| m.rotation.axis_angle())
        .collect();
    let rotating: Vec<usize> = (0..dataset.len())
        .filter(|&i| rotations[i].angle > tols.angle_tol)
        .collect();

    let mut messages = Vec::new();
    if rotating.is_empty() {
        messages.push("no motion rotates above the angle tolerance".to_string());
        return ObservabilityReport {
            ok: false,
            best_pair: None,
            axis_angle_between: 0.0,
            span_margin: 0.0,
            messages,
        };
    }

    let mut best: Option<(usize, usize, f64, f64)> = None;
    let mut best_axis_only = 0.0f64;
    for (pos, &i) in rotating.iter().enumerate() {
        for &j in &rotating[pos + 1..] {
            let separation = rotations[i].axis_separation(&rotations[j]);
            best_axis_only = best_axis_only.max(separation);
            if separation <= tols.axis_tol {
                continue;
            }
            let mut m = SMatrix::<f64, 6, 4>::zeros();
            for (row, &k) in [i, j].iter().enumerate() {
                let rb = dataset.motions_b()[k].rotation.matrix();
                let ta = dataset.motions_a()[k].translation;
                m.view_mut((3 * row, 0), (3, 3))
                    .copy_from(&(Matrix3::identity() - rb));
                m.view_mut((3 * row, 3), (3, 1))
                    .copy_from(&(*reference * &ta));
            }
            let sv = m.svd(false, false).singular_values;
            let margin = sv.min();
            let full_rank = margin > tols.rank_tol * sv.max();
            if full_rank {
                match best {
                    Some((_, _, _, m0)) if m0 >= margin => {}
                    _ => best = Some((i, j, separation, margin)),
                }
            }
        }
    }

    match best {
        Some((i, j, separation, margin)) => ObservabilityReport {
            ok: true,
            best_pair: Some((i, j)),
            axis_angle_between: separation,
            span_margin: margin,
            messages,
        },
        None => {
            if rotating.len() < 2 {
                messages.push("only one motion rotates above the angle tolerance".to_string());
            } else if best_axis_only <= tols.axis_tol {
                messages.push(format!(
                    "all rotation axes are within {:.2e} rad of each other (need > {:.2e})",
                    best_axis_only, tols.axis_tol
                ));
            } else {
                messages
                    .push("no rotating pair satisfies the translation span condition".to_string());
            }
            ObservabilityReport {
                ok: false,
                best_pair: None,
                axis_angle_between: best_axis_only,
                span_margin: 0.0,
                messages,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{exp_so3, random_rotation, rotation_geodesic_error, vectorize};
    use crate::testutil::random_noise_free;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    #[test]
    fn dataset_validation() {
        let id = RigidTransform::identity();
        assert!(matches!(
            EgomotionDataset::new(vec![id], vec![id], false),
            Err(ProblemError::TooFewMotions { .. })
        ));
        assert!(matches!(
            EgomotionDataset::new(vec![id, id], vec![id], false),
            Err(ProblemError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn identity_step_blocks_vanish() {
        // A single identity motion contributes a zero rotation block, and the
        // residual at (R = I, t = 0, any alpha) is zero.
        let id = Rotation::identity();
        let mr = rotation_block(&id, &id);
        assert_eq!(mr.norm(), 0.0);
        let mt = translation_block(&id, &Vector3::zeros(), &Vector3::zeros());
        assert_eq!(mt.norm(), 0.0);
        // With T = 2 identity motions the assembled cost is identically zero.
        let ds = EgomotionDataset::new(
            vec![RigidTransform::identity(); 2],
            vec![RigidTransform::identity(); 2],
            false,
        )
        .unwrap();
        let cost = build_cost(&ds);
        for alpha in [0.0, 1.0, 7.5] {
            assert_eq!(
                cost.quadratic_cost(&Vector3::zeros(), alpha, &vectorize(&Matrix3::identity())),
                0.0
            );
        }
        assert!(!cost.translation_recoverable());
    }

    #[test]
    fn cost_is_zero_at_ground_truth() {
        let mut r = rng(20);
        for &alpha in &[1.0, 0.2, 2.5] {
            let (ds, theta) = random_noise_free(&mut r, 30, alpha, false);
            let cost = build_cost(&ds);
            let rv = vectorize(theta.rotation.matrix());
            // The residual form reaches the squared-rounding floor; the
            // quadratic form cancels O(|Q|) terms and floors at ~eps * |Q|.
            let res = evaluate_cost_residual(&ds, &theta.rotation, &theta.translation, alpha);
            assert!(res <= 1e-18, "res={res}");
            let q_form = cost.quadratic_cost(&theta.translation, alpha, &rv);
            assert!(
                q_form.abs() <= 1e-12 * (1.0 + cost.q().norm()),
                "q_form={q_form}"
            );
        }
    }

    #[test]
    fn quadratic_form_matches_residual_form() {
        let mut r = rng(21);
        for scale_known in [false, true] {
            let (ds, _) = random_noise_free(&mut r, 12, 1.0, scale_known);
            let cost = build_cost(&ds);
            for _ in 0..50 {
                let rot = random_rotation(&mut r);
                let t = Vector3::new(r.random::<f64>(), r.random::<f64>(), r.random::<f64>());
                let alpha = 0.1 + 3.0 * r.random::<f64>();
                let via_q = cost.quadratic_cost(&t, alpha, &vectorize(rot.matrix()));
                let via_res = evaluate_cost_residual(&ds, &rot, &t, alpha);
                assert!(
                    (via_q - via_res).abs() <= 1e-10 * (1.0 + via_res.abs()),
                    "q={via_q} res={via_res}"
                );
            }
        }
    }

    #[test]
    fn q_is_symmetric_psd() {
        let mut r = rng(22);
        let (ds, _) = random_noise_free(&mut r, 20, 1.7, false);
        let cost = build_cost(&ds);
        assert!((cost.q() - cost.q().transpose()).norm() <= 1e-12 * cost.q().norm());
        let eig = nalgebra::SymmetricEigen::new(*cost.q());
        let min = eig.eigenvalues.min();
        assert!(min >= -1e-10 * cost.q().norm(), "min eig {min}");
        // homogenizer row of the unknown-scale reduction is zero
        assert_eq!(cost.q_homog().row(9).norm(), 0.0);
        assert_eq!(cost.q_homog().column(9).norm(), 0.0);
    }

    #[test]
    fn recover_translation_scale_on_noise_free_data() {
        let mut r = rng(23);
        for &alpha in &[0.3, 1.0, 4.0] {
            let (ds, theta) = random_noise_free(&mut r, 25, alpha, false);
            let cost = build_cost(&ds);
            let (t, a) =
                recover_translation_scale(&cost, &vectorize(theta.rotation.matrix())).unwrap();
            assert!((t - theta.translation).norm() <= 1e-8);
            assert!((a.unwrap() - alpha).abs() <= 1e-8);
        }
    }

    #[test]
    fn recover_known_scale_returns_no_alpha() {
        let mut r = rng(24);
        let (ds, theta) = random_noise_free(&mut r, 25, 1.0, true);
        let cost = build_cost(&ds);
        let (t, a) = recover_translation_scale(&cost, &vectorize(theta.rotation.matrix())).unwrap();
        assert!(a.is_none());
        assert!((t - theta.translation).norm() <= 1e-8);
    }

    #[test]
    fn recover_hand_built_two_measurement_instance() {
        // Identity extrinsic, zero offset, camera scale 2: consistent motions
        // are any (R, t) pairs shared by both sensors, with the camera
        // translations stored at half length. The unique zero-residual
        // recovery at r = vec(I) is t = 0, alpha = 2.
        let alpha = 2.0;
        let m = |phi: Vector3<f64>, t: Vector3<f64>| RigidTransform::new(exp_so3(&phi), t);
        let motions_a = vec![
            m(Vector3::new(0.0, 0.0, 0.5), Vector3::x()),
            m(Vector3::new(0.5, 0.0, 0.0), Vector3::y()),
        ];
        let motions_b: Vec<RigidTransform> = motions_a
            .iter()
            .map(|ma| RigidTransform::new(ma.rotation, ma.translation / alpha))
            .collect();
        let ds = EgomotionDataset::new(motions_a, motions_b, false).unwrap();
        let cost = build_cost(&ds);
        let (t, a) = recover_translation_scale(&cost, &vectorize(&Matrix3::identity())).unwrap();
        assert!(t.norm() <= 1e-12, "t = {t:?}");
        assert!((a.unwrap() - alpha).abs() <= 1e-12);
        assert!(evaluate_cost_residual(&ds, &Rotation::identity(), &t, a.unwrap()) <= 1e-28);
    }

    #[test]
    fn recovery_minimizes_over_translation_and_scale() {
        let mut r = rng(25);
        let (ds, _) = random_noise_free(&mut r, 15, 1.0, false);
        let cost = build_cost(&ds);
        let rot = random_rotation(&mut r);
        let rv = vectorize(rot.matrix());
        let (t, a) = recover_translation_scale(&cost, &rv).unwrap();
        let base = cost.quadratic_cost(&t, a.unwrap(), &rv);
        for _ in 0..100 {
            let dt = Vector3::new(
                r.random::<f64>() - 0.5,
                r.random::<f64>() - 0.5,
                r.random::<f64>() - 0.5,
            )
            .normalize()
                * 1e-3;
            let da = (r.random::<f64>() - 0.5) * 2e-3;
            let perturbed = cost.quadratic_cost(&(t + dt), a.unwrap() + da, &rv);
            assert!(perturbed + 1e-15 >= base);
        }
    }

    #[test]
    fn under_excited_translations_error() {
        // Identity motions leave the eliminated block singular.
        let ds = EgomotionDataset::new(
            vec![RigidTransform::identity(); 3],
            vec![RigidTransform::identity(); 3],
            false,
        )
        .unwrap();
        let cost = build_cost(&ds);
        assert!(matches!(
            recover_translation_scale(&cost, &vectorize(&Matrix3::identity())),
            Err(ProblemError::UnderExcitedTranslations { .. })
        ));
    }

    #[test]
    fn schur_reduction_consistency() {
        let mut r = rng(26);
        for scale_known in [false, true] {
            let (ds, theta) = random_noise_free(&mut r, 18, 1.0, scale_known);
            let cost = build_cost(&ds);
            // ground truth: both sides vanish
            let rv = vectorize(theta.rotation.matrix());
            let (reduced, full) = schur_consistency_check(&cost, &rv).unwrap();
            // Both vanish at ground truth, up to the cancellation floor of the
            // Schur complement (eps scaled by |Q| and its conditioning).
            let floor = 1e-12 * (1.0 + cost.q().norm()) * cost.translation_condition().max(1.0);
            assert!(reduced.abs() <= floor, "reduced={reduced} floor={floor}");
            assert!(full.abs() <= floor, "full={full}");
            // random r: the two routes agree
            for _ in 0..25 {
                let rv = vectorize(random_rotation(&mut r).matrix());
                let (reduced, full) = schur_consistency_check(&cost, &rv).unwrap();
                assert!(
                    (reduced - full).abs() <= 1e-9 * (1.0 + full.abs()),
                    "reduced={reduced} full={full}"
                );
                if !scale_known {
                    // homogeneity: scaling r by 2 scales both values by 4
                    // (the known-scale form is affine in r through y = 1)
                    let (r4, f4) = schur_consistency_check(&cost, &(2.0 * rv)).unwrap();
                    assert!((r4 - 4.0 * reduced).abs() <= 1e-9 * (1.0 + r4.abs()));
                    assert!((f4 - 4.0 * full).abs() <= 1e-9 * (1.0 + f4.abs()));
                }
            }
        }
    }

    #[test]
    fn reduction_matches_named_blocks() {
        // Q_reduced = Q_r - Q_{ta,r}' Q_ta^-1 Q_{ta,r}, assembled from the
        // exposed block accessors.
        let mut r = rng(32);
        let (ds, _) = random_noise_free(&mut r, 15, 1.8, false);
        let cost = build_cost(&ds);
        let q_ta = cost.q_translation_scale();
        assert_eq!(q_ta.nrows(), 4);
        let q_tar = cost.q_translation_rotation();
        let q_r = cost.q_rotation();
        let reduced = nalgebra::DMatrix::from_iterator(9, 9, q_r.iter().copied())
            - q_tar.transpose() * q_ta.try_inverse().unwrap() * &q_tar;
        for i in 0..9 {
            for j in 0..9 {
                assert!(
                    (reduced[(i, j)] - cost.q_reduced()[(i, j)]).abs()
                        <= 1e-9 * (1.0 + cost.q().norm()),
                    "block mismatch at ({i},{j})"
                );
            }
        }
        // known scale: the eliminated block is 3x3
        let (ds, _) = random_noise_free(&mut r, 15, 1.0, true);
        let cost = build_cost(&ds);
        assert_eq!(cost.q_translation_scale().nrows(), 3);
        assert_eq!(cost.q_translation_rotation().nrows(), 3);
    }

    #[test]
    fn reduced_cost_lower_bounds_random_translations() {
        let mut r = rng(27);
        let (ds, _) = random_noise_free(&mut r, 10, 1.0, false);
        let cost = build_cost(&ds);
        for _ in 0..20 {
            let rv = vectorize(random_rotation(&mut r).matrix());
            let reduced = cost.reduced_cost(&rv);
            for _ in 0..100 {
                let t = Vector3::new(
                    4.0 * r.random::<f64>() - 2.0,
                    4.0 * r.random::<f64>() - 2.0,
                    4.0 * r.random::<f64>() - 2.0,
                );
                let alpha = 4.0 * r.random::<f64>() - 2.0;
                assert!(cost.quadratic_cost(&t, alpha, &rv) + 1e-12 >= reduced);
            }
        }
    }

    #[test]
    fn known_scale_and_unknown_scale_agree_on_rotation() {
        // On alpha = 1 data the two reductions share the same minimizing R.
        let mut r = rng(28);
        let (ds_unknown, theta) = random_noise_free(&mut r, 20, 1.0, false);
        let ds_known = EgomotionDataset::new(
            ds_unknown.motions_a().to_vec(),
            ds_unknown.motions_b().to_vec(),
            true,
        )
        .unwrap();
        let cu = build_cost(&ds_unknown);
        let ck = build_cost(&ds_known);
        let rv = vectorize(theta.rotation.matrix());
        assert!(cu.reduced_cost(&rv).abs() <= 1e-15 * (1.0 + cu.q().norm()));
        assert!(ck.reduced_cost(&rv).abs() <= 1e-15 * (1.0 + ck.q().norm()));
        // and a perturbed rotation costs strictly more under both
        let perturbed = exp_so3(&Vector3::new(0.05, -0.02, 0.03)) * theta.rotation;
        let pv = vectorize(perturbed.matrix());
        assert!(cu.reduced_cost(&pv) > 1e-6);
        assert!(ck.reduced_cost(&pv) > 1e-6);
        assert!(rotation_geodesic_error(&perturbed, &theta.rotation) > 1e-3);
    }

    #[test]
    fn observability_rejects_single_axis_motion() {
        let mut r = rng(29);
        let axis = Vector3::z();
        let motions: Vec<RigidTransform> = (0..10)
            .map(|_| {
                RigidTransform::new(
                    exp_so3(&(axis * (0.1 + 0.2 * r.random::<f64>()))),
                    Vector3::new(r.random::<f64>(), r.random::<f64>(), r.random::<f64>()),
                )
            })
            .collect();
        let ds = EgomotionDataset::new(motions.clone(), motions, false).unwrap();
        let report = observability_check(&ds, &Rotation::identity(), &Default::default());
        assert!(!report.ok);
        assert!(!report.messages.is_empty());
    }

    #[test]
    fn observability_rejects_pure_translation() {
        let mut r = rng(30);
        let motions: Vec<RigidTransform> = (0..10)
            .map(|_| {
                RigidTransform::new(
                    Rotation::identity(),
                    Vector3::new(r.random::<f64>(), r.random::<f64>(), r.random::<f64>()),
                )
            })
            .collect();
        let ds = EgomotionDataset::new(motions.clone(), motions, false).unwrap();
        let report = observability_check(&ds, &Rotation::identity(), &Default::default());
        assert!(!report.ok);
    }

    #[test]
    fn observability_accepts_multi_axis_motion() {
        let mut r = rng(31);
        let (ds, theta) = random_noise_free(&mut r, 10, 1.0, false);
        let report = observability_check(&ds, &theta.rotation, &Default::default());
        assert!(report.ok, "{:?}", report.messages);
        assert!(report.span_margin > 0.0);
        assert!(report.best_pair.is_some());
    }

    #[test]
    fn observability_minimal_two_measurement_instance() {
        // Two motions about distinct axes with translations that break the span.
        let m1 = RigidTransform::new(exp_so3(&Vector3::new(0.4, 0.0, 0.0)), Vector3::x());
        let m2 = RigidTransform::new(exp_so3(&Vector3::new(0.0, 0.4, 0.0)), Vector3::y());
        let ds = EgomotionDataset::new(vec![m1, m2], vec![m1, m2], false).unwrap();
        let report = observability_check(&ds, &Rotation::identity(), &Default::default());
        assert!(report.ok);
        assert_eq!(report.best_pair, Some((0, 1)));
    }
}
