//! Rotation and rigid-transform primitives.
//!
//! Rotations are stored as plain 3x3 matrices behind the [`Rotation`] newtype,
//! which enforces orthonormality and properness on construction. Vectorization
//! is column-major throughout the crate, so the Kronecker identity
//! `vec(A X B) = (B' ⊗ A) vec(X)` holds with nalgebra's native storage order.

use nalgebra::{Matrix3, Quaternion, Rotation3, SVector, Unit, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::GeometryError;

/// Column-major vectorization of a 3x3 matrix.
pub type Vec9 = SVector<f64, 9>;

/// Frobenius tolerance on `R'R - I` for a valid rotation.
pub const ORTHONORMALITY_TOL: f64 = 1e-9;
/// Tolerance on `det(R) - 1` for a valid rotation.
pub const DETERMINANT_TOL: f64 = 1e-9;

/// A proper rotation matrix (member of SO(3)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    /// Validates orthonormality and properness before wrapping.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let ortho = (m.transpose() * m - Matrix3::identity()).norm();
        let det = m.determinant();
        if ortho > ORTHONORMALITY_TOL || (det - 1.0).abs() > DETERMINANT_TOL {
            return Err(GeometryError::NotARotation {
                orthogonality_residual: ortho,
                determinant: det,
            });
        }
        Ok(Rotation(m))
    }

    /// Wraps a matrix that is rotation-valid by construction.
    ///
    /// Debug builds still assert the invariants.
    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        debug_assert!(
            (m.transpose() * m - Matrix3::identity()).norm() <= 1e-7,
            "unchecked rotation violates orthonormality"
        );
        debug_assert!((m.determinant() - 1.0).abs() <= 1e-7);
        Rotation(m)
    }

    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    /// Rotation angle in [0, pi].
    pub fn angle(&self) -> f64 {
        let c = ((self.0.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos()
    }

    /// Axis-angle decomposition; axis is arbitrary (e1) at zero angle.
    pub fn axis_angle(&self) -> AxisAngle {
        let phi = log_so3(self);
        let angle = phi.norm();
        let axis = if angle > 0.0 {
            Unit::new_normalize(phi)
        } else {
            Vector3::x_axis()
        };
        AxisAngle { axis, angle }
    }

    pub fn to_unit_quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.0))
    }

    pub fn from_unit_quaternion(q: &UnitQuaternion<f64>) -> Self {
        Rotation(q.to_rotation_matrix().into_inner())
    }
}

impl std::ops::Mul<Rotation> for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl std::ops::Mul<&Vector3<f64>> for Rotation {
    type Output = Vector3<f64>;
    fn mul(self, rhs: &Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

/// A rigid-body transform (member of SE(3)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(rotation: Rotation, translation: Vector3<f64>) -> Self {
        RigidTransform {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        RigidTransform {
            rotation: Rotation::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * &self.translation),
        }
    }

    /// Compose: `self` then... in matrix terms `self.to_homogeneous() * rhs.to_homogeneous()`.
    pub fn compose(&self, rhs: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * rhs.rotation,
            translation: self.rotation * &rhs.translation + self.translation,
        }
    }

    pub fn to_homogeneous(&self) -> nalgebra::Matrix4<f64> {
        let mut h = nalgebra::Matrix4::identity();
        h.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(self.rotation.matrix());
        h.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        h
    }
}

impl std::ops::Mul<RigidTransform> for RigidTransform {
    type Output = RigidTransform;
    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        self.compose(&rhs)
    }
}

/// Unit axis plus angle in [0, pi].
#[derive(Debug, Clone, Copy)]
pub struct AxisAngle {
    pub axis: Unit<Vector3<f64>>,
    pub angle: f64,
}

impl AxisAngle {
    /// Angle between two rotation axes, ignoring axis sign (an axis and its
    /// negation describe the same line).
    pub fn axis_separation(&self, other: &AxisAngle) -> f64 {
        let c = self.axis.dot(&other.axis).clamp(-1.0, 1.0).abs();
        c.acos()
    }
}

/// Skew-symmetric matrix such that `hat(v) * s == v.cross(&s)`.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -v.z, v.y, //
        v.z, 0.0, -v.x, //
        -v.y, v.x, 0.0,
    )
}

/// Stacks the columns of `m` first-column-first.
pub fn vectorize(m: &Matrix3<f64>) -> Vec9 {
    Vec9::from_column_slice(m.as_slice())
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &Vec9) -> Matrix3<f64> {
    Matrix3::from_column_slice(v.as_slice())
}

/// Exponential map of so(3) via the Rodrigues formula.
pub fn exp_so3(phi: &Vector3<f64>) -> Rotation {
    let theta2 = phi.norm_squared();
    let theta = theta2.sqrt();
    let k = hat(phi);
    // Series switch keeps both coefficients accurate through theta -> 0.
    let (a, b) = if theta < 1e-6 {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Rotation::from_matrix_unchecked(Matrix3::identity() + a * k + b * (k * k))
}

/// Logarithm map of SO(3); returns the rotation vector with norm in [0, pi].
pub fn log_so3(r: &Rotation) -> Vector3<f64> {
    let uq = r.to_unit_quaternion();
    match uq.axis_angle() {
        Some((axis, angle)) => axis.into_inner() * angle,
        None => Vector3::zeros(),
    }
}

/// Relative ratio of the second singular value below which the projection of a
/// matrix onto SO(3) is treated as non-unique.
pub const PROJECTION_DEGENERACY_TOL: f64 = 1e-12;

/// Orthogonal projection onto SO(3) in the Frobenius norm.
///
/// Uses the SVD `M = U S V'` with the determinant correction
/// `R = U diag(1, 1, det(UV')) V'`, so the result is a proper rotation even
/// when `det(M) < 0`.
pub fn nearest_rotation(m: &Matrix3<f64>) -> Result<Rotation, GeometryError> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    let s = svd.singular_values;
    if s[1] <= PROJECTION_DEGENERACY_TOL * s[0] || s[0] == 0.0 {
        return Err(GeometryError::DegenerateProjection {
            singular_values: [s[0], s[1], s[2]],
        });
    }
    let d = (u * v_t).determinant();
    let sign = if d < 0.0 { -1.0 } else { 1.0 };
    let mut u = u;
    // Flip the column paired with the smallest singular value.
    u.column_mut(2).scale_mut(sign);
    Ok(Rotation::from_matrix_unchecked(u * v_t))
}

/// Geodesic distance on SO(3): the angle of `R1' R2`, in [0, pi] radians.
///
/// Computed as `atan2(|axial(R1'R2)|, (trace(R1'R2) - 1) / 2)`, which equals
/// the textbook `arccos((trace - 1) / 2)` but stays accurate near zero, where
/// the arccosine alone loses half the significand.
pub fn rotation_geodesic_error(r1: &Rotation, r2: &Rotation) -> f64 {
    let m = r1.matrix().transpose() * r2.matrix();
    let sin = Vector3::new(
        m[(2, 1)] - m[(1, 2)],
        m[(0, 2)] - m[(2, 0)],
        m[(1, 0)] - m[(0, 1)],
    )
    .norm()
        / 2.0;
    let cos = (m.trace() - 1.0) / 2.0;
    sin.atan2(cos)
}

/// Uniform sample from SO(3) via a normalized Gaussian quaternion.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    let w: f64 = rng.sample(StandardNormal);
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    let z: f64 = rng.sample(StandardNormal);
    let q = UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z));
    Rotation::from_unit_quaternion(&q)
}

/// Uniform sample from the unit sphere.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Unit<Vector3<f64>> {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        if v.norm() > 1e-12 {
            return Unit::new_normalize(v);
        }
    }
}
