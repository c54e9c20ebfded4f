//! Synthetic trajectory generation, egomotion derivation, and noise injection.
//!
//! Sensor `a` travels along a parametric path over an undulating height
//! field `z = A sin(wx x) sin(wy y)`, with its x-axis tangent to the path and
//! z-axis normal to the surface. Sensor `b`'s absolute poses follow from the
//! ground-truth extrinsic transform, relative motions are extracted, the
//! camera translations are converted to scale-ambiguous units, and finally
//! Gaussian noise perturbs every translation and rotation (left perturbation
//! on SO(3)).

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::SynthError;
use crate::geometry::{exp_so3, RigidTransform, Rotation};
use crate::problem::EgomotionDataset;

/// Parametric path in the horizontal plane, sampled by arc length.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum PathShape {
    /// Straight segment from the origin along +x.
    Line { length: f64 },
    /// Full circle of the given radius, centered at the origin.
    Circle { radius: f64 },
    /// `x = ax sin(fx u + phase), y = ay sin(fy u)` over one period.
    Lissajous {
        amp_x: f64,
        amp_y: f64,
        freq_x: f64,
        freq_y: f64,
        phase: f64,
    },
}

impl PathShape {
    fn parameter_span(&self) -> f64 {
        match self {
            PathShape::Line { .. } => 1.0,
            PathShape::Circle { .. } => std::f64::consts::TAU,
            PathShape::Lissajous { .. } => std::f64::consts::TAU,
        }
    }

    fn point(&self, u: f64) -> (f64, f64) {
        match *self {
            PathShape::Line { length } => (length * u, 0.0),
            PathShape::Circle { radius } => (radius * u.cos(), radius * u.sin()),
            PathShape::Lissajous {
                amp_x,
                amp_y,
                freq_x,
                freq_y,
                phase,
            } => (
                amp_x * (freq_x * u + phase).sin(),
                amp_y * (freq_y * u).sin(),
            ),
        }
    }

    fn derivative(&self, u: f64) -> (f64, f64) {
        match *self {
            PathShape::Line { length } => (length, 0.0),
            PathShape::Circle { radius } => (-radius * u.sin(), radius * u.cos()),
            PathShape::Lissajous {
                amp_x,
                amp_y,
                freq_x,
                freq_y,
                phase,
            } => (
                amp_x * freq_x * (freq_x * u + phase).cos(),
                amp_y * freq_y * (freq_y * u).cos(),
            ),
        }
    }
}

/// Height field `z = amplitude * sin(freq_x x) * sin(freq_y y)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SurfaceConfig {
    pub amplitude: f64,
    pub freq_x: f64,
    pub freq_y: f64,
}

impl SurfaceConfig {
    pub fn flat() -> Self {
        SurfaceConfig {
            amplitude: 0.0,
            freq_x: 1.0,
            freq_y: 1.0,
        }
    }

    fn height(&self, x: f64, y: f64) -> f64 {
        self.amplitude * (self.freq_x * x).sin() * (self.freq_y * y).sin()
    }

    fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.amplitude * self.freq_x * (self.freq_x * x).cos() * (self.freq_y * y).sin(),
            self.amplitude * self.freq_y * (self.freq_x * x).sin() * (self.freq_y * y).cos(),
        )
    }
}

/// Ground-truth trajectory configuration.
///
/// `num_steps` counts poses; the derived dataset has `num_steps - 1` relative
/// motions. Leaving `gt_extrinsic` or `gt_scale` unset samples them per trial
/// (rotation uniform on SO(3), translation uniform in the unit box, scale
/// from the caller-provided range).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub num_steps: usize,
    pub path: PathShape,
    pub surface: SurfaceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_extrinsic: Option<SerializableTransform>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_scale: Option<f64>,
    /// When set, every consecutive relative rotation must fall inside this
    /// angle range (radians); generation fails otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_magnitude_range: Option<(f64, f64)>,
}

impl Default for TrajectoryConfig {
    /// Undulating-circle defaults producing per-step rotations about all
    /// three axes with magnitudes inside [0.05, 0.3] rad.
    fn default() -> Self {
        TrajectoryConfig {
            num_steps: 51,
            path: PathShape::Circle { radius: 2.0 },
            surface: SurfaceConfig {
                amplitude: 0.3,
                freq_x: 1.3,
                freq_y: 0.9,
            },
            gt_extrinsic: None,
            gt_scale: None,
            rotation_magnitude_range: Some((0.05, 0.3)),
        }
    }
}

/// Quaternion-plus-translation form of a rigid transform for configs/files.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SerializableTransform {
    /// Unit quaternion `(w, x, y, z)` with `w >= 0`.
    pub q: [f64; 4],
    pub t: [f64; 3],
}

impl SerializableTransform {
    pub fn from_transform(tf: &RigidTransform) -> Self {
        let uq = tf.rotation.to_unit_quaternion();
        let q = uq.quaternion();
        let sign = if q.w < 0.0 { -1.0 } else { 1.0 };
        SerializableTransform {
            q: [sign * q.w, sign * q.i, sign * q.j, sign * q.k],
            t: [tf.translation.x, tf.translation.y, tf.translation.z],
        }
    }

    pub fn to_transform(&self) -> Result<RigidTransform, crate::error::GeometryError> {
        let q = nalgebra::Quaternion::new(self.q[0], self.q[1], self.q[2], self.q[3]);
        let norm = q.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(crate::error::GeometryError::NotARotation {
                orthogonality_residual: (norm - 1.0).abs(),
                determinant: f64::NAN,
            });
        }
        let uq = nalgebra::UnitQuaternion::from_quaternion(q);
        Ok(RigidTransform::new(
            Rotation::from_unit_quaternion(&uq),
            Vector3::new(self.t[0], self.t[1], self.t[2]),
        ))
    }
}

/// Noise model for egomotion measurements.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct NoiseConfig {
    pub translation_mode: TranslationNoiseMode,
    /// Percent of the per-step translation magnitude, or length units,
    /// depending on the mode.
    pub translation_sigma: f64,
    /// Standard deviation of the rotation perturbation vector, radians.
    pub rotation_sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TranslationNoiseMode {
    RelativePercent,
    Absolute,
}

impl NoiseConfig {
    pub fn noiseless(seed: u64) -> Self {
        NoiseConfig {
            translation_mode: TranslationNoiseMode::RelativePercent,
            translation_sigma: 0.0,
            rotation_sigma: 0.0,
            seed,
        }
    }
}

/// Generates absolute poses of sensor `a` along the configured path.
///
/// The frame at each sample has its x-axis along the unit tangent of the 3D
/// curve and its z-axis along the surface normal (the two are orthogonal by
/// construction since the curve lies on the surface); y completes the
/// right-handed frame. Samples are equally spaced in arc length.
pub fn generate_trajectory(cfg: &TrajectoryConfig) -> Result<Vec<RigidTransform>, SynthError> {
    if cfg.num_steps < 3 {
        return Err(SynthError::TooFewPoses { got: cfg.num_steps });
    }
    if let Some(alpha) = cfg.gt_scale {
        if alpha <= 0.0 {
            return Err(SynthError::NonPositiveScale { alpha });
        }
    }

    let span = cfg.path.parameter_span();
    // Dense arc-length table over the 3D curve (path lifted onto the surface).
    let dense = (cfg.num_steps * 64).max(4096);
    let mut cumulative = Vec::with_capacity(dense + 1);
    cumulative.push(0.0);
    let mut prev = curve_point(cfg, 0.0);
    for i in 1..=dense {
        let u = span * i as f64 / dense as f64;
        let p = curve_point(cfg, u);
        let step = (p - prev).norm();
        cumulative.push(cumulative[i - 1] + step);
        prev = p;
    }
    let total = *cumulative.last().expect("non-empty table");

    let mut poses = Vec::with_capacity(cfg.num_steps);
    for k in 0..cfg.num_steps {
        let target = total * k as f64 / (cfg.num_steps - 1) as f64;
        let u = invert_arc_length(&cumulative, target, span);
        poses.push(pose_at(cfg, u, k)?);
    }

    if let Some((min, max)) = cfg.rotation_magnitude_range {
        for (step, pair) in poses.windows(2).enumerate() {
            let rel = pair[0].inverse().compose(&pair[1]);
            let angle = rel.rotation.angle();
            if angle < min - 1e-9 || angle > max + 1e-9 {
                return Err(SynthError::RotationMagnitudeOutOfRange {
                    step,
                    angle,
                    min,
                    max,
                });
            }
        }
    }

    Ok(poses)
}

fn curve_point(cfg: &TrajectoryConfig, u: f64) -> Vector3<f64> {
    let (x, y) = cfg.path.point(u);
    Vector3::new(x, y, cfg.surface.height(x, y))
}

fn invert_arc_length(cumulative: &[f64], target: f64, span: f64) -> f64 {
    let dense = cumulative.len() - 1;
    let idx = cumulative.partition_point(|&s| s < target).min(dense);
    if idx == 0 {
        return 0.0;
    }
    let (s0, s1) = (cumulative[idx - 1], cumulative[idx]);
    let frac = if s1 > s0 {
        (target - s0) / (s1 - s0)
    } else {
        0.0
    };
    span * ((idx - 1) as f64 + frac) / dense as f64
}

fn pose_at(cfg: &TrajectoryConfig, u: f64, index: usize) -> Result<RigidTransform, SynthError> {
    let (x, y) = cfg.path.point(u);
    let (dx, dy) = cfg.path.derivative(u);
    let (zx, zy) = cfg.surface.gradient(x, y);
    // Tangent of the lifted curve and surface normal; orthogonal analytically.
    let tangent = Vector3::new(dx, dy, zx * dx + zy * dy);
    let tangent_norm = tangent.norm();
    if tangent_norm < 1e-12 {
        return Err(SynthError::DegenerateFrame {
            index,
            tangent_norm,
        });
    }
    let x_axis = tangent / tangent_norm;
    let normal = Vector3::new(-zx, -zy, 1.0);
    // Gram-Schmidt guards against rounding in the analytic orthogonality.
    let z_axis = (normal - x_axis * normal.dot(&x_axis)).normalize();
    let y_axis = z_axis.cross(&x_axis);
    let rot = Matrix3::from_columns(&[x_axis, y_axis, z_axis]);
    Ok(RigidTransform::new(
        Rotation::from_matrix(rot).map_err(|_| SynthError::DegenerateFrame {
            index,
            tangent_norm,
        })?,
        curve_point(cfg, u),
    ))
}

/// Derives the noise-free paired egomotion dataset from sensor `a`'s poses.
///
/// Sensor `b`'s absolute poses satisfy `T_wa = T_wb * Theta`; relative
/// motions are consecutive pose differences. The camera's stored translations
/// are its scale-ambiguous measurements `t_true / alpha`, so the estimation
/// problem recovers exactly `alpha` (and the dataset has zero residual at the
/// ground truth by construction).
pub fn derive_egomotion(
    poses_a: &[RigidTransform],
    theta: &RigidTransform,
    alpha: f64,
    scale_known: bool,
) -> Result<EgomotionDataset, SynthError> {
    if alpha <= 0.0 {
        return Err(SynthError::NonPositiveScale { alpha });
    }
    if scale_known && (alpha - 1.0).abs() > 0.0 {
        return Err(SynthError::Problem(
            crate::error::ProblemError::KnownScaleWithScaling { alpha },
        ));
    }
    let theta_inv = theta.inverse();
    let poses_b: Vec<RigidTransform> = poses_a.iter().map(|p| p.compose(&theta_inv)).collect();
    let relative = |poses: &[RigidTransform]| -> Vec<RigidTransform> {
        poses
            .windows(2)
            .map(|w| w[0].inverse().compose(&w[1]))
            .collect()
    };
    let motions_a = relative(poses_a);
    let mut motions_b = relative(&poses_b);
    for m in &mut motions_b {
        m.translation /= alpha;
    }
    Ok(EgomotionDataset::new(motions_a, motions_b, scale_known)?)
}

/// Applies Gaussian noise to every measurement.
///
/// Rotations receive a left perturbation `exp(phi) * R` with
/// `phi ~ N(0, sigma_R^2 I)`; translations an additive offset whose standard
/// deviation is either absolute or a percentage of that step's translation
/// magnitude. Deterministic for a fixed seed. Draw order is fixed as
/// (rotation a, translation a, rotation b, translation b) per step.
pub fn add_noise(dataset: &EgomotionDataset, noise: &NoiseConfig) -> EgomotionDataset {
    use rand::SeedableRng;
    let mut rng = ChaCha12Rng::seed_from_u64(noise.seed);
    let mut perturb = |m: &RigidTransform| -> RigidTransform {
        let phi = Vector3::new(
            noise.rotation_sigma * rng.sample::<f64, _>(StandardNormal),
            noise.rotation_sigma * rng.sample::<f64, _>(StandardNormal),
            noise.rotation_sigma * rng.sample::<f64, _>(StandardNormal),
        );
        let rotation = exp_so3(&phi) * m.rotation;
        let sigma_t = match noise.translation_mode {
            TranslationNoiseMode::RelativePercent => {
                noise.translation_sigma / 100.0 * m.translation.norm()
            }
            TranslationNoiseMode::Absolute => noise.translation_sigma,
        };
        let offset = Vector3::new(
            sigma_t * rng.sample::<f64, _>(StandardNormal),
            sigma_t * rng.sample::<f64, _>(StandardNormal),
            sigma_t * rng.sample::<f64, _>(StandardNormal),
        );
        RigidTransform::new(rotation, m.translation + offset)
    };

    let mut motions_a = Vec::with_capacity(dataset.len());
    let mut motions_b = Vec::with_capacity(dataset.len());
    for (ma, mb) in dataset.motions_a().iter().zip(dataset.motions_b()) {
        motions_a.push(perturb(ma));
        motions_b.push(perturb(mb));
    }
    EgomotionDataset::new(motions_a, motions_b, dataset.scale_known())
        .expect("noise preserves dataset shape")
}

/// Samples any unset ground-truth fields and returns the complete tuple
/// `(poses, theta, alpha)` for one trial.
pub fn sample_instance<R: Rng + ?Sized>(
    cfg: &TrajectoryConfig,
    scale_range: (f64, f64),
    rng: &mut R,
) -> Result<(Vec<RigidTransform>, RigidTransform, f64), SynthError> {
    let poses = generate_trajectory(cfg)?;
    let theta = match &cfg.gt_extrinsic {
        Some(st) => st.to_transform().map_err(|_| SynthError::DegenerateFrame {
            index: 0,
            tangent_norm: 0.0,
        })?,
        None => RigidTransform::new(
            crate::geometry::random_rotation(rng),
            Vector3::new(
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
            ),
        ),
    };
    let alpha = match cfg.gt_scale {
        Some(a) => a,
        None => scale_range.0 + (scale_range.1 - scale_range.0) * rng.random::<f64>(),
    };
    if alpha <= 0.0 {
        return Err(SynthError::NonPositiveScale { alpha });
    }
    Ok((poses, theta, alpha))
}
