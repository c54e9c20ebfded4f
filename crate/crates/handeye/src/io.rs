//! File schemas: datasets, trajectories, and calibration results.
//!
//! Everything is JSON with a fixed field order (struct order) and shortest
//! round-trip float formatting, so write -> read -> write is byte-identical.
//! Rotations are stored as unit quaternions `(w, x, y, z)` with `w >= 0`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::RigidTransform;
use crate::problem::EgomotionDataset;
use crate::sdp::{Certificate, ExtrinsicEstimate, SolverStats};
use crate::synth::SerializableTransform;

pub const DATASET_SCHEMA_VERSION: u32 = 1;

#[derive(Error, Debug)]
pub enum FileError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported schema version {got} (expected {expected})")]
    SchemaVersion { got: u32, expected: u32 },
    #[error("record {index} of {sensor}: {source}")]
    BadMotion {
        sensor: &'static str,
        index: usize,
        source: crate::error::GeometryError,
    },
    #[error(transparent)]
    Dataset(#[from] crate::error::ProblemError),
}

/// One relative motion: unit quaternion `(w, x, y, z)` plus translation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct MotionRecord {
    pub q: [f64; 4],
    pub t: [f64; 3],
}

impl MotionRecord {
    pub fn from_transform(tf: &RigidTransform) -> Self {
        let st = SerializableTransform::from_transform(tf);
        MotionRecord { q: st.q, t: st.t }
    }

    pub fn to_transform(&self) -> Result<RigidTransform, crate::error::GeometryError> {
        SerializableTransform {
            q: self.q,
            t: self.t,
        }
        .to_transform()
    }
}

/// Embedded ground truth of a generated dataset.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct GroundTruth {
    /// Extrinsic rotation, quaternion `(w, x, y, z)`.
    pub q: [f64; 4],
    /// Extrinsic translation.
    pub t: [f64; 3],
    /// Translation scale of the camera measurements.
    pub alpha: f64,
}

impl GroundTruth {
    pub fn from_parts(theta: &RigidTransform, alpha: f64) -> Self {
        let st = SerializableTransform::from_transform(theta);
        GroundTruth {
            q: st.q,
            t: st.t,
            alpha,
        }
    }

    pub fn transform(&self) -> Result<RigidTransform, crate::error::GeometryError> {
        SerializableTransform {
            q: self.q,
            t: self.t,
        }
        .to_transform()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct DatasetMeta {
    pub scale_known: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruth>,
    /// Echo of the generator configuration, for provenance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<serde_json::Value>,
}

/// On-disk dataset of paired relative motions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetFile {
    pub schema_version: u32,
    pub sensor_a: Vec<MotionRecord>,
    pub sensor_b: Vec<MotionRecord>,
    pub meta: DatasetMeta,
}

impl DatasetFile {
    pub fn from_dataset(dataset: &EgomotionDataset, meta: DatasetMeta) -> Self {
        DatasetFile {
            schema_version: DATASET_SCHEMA_VERSION,
            sensor_a: dataset
                .motions_a()
                .iter()
                .map(MotionRecord::from_transform)
                .collect(),
            sensor_b: dataset
                .motions_b()
                .iter()
                .map(MotionRecord::from_transform)
                .collect(),
            meta: DatasetMeta {
                scale_known: dataset.scale_known(),
                ..meta
            },
        }
    }

    pub fn to_dataset(&self) -> Result<EgomotionDataset, FileError> {
        if self.schema_version != DATASET_SCHEMA_VERSION {
            return Err(FileError::SchemaVersion {
                got: self.schema_version,
                expected: DATASET_SCHEMA_VERSION,
            });
        }
        let decode = |records: &[MotionRecord],
                      sensor: &'static str|
         -> Result<Vec<RigidTransform>, FileError> {
            records
                .iter()
                .enumerate()
                .map(|(index, r)| {
                    r.to_transform().map_err(|source| FileError::BadMotion {
                        sensor,
                        index,
                        source,
                    })
                })
                .collect()
        };
        let motions_a = decode(&self.sensor_a, "sensor_a")?;
        let motions_b = decode(&self.sensor_b, "sensor_b")?;
        Ok(EgomotionDataset::new(
            motions_a,
            motions_b,
            self.meta.scale_known,
        )?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), FileError> {
        write_json(path, self)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, FileError> {
        read_json(path)
    }
}

/// On-disk absolute-pose trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub schema_version: u32,
    pub poses: Vec<MotionRecord>,
}

impl TrajectoryFile {
    pub fn from_poses(poses: &[RigidTransform]) -> Self {
        TrajectoryFile {
            schema_version: DATASET_SCHEMA_VERSION,
            poses: poses.iter().map(MotionRecord::from_transform).collect(),
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), FileError> {
        write_json(path, self)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, FileError> {
        read_json(path)
    }
}

/// Serializable certificate mirror.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateRecord {
    pub certified: bool,
    pub relative_gap: f64,
    pub nullspace_dim: usize,
    pub min_singular_value: f64,
    pub orthogonality_residual: f64,
    pub reasons: Vec<String>,
}

impl From<&Certificate> for CertificateRecord {
    fn from(c: &Certificate) -> Self {
        CertificateRecord {
            certified: c.certified,
            relative_gap: c.relative_gap,
            nullspace_dim: c.nullspace_dim,
            min_singular_value: c.min_singular_value,
            orthogonality_residual: c.orthogonality_residual,
            reasons: c.reasons.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverRecord {
    pub iterations: usize,
    pub runtime_seconds: f64,
    pub termination: String,
}

impl From<&SolverStats> for SolverRecord {
    fn from(s: &SolverStats) -> Self {
        SolverRecord {
            iterations: s.iterations,
            runtime_seconds: s.runtime_seconds,
            termination: s.termination.to_string(),
        }
    }
}

/// Per-metric errors of an estimate against embedded ground truth.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub rot_err_rad: f64,
    pub trans_err: f64,
    pub scale_err: f64,
}

/// On-disk calibration result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultFile {
    pub schema_version: u32,
    pub method: String,
    /// Estimated extrinsic rotation, quaternion `(w, x, y, z)`.
    pub q: [f64; 4],
    pub t: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub errors_vs_ground_truth: Option<ErrorRecord>,
}

impl ResultFile {
    pub fn from_estimate(
        estimate: &ExtrinsicEstimate,
        solver: Option<&SolverStats>,
        errors: Option<ErrorRecord>,
    ) -> Self {
        let st = SerializableTransform::from_transform(&RigidTransform::new(
            estimate.rotation,
            estimate.translation,
        ));
        ResultFile {
            schema_version: DATASET_SCHEMA_VERSION,
            method: estimate.method.to_string(),
            q: st.q,
            t: st.t,
            alpha: estimate.scale,
            cost: estimate.primal_cost,
            certificate: estimate.certificate.as_ref().map(CertificateRecord::from),
            solver: solver.map(SolverRecord::from),
            errors_vs_ground_truth: errors,
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), FileError> {
        write_json(path, self)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, FileError> {
        read_json(path)
    }
}

/// Errors of an estimate against ground truth:
/// geodesic rotation error, translation distance, absolute scale difference.
pub fn estimate_error(
    estimate: &ExtrinsicEstimate,
    gt: &GroundTruth,
) -> Result<ErrorRecord, FileError> {
    let theta = gt.transform().map_err(|source| FileError::BadMotion {
        sensor: "ground_truth",
        index: 0,
        source,
    })?;
    let rot_err_rad = crate::geometry::rotation_geodesic_error(&estimate.rotation, &theta.rotation);
    let trans_err = (estimate.translation - theta.translation).norm();
    let scale_err = match estimate.scale {
        Some(a) => (a - gt.alpha).abs(),
        None => 0.0,
    };
    Ok(ErrorRecord {
        rot_err_rad,
        trans_err,
        scale_err,
    })
}

/// Writes pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &std::path::Path, value: &T) -> Result<(), FileError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &std::path::Path) -> Result<T, FileError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::Method;
    use crate::testutil::random_noise_free;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn dataset_round_trip_is_byte_identical() {
        let mut rng = ChaCha12Rng::seed_from_u64(80);
        let (ds, theta) = random_noise_free(&mut rng, 10, 1.5, false);
        let file = DatasetFile::from_dataset(
            &ds,
            DatasetMeta {
                scale_known: false,
                ground_truth: Some(GroundTruth::from_parts(&theta, 1.5)),
                generator: None,
            },
        );
        let dir = std::env::temp_dir().join("handeye-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let p1 = dir.join("ds1.json");
        let p2 = dir.join("ds2.json");
        file.save(&p1).unwrap();
        let loaded = DatasetFile::load(&p1).unwrap();
        loaded.save(&p2).unwrap();
        assert_eq!(
            std::fs::read(&p1).unwrap(),
            std::fs::read(&p2).unwrap(),
            "write -> read -> write must be byte-identical"
        );
    }

    #[test]
    fn dataset_decode_validates_quaternions() {
        let bad = DatasetFile {
            schema_version: DATASET_SCHEMA_VERSION,
            sensor_a: vec![
                MotionRecord {
                    q: [1.0, 0.0, 0.0, 0.0],
                    t: [0.0; 3],
                },
                MotionRecord {
                    q: [0.9, 0.0, 0.0, 0.0],
                    t: [0.0; 3],
                },
            ],
            sensor_b: vec![
                MotionRecord {
                    q: [1.0, 0.0, 0.0, 0.0],
                    t: [0.0; 3],
                },
                MotionRecord {
                    q: [1.0, 0.0, 0.0, 0.0],
                    t: [0.0; 3],
                },
            ],
            meta: DatasetMeta::default(),
        };
        assert!(matches!(
            bad.to_dataset(),
            Err(FileError::BadMotion {
                sensor: "sensor_a",
                index: 1,
                ..
            })
        ));
    }

    #[test]
    fn dataset_decode_matches_source() {
        let mut rng = ChaCha12Rng::seed_from_u64(81);
        let (ds, _) = random_noise_free(&mut rng, 8, 1.0, false);
        let file = DatasetFile::from_dataset(&ds, DatasetMeta::default());
        let back = file.to_dataset().unwrap();
        for (a, b) in ds.motions_a().iter().zip(back.motions_a()) {
            assert!((a.rotation.matrix() - b.rotation.matrix()).norm() <= 1e-12);
            assert_eq!(a.translation, b.translation);
        }
    }

    #[test]
    fn schema_version_is_checked() {
        let mut rng = ChaCha12Rng::seed_from_u64(82);
        let (ds, _) = random_noise_free(&mut rng, 5, 1.0, false);
        let mut file = DatasetFile::from_dataset(&ds, DatasetMeta::default());
        file.schema_version = 99;
        assert!(matches!(
            file.to_dataset(),
            Err(FileError::SchemaVersion { got: 99, .. })
        ));
    }

    #[test]
    fn estimate_error_examples() {
        let mut rng = ChaCha12Rng::seed_from_u64(83);
        let (_, theta) = random_noise_free(&mut rng, 5, 1.0, false);
        let gt = GroundTruth::from_parts(&theta, 2.0);
        let exact = ExtrinsicEstimate {
            rotation: theta.rotation,
            translation: theta.translation,
            scale: Some(2.0),
            primal_cost: 0.0,
            certificate: None,
            method: Method::DualSdp,
        };
        let e = estimate_error(&exact, &gt).unwrap();
        assert!(e.rot_err_rad <= 1e-12 && e.trans_err == 0.0 && e.scale_err == 0.0);

        // rotation offset about x only
        let offset = crate::geometry::exp_so3(&nalgebra::Vector3::new(0.1, 0.0, 0.0));
        let rotated = ExtrinsicEstimate {
            rotation: offset * theta.rotation,
            ..exact.clone()
        };
        let e = estimate_error(&rotated, &gt).unwrap();
        assert!((e.rot_err_rad - 0.1).abs() <= 1e-9);
        assert!(e.trans_err == 0.0 && e.scale_err == 0.0);
    }
}
