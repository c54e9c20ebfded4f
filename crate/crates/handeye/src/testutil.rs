//! Shared helpers for unit tests.

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::geometry::{random_rotation, RigidTransform};
use crate::problem::EgomotionDataset;

/// Builds a noise-free instance directly from randomly drawn absolute poses,
/// independently of the synthetic-trajectory generator.
pub fn random_noise_free(
    rng: &mut ChaCha12Rng,
    steps: usize,
    alpha: f64,
    scale_known: bool,
) -> (EgomotionDataset, RigidTransform) {
    let theta = RigidTransform::new(
        random_rotation(rng),
        Vector3::new(
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
        ),
    );
    let poses_a: Vec<RigidTransform> = (0..=steps)
        .map(|_| {
            RigidTransform::new(
                random_rotation(rng),
                Vector3::new(
                    2.0 * rng.random::<f64>() - 1.0,
                    2.0 * rng.random::<f64>() - 1.0,
                    2.0 * rng.random::<f64>() - 1.0,
                ),
            )
        })
        .collect();
    let theta_inv = theta.inverse();
    let poses_b: Vec<RigidTransform> = poses_a.iter().map(|p| p.compose(&theta_inv)).collect();
    let rel = |poses: &[RigidTransform]| -> Vec<RigidTransform> {
        poses
            .windows(2)
            .map(|w| w[0].inverse().compose(&w[1]))
            .collect()
    };
    let motions_a = rel(&poses_a);
    let mut motions_b = rel(&poses_b);
    for m in &mut motions_b {
        // camera reports translations in scale-ambiguous units
        m.translation /= alpha;
    }
    let dataset = EgomotionDataset::new(motions_a, motions_b, scale_known).unwrap();
    (dataset, theta)
}
