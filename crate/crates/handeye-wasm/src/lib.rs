//! Browser bindings for the interactive calibration demo.
//!
//! Three entry points, each taking and returning JSON strings so the page
//! needs no generated TypeScript: [`simulate`] builds a synthetic trajectory
//! and noisy dataset, [`run_calibration`] solves it with both the certifiable
//! dual-SDP pipeline and the linear baseline, and [`noise_sweep`] reproduces a
//! miniature certification-rate study across noise levels.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use handeye::baseline::calibrate_linear;
use handeye::constraints::ConstraintConfig;
use handeye::geometry::RigidTransform;
use handeye::io::{estimate_error, GroundTruth};
use handeye::problem::EgomotionDataset;
use handeye::sdp::{calibrate, CalibrateOptions};
use handeye::synth::{
    add_noise, derive_egomotion, sample_instance, NoiseConfig, PathShape, SurfaceConfig,
    TrajectoryConfig, TranslationNoiseMode,
};

#[derive(Debug, Clone, Deserialize)]
struct DemoParams {
    #[serde(default = "d_seed")]
    seed: u64,
    #[serde(default = "d_steps")]
    num_steps: usize,
    #[serde(default = "d_radius")]
    radius: f64,
    #[serde(default = "d_amplitude")]
    amplitude: f64,
    #[serde(default = "d_freq_x")]
    freq_x: f64,
    #[serde(default = "d_freq_y")]
    freq_y: f64,
    /// Ground-truth scale; absent means "sample it from [0.2, 5]".
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    noise_pct: f64,
    #[serde(default)]
    rotation_sigma: f64,
    #[serde(default = "d_constraints")]
    constraints: String,
}

fn d_seed() -> u64 {
    1
}
fn d_steps() -> usize {
    51
}
fn d_radius() -> f64 {
    2.0
}
fn d_amplitude() -> f64 {
    0.3
}
fn d_freq_x() -> f64 {
    1.3
}
fn d_freq_y() -> f64 {
    0.9
}
fn d_constraints() -> String {
    "RCH".to_string()
}

struct Instance {
    poses_a: Vec<RigidTransform>,
    poses_b: Vec<RigidTransform>,
    dataset: EgomotionDataset,
    gt: GroundTruth,
}

fn build_instance(params: &DemoParams) -> Result<Instance, String> {
    use rand::SeedableRng;
    let cfg = TrajectoryConfig {
        num_steps: params.num_steps.clamp(3, 400),
        path: PathShape::Circle {
            radius: params.radius,
        },
        surface: SurfaceConfig {
            amplitude: params.amplitude,
            freq_x: params.freq_x,
            freq_y: params.freq_y,
        },
        gt_extrinsic: None,
        gt_scale: params.alpha,
        rotation_magnitude_range: None,
    };
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(params.seed);
    let (poses_a, theta, alpha) =
        sample_instance(&cfg, (0.2, 5.0), &mut rng).map_err(|e| e.to_string())?;
    let theta_inv = theta.inverse();
    let poses_b: Vec<RigidTransform> = poses_a.iter().map(|p| p.compose(&theta_inv)).collect();
    let clean = derive_egomotion(&poses_a, &theta, alpha, false).map_err(|e| e.to_string())?;
    let dataset = add_noise(
        &clean,
        &NoiseConfig {
            translation_mode: TranslationNoiseMode::RelativePercent,
            translation_sigma: params.noise_pct,
            rotation_sigma: params.rotation_sigma,
            seed: params.seed ^ 0x5eed,
        },
    );
    Ok(Instance {
        poses_a,
        poses_b,
        dataset,
        gt: GroundTruth::from_parts(&theta, alpha),
    })
}

#[derive(Serialize)]
struct SimulateOutput {
    positions_a: Vec<[f64; 3]>,
    positions_b: Vec<[f64; 3]>,
    rotation_angles: Vec<f64>,
    gt: GroundTruth,
    num_motions: usize,
}

/// Generates the trajectory and dataset; returns plot-ready geometry.
#[wasm_bindgen]
pub fn simulate(params_json: &str) -> Result<String, JsValue> {
    let params: DemoParams =
        serde_json::from_str(params_json).map_err(|e| JsValue::from_str(&e.to_string()))?;
    let instance = build_instance(&params).map_err(|e| JsValue::from_str(&e))?;
    let positions = |poses: &[RigidTransform]| -> Vec<[f64; 3]> {
        poses
            .iter()
            .map(|p| [p.translation.x, p.translation.y, p.translation.z])
            .collect()
    };
    let rotation_angles = instance
        .poses_a
        .windows(2)
        .map(|w| w[0].inverse().compose(&w[1]).rotation.angle())
        .collect();
    let out = SimulateOutput {
        positions_a: positions(&instance.poses_a),
        positions_b: positions(&instance.poses_b),
        rotation_angles,
        gt: instance.gt,
        num_motions: instance.dataset.len(),
    };
    serde_json::to_string(&out).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[derive(Serialize)]
struct MethodOutput {
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
    alpha: Option<f64>,
    cost: f64,
    rot_err_rad: f64,
    trans_err: f64,
    scale_err: f64,
    certified: Option<bool>,
    relative_gap: Option<f64>,
    nullspace_dim: Option<usize>,
    orthogonality_residual: Option<f64>,
    reasons: Vec<String>,
    error: Option<String>,
}

#[derive(Serialize)]
struct CalibrateOutput {
    gt: GroundTruth,
    sdp: MethodOutput,
    linear: MethodOutput,
}

fn method_output(
    estimate: Result<handeye::sdp::ExtrinsicEstimate, String>,
    gt: &GroundTruth,
) -> MethodOutput {
    match estimate {
        Ok(est) => {
            let r = est.rotation.matrix();
            let errors = estimate_error(&est, gt).ok();
            let cert = est.certificate.as_ref();
            MethodOutput {
                rotation: [
                    [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                    [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                    [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
                ],
                translation: [est.translation.x, est.translation.y, est.translation.z],
                alpha: est.scale,
                cost: est.primal_cost,
                rot_err_rad: errors.map_or(f64::NAN, |e| e.rot_err_rad),
                trans_err: errors.map_or(f64::NAN, |e| e.trans_err),
                scale_err: errors.map_or(f64::NAN, |e| e.scale_err),
                certified: cert.map(|c| c.certified),
                relative_gap: cert.map(|c| c.relative_gap),
                nullspace_dim: cert.map(|c| c.nullspace_dim),
                orthogonality_residual: cert.map(|c| c.orthogonality_residual),
                reasons: cert.map(|c| c.reasons.clone()).unwrap_or_default(),
                error: None,
            }
        }
        Err(message) => MethodOutput {
            rotation: [[f64::NAN; 3]; 3],
            translation: [f64::NAN; 3],
            alpha: None,
            cost: f64::NAN,
            rot_err_rad: f64::NAN,
            trans_err: f64::NAN,
            scale_err: f64::NAN,
            certified: None,
            relative_gap: None,
            nullspace_dim: None,
            orthogonality_residual: None,
            reasons: Vec::new(),
            error: Some(message),
        },
    }
}

/// Runs both calibration methods on the configured instance.
#[wasm_bindgen]
pub fn run_calibration(params_json: &str) -> Result<String, JsValue> {
    let params: DemoParams =
        serde_json::from_str(params_json).map_err(|e| JsValue::from_str(&e.to_string()))?;
    let config = ConstraintConfig::parse(&params.constraints)
        .map_err(|e| JsValue::from_str(&e.to_string()))?;
    let instance = build_instance(&params).map_err(|e| JsValue::from_str(&e))?;

    let sdp = calibrate(&instance.dataset, config, &CalibrateOptions::default())
        .map_err(|e| e.to_string());
    let linear = calibrate_linear(&instance.dataset).map_err(|e| e.to_string());

    let out = CalibrateOutput {
        gt: instance.gt,
        sdp: method_output(sdp, &instance.gt),
        linear: method_output(linear, &instance.gt),
    };
    serde_json::to_string(&out).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[derive(Deserialize)]
struct SweepParams {
    #[serde(flatten)]
    base: DemoParams,
    #[serde(default = "d_levels")]
    noise_levels: Vec<f64>,
    #[serde(default = "d_trials")]
    trials: usize,
    #[serde(default = "d_sweep_configs")]
    configs: Vec<String>,
}

fn d_levels() -> Vec<f64> {
    vec![0.0, 1.0, 3.0, 5.0, 10.0]
}
fn d_trials() -> usize {
    20
}
fn d_sweep_configs() -> Vec<String> {
    vec!["R".to_string(), "RCH".to_string()]
}

#[derive(Serialize)]
struct SweepOutput {
    noise_levels: Vec<f64>,
    configs: Vec<String>,
    /// `rates[config_index][level_index]`, in [0, 1].
    rates: Vec<Vec<f64>>,
    trials: usize,
}

/// Certification-rate sweep over translation noise levels.
#[wasm_bindgen]
pub fn noise_sweep(params_json: &str) -> Result<String, JsValue> {
    let params: SweepParams =
        serde_json::from_str(params_json).map_err(|e| JsValue::from_str(&e.to_string()))?;
    let trials = params.trials.clamp(1, 200);

    let mut rates = Vec::new();
    let mut config_names = Vec::new();
    for name in &params.configs {
        let config =
            ConstraintConfig::parse(name).map_err(|e| JsValue::from_str(&e.to_string()))?;
        config_names.push(config.to_string());
        let mut per_level = Vec::new();
        for (li, &level) in params.noise_levels.iter().enumerate() {
            let mut certified = 0usize;
            for trial in 0..trials {
                let mut p = params.base.clone();
                p.seed = p
                    .seed
                    .wrapping_mul(1_000_003)
                    .wrapping_add((li * 1000 + trial) as u64);
                p.noise_pct = level;
                let Ok(instance) = build_instance(&p) else {
                    continue;
                };
                if let Ok(est) = calibrate(&instance.dataset, config, &CalibrateOptions::default())
                {
                    if est.certificate.map(|c| c.certified).unwrap_or(false) {
                        certified += 1;
                    }
                }
            }
            per_level.push(certified as f64 / trials as f64);
        }
        rates.push(per_level);
    }

    let out = SweepOutput {
        noise_levels: params.noise_levels,
        configs: config_names,
        rates,
        trials,
    };
    serde_json::to_string(&out).map_err(|e| JsValue::from_str(&e.to_string()))
}
