//! Command-line front end: dataset generation, calibration, the linear
//! baseline, observability checks, and experiment sweeps.
//!
//! Exit codes: 0 on success (calibration certified / check passed), 2 for an
//! uncertified solution or failed check, 1 on any error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use handeye::constraints::ConstraintConfig;
use handeye::error::BaselineError;
use handeye::experiment::{run_experiment, ExperimentConfig};
use handeye::geometry::Rotation;
use handeye::io::{
    estimate_error, read_json, write_json, DatasetFile, DatasetMeta, ErrorRecord, GroundTruth,
    ResultFile, TrajectoryFile,
};
use handeye::problem::{observability_check, EgomotionDataset, ObservabilityTolerances};
use handeye::sdp::{CalibrateOptions, SolverOptions};
use handeye::synth::{add_noise, derive_egomotion, sample_instance, NoiseConfig, TrajectoryConfig};

#[derive(Parser)]
#[command(
    name = "handeye",
    about = "Certifiably optimal hand-eye (AX = XB) extrinsic calibration",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trajectory and egomotion dataset.
    Gen(GenArgs),
    /// Calibrate with the certifiable dual-SDP pipeline.
    Calibrate(CalibrateArgs),
    /// Calibrate with the suboptimal linear method.
    Baseline(BaselineArgs),
    /// Check the observability conditions of a dataset.
    Check(CheckArgs),
    /// Run a success-rate / error study over a noise grid.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Generator configuration (JSON). Defaults to the built-in
    /// undulating-circle setup when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output dataset path.
    #[arg(long)]
    out: PathBuf,
    /// Output path for the absolute-pose trajectory
    /// (default: `<out>.trajectory.json`).
    #[arg(long)]
    trajectory_out: Option<PathBuf>,
    /// Seed for ground-truth sampling and noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// On-disk generator configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GenConfig {
    trajectory: TrajectoryConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    noise: Option<NoiseConfig>,
    #[serde(default)]
    scale_known: bool,
    /// Ground-truth scale sampling range when the trajectory does not pin it.
    #[serde(default = "default_scale_range")]
    scale_range: (f64, f64),
}

fn default_scale_range() -> (f64, f64) {
    (0.2, 5.0)
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            trajectory: TrajectoryConfig::default(),
            noise: None,
            scale_known: false,
            scale_range: default_scale_range(),
        }
    }
}

#[derive(Args)]
struct CalibrateArgs {
    /// Input dataset (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Constraint configuration: R, RC, RH, or RCH.
    #[arg(long, default_value = "RCH", value_parser = parse_constraints)]
    constraints: ConstraintConfig,
    /// Treat the dataset as known-scale regardless of its metadata.
    #[arg(long)]
    known_scale: bool,
    /// Relative objective tolerance of the dual solver.
    #[arg(long, default_value_t = 1e-11)]
    solver_tol: f64,
    /// Iteration cap of the dual solver.
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// PSD slack accepted on the returned dual matrix.
    #[arg(long, default_value_t = 1e-8)]
    psd_tol: f64,
    /// Write the result (JSON) here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    /// Input dataset (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Write the result (JSON) here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Input dataset (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Evaluate the span condition at the identity instead of the embedded
    /// ground-truth rotation.
    #[arg(long)]
    at_identity: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output CSV of per-trial records.
    #[arg(long)]
    out: PathBuf,
    /// Output JSON summary (default: `<out>.summary.json`).
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_constraints(s: &str) -> Result<ConstraintConfig, String> {
    ConstraintConfig::parse(s).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Baseline(args) => cmd_baseline(args),
        Command::Check(args) => cmd_check(args),
        Command::Experiment(args) => cmd_experiment(args),
    };
    match outcome {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode, String> {
    let config: GenConfig = match &args.config {
        Some(path) => read_json(path).map_err(|e| format!("reading {}: {e}", path.display()))?,
        None => GenConfig::default(),
    };

    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(args.seed);
    let (poses, theta, alpha) = sample_instance(&config.trajectory, config.scale_range, &mut rng)
        .map_err(|e| format!("trajectory generation: {e}"))?;
    let alpha = if config.scale_known { 1.0 } else { alpha };
    let clean = derive_egomotion(&poses, &theta, alpha, config.scale_known)
        .map_err(|e| format!("egomotion derivation: {e}"))?;
    let dataset = match &config.noise {
        Some(noise) => {
            let mut noise = *noise;
            noise.seed = noise.seed.wrapping_add(args.seed);
            add_noise(&clean, &noise)
        }
        None => clean,
    };

    let file = DatasetFile::from_dataset(
        &dataset,
        DatasetMeta {
            scale_known: config.scale_known,
            ground_truth: Some(GroundTruth::from_parts(&theta, alpha)),
            generator: Some(
                serde_json::to_value(&config).map_err(|e| format!("config echo: {e}"))?,
            ),
        },
    );
    file.save(&args.out)
        .map_err(|e| format!("writing {}: {e}", args.out.display()))?;

    let trajectory_out = args
        .trajectory_out
        .unwrap_or_else(|| default_trajectory_path(&args.out));
    TrajectoryFile::from_poses(&poses)
        .save(&trajectory_out)
        .map_err(|e| format!("writing {}: {e}", trajectory_out.display()))?;

    println!(
        "wrote {} ({} motions) and {} ({} poses)",
        args.out.display(),
        dataset.len(),
        trajectory_out.display(),
        poses.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn default_trajectory_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}.trajectory.json"))
}

fn load_dataset(
    path: &Path,
    force_known_scale: bool,
) -> Result<(EgomotionDataset, DatasetFile), String> {
    let file = DatasetFile::load(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
    let mut dataset = file
        .to_dataset()
        .map_err(|e| format!("decoding {}: {e}", path.display()))?;
    if force_known_scale && !dataset.scale_known() {
        dataset = EgomotionDataset::new(
            dataset.motions_a().to_vec(),
            dataset.motions_b().to_vec(),
            true,
        )
        .map_err(|e| e.to_string())?;
    }
    Ok((dataset, file))
}

fn errors_against_gt(
    estimate: &handeye::sdp::ExtrinsicEstimate,
    file: &DatasetFile,
) -> Option<ErrorRecord> {
    let gt = file.meta.ground_truth.as_ref()?;
    estimate_error(estimate, gt).ok()
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<ExitCode, String> {
    let (dataset, file) = load_dataset(&args.input, args.known_scale)?;
    let opts = CalibrateOptions {
        solver: SolverOptions {
            max_iterations: args.max_iter,
            objective_tolerance: args.solver_tol,
            psd_tolerance: args.psd_tol,
        },
        ..CalibrateOptions::default()
    };

    let estimate = match handeye::sdp::calibrate(&dataset, args.constraints, &opts) {
        Ok(est) => est,
        Err(e) => {
            // Degenerate data is the usual culprit; attach the diagnostic.
            let report = observability_check(
                &dataset,
                &Rotation::identity(),
                &ObservabilityTolerances::default(),
            );
            if !report.ok {
                eprintln!("observability: FAILED");
                for m in &report.messages {
                    eprintln!("  {m}");
                }
            }
            return Err(e.to_string());
        }
    };
    let certificate = estimate
        .certificate
        .clone()
        .expect("sdp attaches certificate");
    let errors = errors_against_gt(&estimate, &file);

    print_estimate(&estimate, errors.as_ref());
    if certificate.certified {
        println!(
            "certified: yes (relative gap {:.3e})",
            certificate.relative_gap
        );
    } else {
        println!("certified: NO");
        for reason in &certificate.reasons {
            println!("  reason: {reason}");
        }
        let report = observability_check(
            &dataset,
            &estimate.rotation,
            &ObservabilityTolerances::default(),
        );
        if !report.ok {
            println!("  observability: FAILED at the estimated rotation");
            for m in &report.messages {
                println!("    {m}");
            }
        }
    }

    if let Some(out) = &args.out {
        ResultFile::from_estimate(&estimate, None, errors)
            .save(out)
            .map_err(|e| format!("writing {}: {e}", out.display()))?;
    }

    Ok(if certificate.certified {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_baseline(args: BaselineArgs) -> Result<ExitCode, String> {
    let (dataset, file) = load_dataset(&args.input, false)?;
    let estimate = handeye::calibrate_linear(&dataset).map_err(|e| match e {
        BaselineError::AmbiguousMinimizer { .. } => format!("{e} (is the motion degenerate?)"),
        other => other.to_string(),
    })?;
    let errors = errors_against_gt(&estimate, &file);
    print_estimate(&estimate, errors.as_ref());
    if let Some(out) = &args.out {
        ResultFile::from_estimate(&estimate, None, errors)
            .save(out)
            .map_err(|e| format!("writing {}: {e}", out.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(args: CheckArgs) -> Result<ExitCode, String> {
    let (dataset, file) = load_dataset(&args.input, false)?;
    let reference = if args.at_identity {
        Rotation::identity()
    } else {
        match &file.meta.ground_truth {
            Some(gt) => {
                let theta = gt
                    .transform()
                    .map_err(|e| format!("embedded ground truth: {e}"))?;
                theta.rotation
            }
            None => Rotation::identity(),
        }
    };
    let report = observability_check(&dataset, &reference, &ObservabilityTolerances::default());
    if report.ok {
        let (i, j) = report.best_pair.expect("ok report has a pair");
        println!("observability: OK");
        println!("  best pair: motions {i} and {j}");
        println!("  axis separation: {:.4} rad", report.axis_angle_between);
        println!("  span margin (sigma_min): {:.3e}", report.span_margin);
        Ok(ExitCode::SUCCESS)
    } else {
        println!("observability: FAILED");
        for m in &report.messages {
            println!("  {m}");
        }
        Ok(ExitCode::from(2))
    }
}

fn cmd_experiment(args: ExperimentArgs) -> Result<ExitCode, String> {
    let mut config: ExperimentConfig =
        read_json(&args.config).map_err(|e| format!("reading {}: {e}", args.config.display()))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let result = run_experiment(&config).map_err(|e| e.to_string())?;

    std::fs::write(&args.out, result.to_csv())
        .map_err(|e| format!("writing {}: {e}", args.out.display()))?;
    let summary_path = args.summary.unwrap_or_else(|| {
        let stem = args
            .out
            .file_stem()
            .unwrap_or_default()
            .to_string_lossy()
            .to_string();
        args.out.with_file_name(format!("{stem}.summary.json"))
    });
    write_json(&summary_path, &result.summary)
        .map_err(|e| format!("writing {}: {e}", summary_path.display()))?;

    println!(
        "{:>9} {:>9} {:>11} {:>8} {:>10} {:>10} {:>10}",
        "noise_pct", "rot_sigma", "constraints", "method", "cert_rate", "rot_p50", "trans_p50"
    );
    for cell in &result.summary.cells {
        println!(
            "{:>9} {:>9} {:>11} {:>8} {:>10.3} {:>10.3e} {:>10.3e}",
            cell.noise_pct,
            cell.rot_sigma,
            cell.constraints.to_string(),
            cell.method.to_string(),
            cell.certified_rate,
            cell.rot_err.quantiles.p50,
            cell.trans_err.quantiles.p50,
        );
    }
    println!(
        "wrote {} ({} rows) and {}",
        args.out.display(),
        result.records.len(),
        summary_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn print_estimate(estimate: &handeye::sdp::ExtrinsicEstimate, errors: Option<&ErrorRecord>) {
    let r = estimate.rotation.matrix();
    println!("method: {}", estimate.method);
    println!("rotation:");
    for i in 0..3 {
        println!(
            "  [{:>12.8} {:>12.8} {:>12.8}]",
            r[(i, 0)],
            r[(i, 1)],
            r[(i, 2)]
        );
    }
    let t = estimate.translation;
    println!("translation: [{:.8} {:.8} {:.8}]", t.x, t.y, t.z);
    match estimate.scale {
        Some(a) => println!("scale: {a:.8}"),
        None => println!("scale: (known)"),
    }
    println!("cost: {:.6e}", estimate.primal_cost);
    if let Some(e) = errors {
        println!(
            "vs ground truth: rot {:.3e} rad, trans {:.3e}, scale {:.3e}",
            e.rot_err_rad, e.trans_err, e.scale_err
        );
    }
}
