//! Lagrangian-dual SDP solve, primal extraction, and optimality certification.
//!
//! The reduced calibration cost `r~' Q_homog r~` with the homogenized
//! rotation-group constraints forms a QCQP whose Lagrangian dual is
//!
//! ```text
//! max nu_y   s.t.   Z(nu) = Q_homog + sum_k nu_k A_k - nu_y A_y >= 0
//! ```
//!
//! Weak duality makes the optimal `nu_y` a lower bound on the calibration
//! cost; when a feasible `(R, t, alpha)` matches that bound the estimate is
//! certified globally optimal. The dual is solved with the embedded
//! interior-point method in [`ipm`]; candidates come out of the nullspace of
//! `Z` at the optimum, are normalized by the homogenization component, and
//! are certified by the three post-hoc criteria: a usable (and unambiguous)
//! nullspace, near-orthogonality of the unprojected rotation, and a relative
//! duality gap within threshold.

pub mod ipm;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::constraints::{build_constraints, ConstraintConfig, ConstraintSet, Matrix10, Vec10};
use crate::error::{CalibrateError, ExtractError, SolveError};
use crate::geometry::{nearest_rotation, unvectorize, vectorize, Rotation, Vec9};
use crate::problem::{
    build_cost, evaluate_cost_residual, recover_translation_scale, CostMatrices, EgomotionDataset,
};

pub use ipm::Termination;

/// Options for the embedded dual solver, surfaced on the CLI.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Relative objective-convergence tolerance.
    pub objective_tolerance: f64,
    /// PSD slack accepted on the returned `Z`: `lambda_min >= -tol * max(1, |Z|)`.
    pub psd_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 100,
            objective_tolerance: 1e-11,
            psd_tolerance: 1e-8,
        }
    }
}

/// Termination record of one dual solve.
#[derive(Debug, Clone)]
pub struct SolverStats {
    pub iterations: usize,
    pub runtime_seconds: f64,
    pub termination: Termination,
    pub relative_gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
}

/// Optimal dual multipliers and the PSD matrix they certify with.
#[derive(Debug, Clone)]
pub struct DualSolution {
    /// Multipliers in constraint-set order, with `nu_y` last.
    pub nu: DVector<f64>,
    /// The dual objective `nu_y` (a lower bound on the primal cost).
    pub objective: f64,
    /// `Z(nu)`, assembled from the returned multipliers.
    pub z: Matrix10,
    pub stats: SolverStats,
}

/// Thresholds used when reading candidates out of the nullspace of `Z`.
#[derive(Debug, Clone, Copy)]
pub struct ExtractionOptions {
    /// Singular values of `Z` below this are treated as zero.
    pub singular_value_threshold: f64,
    /// Minimum magnitude of the homogenization component for normalization.
    pub homogenizer_threshold: f64,
}

impl Default for ExtractionOptions {
    fn default() -> Self {
        ExtractionOptions {
            singular_value_threshold: 1e-3,
            homogenizer_threshold: 1e-6,
        }
    }
}

/// The three certification thresholds.
#[derive(Debug, Clone, Copy)]
pub struct CertificationCriteria {
    /// Nullspace singular-value threshold (shared with extraction).
    pub singular_value_threshold: f64,
    /// Accepted `|R'R - I|_F` of the unprojected candidate.
    pub orthogonality_threshold: f64,
    /// Accepted `|primal - nu_y| / max(1, primal)`.
    pub relative_gap_threshold: f64,
}

impl Default for CertificationCriteria {
    fn default() -> Self {
        CertificationCriteria {
            singular_value_threshold: 1e-3,
            orthogonality_threshold: 1e-3,
            relative_gap_threshold: 1e-4,
        }
    }
}

/// Post-hoc global-optimality verdict.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub certified: bool,
    pub relative_gap: f64,
    pub nullspace_dim: usize,
    pub min_singular_value: f64,
    pub orthogonality_residual: f64,
    /// Criteria that failed, empty when certified.
    pub reasons: Vec<String>,
}

/// How an estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DualSdp,
    Linear,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::DualSdp => write!(f, "dual_sdp"),
            Method::Linear => write!(f, "linear"),
        }
    }
}

/// A recovered extrinsic calibration.
#[derive(Debug, Clone)]
pub struct ExtrinsicEstimate {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
    /// Recovered translation scale; absent in known-scale mode.
    pub scale: Option<f64>,
    pub primal_cost: f64,
    /// Present for the dual-SDP method; the linear baseline carries none.
    pub certificate: Option<Certificate>,
    pub method: Method,
}

/// One nullspace vector of `Z`, normalized and decoded.
#[derive(Debug, Clone)]
pub struct PrimalCandidate {
    /// `[vec(R), y]` scaled so that the homogenization component is 1.
    pub r_tilde: Vec10,
    /// `|y|` of the unit singular vector before normalization.
    pub y_magnitude: f64,
    /// Singular value of `Z` this candidate came from.
    pub singular_value: f64,
    /// Projection of the normalized candidate onto SO(3).
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
    pub scale: Option<f64>,
    /// `|M'M - I|_F` of the unprojected 3x3 block.
    pub orthogonality_residual: f64,
}

/// Result of reading the nullspace of `Z`.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub candidates: Vec<PrimalCandidate>,
    /// Number of singular values below the threshold.
    pub nullspace_dim: usize,
    pub min_singular_value: f64,
    /// Vectors that could not be decoded (ambiguity diagnostics).
    pub notes: Vec<String>,
}

/// `Z(nu) = Q_homog + sum_k nu_k A_k - nu_y A_y`, with `nu_y` last in `nu`.
///
/// Satisfies the Lagrangian identity
/// `L(r~, nu) = cost(r~) + sum_k nu_k (r~' A_k r~) + nu_y (1 - r~' A_y r~)
///            = nu_y + r~' Z r~`.
pub fn assemble_z(
    cost: &CostMatrices,
    set: &ConstraintSet,
    nu: &DVector<f64>,
) -> Result<Matrix10, SolveError> {
    if nu.len() != set.len() + 1 {
        return Err(SolveError::MultiplierLength {
            got: nu.len(),
            expected: set.len() + 1,
        });
    }
    let mut z = *cost.q_homog();
    for (k, a) in set.matrices().iter().enumerate() {
        z += a * nu[k];
    }
    z -= set.homogenizer() * nu[set.len()];
    Ok(z)
}

/// Solves the dual SDP `max nu_y s.t. Z(nu) >= 0`.
///
/// The problem is passed to the interior-point core in primal-dual standard
/// form (`min tr(Q_homog X)` over the moment matrix `X`), after normalizing
/// the cost by its Frobenius norm; multipliers and objective are mapped back
/// to the `Z(nu)` sign convention and original scale.
pub fn solve_dual(
    cost: &CostMatrices,
    set: &ConstraintSet,
    opts: &SolverOptions,
) -> Result<DualSolution, SolveError> {
    let start = crate::util::clock();
    let scale = cost.q_homog().norm().max(1e-8);
    let c = DMatrix::from_iterator(10, 10, cost.q_homog().iter().copied()) / scale;

    let mut constraints: Vec<DMatrix<f64>> = set
        .matrices()
        .iter()
        .map(|a| DMatrix::from_iterator(10, 10, a.iter().copied()))
        .collect();
    constraints.push(DMatrix::from_iterator(
        10,
        10,
        set.homogenizer().iter().copied(),
    ));
    let mut b = DVector::zeros(constraints.len());
    b[set.len()] = 1.0;

    let prob = ipm::SdpProblem { c, constraints, b };
    let ipm_opts = ipm::IpmOptions {
        max_iterations: opts.max_iterations,
        gap_tolerance: opts.objective_tolerance,
        feasibility_tolerance: (opts.objective_tolerance * 10.0).min(1e-9),
    };
    let sol = ipm::solve(&prob, &ipm_opts)?;

    // Map standard-form multipliers back: Z = C - sum y_i A_i - y_last A_y
    // matches Z = Q + sum nu_k A_k - nu_y A_y with nu_k = -y_k, nu_y = y_last.
    let m = set.len();
    let mut nu = DVector::zeros(m + 1);
    for k in 0..m {
        nu[k] = -sol.y[k] * scale;
    }
    nu[m] = sol.y[m] * scale;
    let z = assemble_z(cost, set, &nu)?;

    Ok(DualSolution {
        objective: nu[m],
        nu,
        z,
        stats: SolverStats {
            iterations: sol.iterations,
            runtime_seconds: crate::util::seconds_since(start),
            termination: sol.termination,
            relative_gap: sol.relative_gap,
            primal_infeasibility: sol.primal_infeasibility,
            dual_infeasibility: sol.dual_infeasibility,
        },
    })
}

/// Reads primal candidates out of the nullspace of `Z`.
///
/// Every singular vector of `Z` with singular value below the threshold
/// contributes: vectors with a usable homogenization component are normalized
/// to `y = 1` and decoded directly. Without handedness constraints the
/// unknown-scale dual optimum also carries a structural gauge direction with
/// `y = 0` (the cost never touches the homogenizer), so the eigenbasis of the
/// nullspace may split the solution across two vectors; in that case the
/// decoder searches the span at `y = 1` for the combinations whose rotation
/// block has the correct norm `|r|^2 = 3` and decodes those.
pub fn extract_primal(
    sol: &DualSolution,
    cost: &CostMatrices,
    opts: &ExtractionOptions,
) -> Result<Extraction, ExtractError> {
    let eig = nalgebra::SymmetricEigen::new(sol.z);
    let sigmas: Vec<f64> = eig.eigenvalues.iter().map(|l| l.abs()).collect();
    let min_singular_value = sigmas.iter().copied().fold(f64::INFINITY, f64::min);

    let null: Vec<usize> = (0..10)
        .filter(|&i| sigmas[i] < opts.singular_value_threshold)
        .collect();
    if null.is_empty() {
        return Err(ExtractError::EmptyNullspace {
            threshold: opts.singular_value_threshold,
            min_singular_value,
        });
    }

    let mut y_rich: Vec<(Vec10, f64)> = Vec::new();
    let mut y_null: Vec<(Vec10, f64)> = Vec::new();
    for &i in &null {
        let v: Vec10 = eig.eigenvectors.column(i).into_owned();
        if v[9].abs() >= opts.homogenizer_threshold {
            y_rich.push((v, sigmas[i]));
        } else {
            y_null.push((v, sigmas[i]));
        }
    }

    let mut notes = Vec::new();
    let mut candidates: Vec<PrimalCandidate> = Vec::new();
    let push_candidate = |w: Vec10,
                          y_magnitude: f64,
                          sigma: f64,
                          candidates: &mut Vec<PrimalCandidate>,
                          notes: &mut Vec<String>| {
        let r_raw: Vec9 = w.fixed_rows::<9>(0).into_owned();
        let m_raw = unvectorize(&r_raw);
        let orthogonality_residual =
            (m_raw.transpose() * m_raw - nalgebra::Matrix3::identity()).norm();
        let rotation = match nearest_rotation(&m_raw) {
            Ok(r) => r,
            Err(e) => {
                notes.push(format!(
                    "nullspace vector with sigma {sigma:.2e} does not decode to a rotation: {e}"
                ));
                return;
            }
        };
        if candidates
            .iter()
            .any(|c| crate::geometry::rotation_geodesic_error(&c.rotation, &rotation) < 1e-9)
        {
            return;
        }
        let (translation, scale) =
            match recover_translation_scale(cost, &vectorize(rotation.matrix())) {
                Ok(ts) => ts,
                Err(e) => {
                    notes.push(format!("translation recovery failed: {e}"));
                    return;
                }
            };
        candidates.push(PrimalCandidate {
            r_tilde: w,
            y_magnitude,
            singular_value: sigma,
            rotation,
            translation,
            scale,
            orthogonality_residual,
        });
    };

    for (v, sigma) in &y_rich {
        let w0 = v / v[9];
        if y_null.is_empty() {
            push_candidate(w0, v[9].abs(), *sigma, &mut candidates, &mut notes);
            continue;
        }
        // Search the span at y = 1 for rotation-norm combinations.
        for (u, u_sigma) in &y_null {
            let u_r: Vec9 = u.fixed_rows::<9>(0).into_owned();
            let u_norm = u_r.norm();
            if u_norm < 1e-12 {
                continue;
            }
            let dir = u_r / u_norm;
            let w0_r: Vec9 = w0.fixed_rows::<9>(0).into_owned();
            // |w0_r + s dir|^2 = 3
            let b = w0_r.dot(&dir);
            let c = w0_r.norm_squared() - 3.0;
            let disc = b * b - c;
            if disc < 0.0 {
                push_candidate(w0, v[9].abs(), *sigma, &mut candidates, &mut notes);
                continue;
            }
            for s in [-b + disc.sqrt(), -b - disc.sqrt()] {
                let mut w = w0;
                for k in 0..9 {
                    w[k] += s * dir[k];
                }
                push_candidate(
                    w,
                    v[9].abs(),
                    sigma.max(*u_sigma),
                    &mut candidates,
                    &mut notes,
                );
            }
        }
    }
    if y_rich.is_empty() {
        notes.push(format!(
            "all {} nullspace vectors have homogenization components below {:.1e}",
            null.len(),
            opts.homogenizer_threshold
        ));
    }

    if candidates.is_empty() {
        return Err(ExtractError::NoUsableCandidate {
            nullspace_dim: null.len(),
        });
    }
    Ok(Extraction {
        candidates,
        nullspace_dim: null.len(),
        min_singular_value,
        notes,
    })
}

/// Applies the three certification criteria to one candidate.
///
/// The primal cost is evaluated from the measurement residuals at the
/// candidate (not from the quadratic form), so the certificate compares a
/// genuinely feasible point against the dual bound.
pub fn certify(
    dataset: &EgomotionDataset,
    candidate: &PrimalCandidate,
    extraction: &Extraction,
    sol: &DualSolution,
    criteria: &CertificationCriteria,
) -> Certificate {
    let primal = evaluate_cost_residual(
        dataset,
        &candidate.rotation,
        &candidate.translation,
        candidate.scale.unwrap_or(1.0),
    );
    let relative_gap = (primal - sol.objective).abs() / primal.max(1.0);

    let mut reasons = Vec::new();
    if extraction.nullspace_dim == 0 {
        reasons.push("empty nullspace".to_string());
    }
    // Dimension 2 is allowed: without handedness couplings the unknown-scale
    // dual optimum always carries the homogenizer gauge direction alongside
    // the solution. Anything larger means multiple distinct minimizers.
    if extraction.nullspace_dim > 2 {
        reasons.push(format!(
            "nullspace dimension {}: solution is ambiguous",
            extraction.nullspace_dim
        ));
    }
    if candidate.orthogonality_residual >= criteria.orthogonality_threshold {
        reasons.push(format!(
            "orthogonality residual {:.3e} exceeds {:.1e}",
            candidate.orthogonality_residual, criteria.orthogonality_threshold
        ));
    }
    if relative_gap > criteria.relative_gap_threshold {
        reasons.push(format!(
            "relative duality gap {:.3e} exceeds {:.1e}",
            relative_gap, criteria.relative_gap_threshold
        ));
    }

    Certificate {
        certified: reasons.is_empty(),
        relative_gap,
        nullspace_dim: extraction.nullspace_dim,
        min_singular_value: extraction.min_singular_value,
        orthogonality_residual: candidate.orthogonality_residual,
        reasons,
    }
}

/// Options for the full calibration pipeline.
#[derive(Debug, Clone, Copy, Default)]
pub struct CalibrateOptions {
    pub solver: SolverOptions,
    pub extraction: ExtractionOptions,
    pub criteria: CertificationCriteria,
}

/// Runs the full certifiable pipeline on a dataset.
///
/// Composes cost assembly, constraint generation, the dual solve, nullspace
/// extraction, and certification. Returns the best certified candidate by
/// primal cost; if nothing certifies, the lowest-cost candidate is returned
/// with its (failed) certificate attached rather than suppressed.
pub fn calibrate(
    dataset: &EgomotionDataset,
    config: ConstraintConfig,
    opts: &CalibrateOptions,
) -> Result<ExtrinsicEstimate, CalibrateError> {
    let cost = build_cost(dataset);
    if !cost.translation_recoverable() {
        return Err(CalibrateError::Build(
            crate::error::ProblemError::UnderExcitedTranslations {
                condition: cost.translation_condition(),
                limit: crate::problem::TRANSLATION_CONDITION_LIMIT,
            },
        ));
    }
    let set = build_constraints(config)?;
    let sol = solve_dual(&cost, &set, &opts.solver)?;
    let extraction = extract_primal(&sol, &cost, &opts.extraction)?;

    let mut best: Option<(bool, f64, f64, ExtrinsicEstimate)> = None;
    for candidate in &extraction.candidates {
        let certificate = certify(dataset, candidate, &extraction, &sol, &opts.criteria);
        let primal_cost = evaluate_cost_residual(
            dataset,
            &candidate.rotation,
            &candidate.translation,
            candidate.scale.unwrap_or(1.0),
        );
        let estimate = ExtrinsicEstimate {
            rotation: candidate.rotation,
            translation: candidate.translation,
            scale: candidate.scale,
            primal_cost,
            certificate: Some(certificate),
            method: Method::DualSdp,
        };
        let certified = estimate
            .certificate
            .as_ref()
            .map(|c| c.certified)
            .unwrap_or(false);
        let better = match &best {
            None => true,
            Some((best_cert, best_cost, best_y, _)) => {
                // certified beats uncertified; then lower cost; then larger |y|
                (certified && !best_cert)
                    || (certified == *best_cert
                        && (primal_cost < *best_cost
                            || (primal_cost == *best_cost && candidate.y_magnitude > *best_y)))
            }
        };
        if better {
            best = Some((certified, primal_cost, candidate.y_magnitude, estimate));
        }
    }

    Ok(best
        .expect("extraction guarantees at least one candidate")
        .3)
}
