//! Dense primal-dual interior-point method for small semidefinite programs.
//!
//! Solves the standard-form pair
//!
//! ```text
//! (P) min tr(C X)   s.t. tr(A_i X) = b_i,  X >= 0
//! (D) max b'y       s.t. S = C - sum_i y_i A_i >= 0
//! ```
//!
//! with the HKM search direction and Mehrotra predictor-corrector steps.
//! Everything is dense: the target problems have n ~ 10 and m <= 22, so one
//! Schur-complement factorization per iteration costs microseconds and there
//! is nothing to exploit structurally. Constraint matrices are allowed to be
//! linearly dependent (redundant rotation constraints make the Schur matrix
//! singular); the Newton system is solved through an eigenvalue pseudo-inverse
//! restricted to the range of the Schur matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::SolveError;

/// Standard-form SDP data. All matrices must be symmetric and `n x n`.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub c: DMatrix<f64>,
    pub constraints: Vec<DMatrix<f64>>,
    pub b: DVector<f64>,
}

/// Iteration limits and tolerances.
#[derive(Debug, Clone, Copy)]
pub struct IpmOptions {
    pub max_iterations: usize,
    /// Relative duality-gap tolerance.
    pub gap_tolerance: f64,
    /// Relative primal/dual feasibility tolerance.
    pub feasibility_tolerance: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        IpmOptions {
            max_iterations: 100,
            gap_tolerance: 1e-11,
            feasibility_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    IterationLimit,
    /// Progress stopped at the numerical floor before reaching tolerance.
    NumericalLimit,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Termination::Converged => write!(f, "converged"),
            Termination::IterationLimit => write!(f, "iteration limit"),
            Termination::NumericalLimit => write!(f, "numerical limit"),
        }
    }
}

/// Solution of the standard-form pair, interior by construction.
#[derive(Debug, Clone)]
pub struct IpmSolution {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub s: DMatrix<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub relative_gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
}

/// `tr(a b)` without forming the product.
fn trace_prod(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Largest step `alpha` with `p + alpha d` staying positive definite, given
/// the Cholesky factor of `p`. Returns `None` when every step is feasible.
fn max_step(chol_l: &DMatrix<f64>, d: &DMatrix<f64>) -> Option<f64> {
    // p + a d > 0  <=>  I + a L^-1 d L^-T > 0
    let w1 = chol_l.solve_lower_triangular(d)?;
    let w = chol_l.solve_lower_triangular(&w1.transpose())?;
    let mut w = w.transpose();
    symmetrize(&mut w);
    let eig = w.symmetric_eigenvalues();
    let lambda_min = eig.min();
    if lambda_min >= -1e-14 {
        None
    } else {
        Some(-1.0 / lambda_min)
    }
}

/// Solves `m x = rhs` for symmetric PSD `m`, restricting to its range.
fn solve_schur(m: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let lambda_max = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let cutoff = 1e-13 * lambda_max;
    let coeffs = eig.eigenvectors.transpose() * rhs;
    let mut scaled = DVector::zeros(coeffs.len());
    for i in 0..coeffs.len() {
        if eig.eigenvalues[i] > cutoff {
            scaled[i] = coeffs[i] / eig.eigenvalues[i];
        }
    }
    &eig.eigenvectors * scaled
}

struct Residuals {
    rd: DMatrix<f64>,
    pinf: f64,
    dinf: f64,
    pobj: f64,
    dobj: f64,
    gap: f64,
}

fn residuals(prob: &SdpProblem, x: &DMatrix<f64>, y: &DVector<f64>, s: &DMatrix<f64>) -> Residuals {
    let m = prob.constraints.len();
    let mut rp = prob.b.clone();
    for i in 0..m {
        rp[i] -= trace_prod(&prob.constraints[i], x);
    }
    let mut rd = prob.c.clone() - s;
    for i in 0..m {
        rd -= &prob.constraints[i] * y[i];
    }
    let pobj = trace_prod(&prob.c, x);
    let dobj = prob.b.dot(y);
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
    let pinf = rp.norm() / (1.0 + prob.b.norm());
    let dinf = rd.norm() / (1.0 + prob.c.norm());
    Residuals {
        rd,
        pinf,
        dinf,
        pobj,
        dobj,
        gap,
    }
}

/// Runs the interior-point iteration.
///
/// The returned iterate is the best one seen (by the worst of gap and
/// feasibility residuals); `termination` reports why iteration stopped.
pub fn solve(prob: &SdpProblem, opts: &IpmOptions) -> Result<IpmSolution, SolveError> {
    let n = prob.c.nrows();
    let m = prob.constraints.len();
    assert!(m > 0, "SDP needs at least one constraint");

    let max_a_norm = prob
        .constraints
        .iter()
        .map(|a| a.norm())
        .fold(0.0f64, f64::max);
    let sqrt_n = (n as f64).sqrt();
    let xi = prob
        .constraints
        .iter()
        .zip(prob.b.iter())
        .map(|(a, &bi)| n as f64 * (1.0 + bi.abs()) / (1.0 + a.norm()))
        .fold(10.0f64.max(sqrt_n), f64::max);
    let eta = 10.0f64.max(sqrt_n).max(prob.c.norm()).max(max_a_norm);

    let mut x = DMatrix::identity(n, n) * xi;
    let mut s = DMatrix::identity(n, n) * eta;
    let mut y = DVector::zeros(m);

    let mut best: Option<(f64, IpmSolution)> = None;
    let mut termination = Termination::IterationLimit;
    let mut iterations = 0;
    let mut consecutive_tiny_steps = 0usize;

    // At least one pass records the starting iterate.
    for iter in 0..opts.max_iterations.max(1) {
        iterations = iter;
        let res = residuals(prob, &x, &y, &s);

        let score = res.gap.max(res.pinf).max(res.dinf);
        if best.as_ref().is_none_or(|(s0, _)| score < *s0) {
            best = Some((
                score,
                IpmSolution {
                    x: x.clone(),
                    y: y.clone(),
                    s: s.clone(),
                    iterations: iter,
                    termination: Termination::Converged,
                    primal_objective: res.pobj,
                    dual_objective: res.dobj,
                    relative_gap: res.gap,
                    primal_infeasibility: res.pinf,
                    dual_infeasibility: res.dinf,
                },
            ));
        }

        if res.gap <= opts.gap_tolerance
            && res.pinf <= opts.feasibility_tolerance
            && res.dinf <= opts.feasibility_tolerance
        {
            termination = Termination::Converged;
            break;
        }

        let mu = trace_prod(&x, &s) / n as f64;
        if mu <= 1e-14 && res.pinf <= opts.feasibility_tolerance {
            termination = Termination::NumericalLimit;
            break;
        }

        let (chol_x, chol_s) = match (x.clone().cholesky(), s.clone().cholesky()) {
            (Some(cx), Some(cs)) => (cx, cs),
            _ => {
                termination = Termination::NumericalLimit;
                break;
            }
        };
        let s_inv = chol_s.inverse();
        let lx = chol_x.l();
        let ls = chol_s.l();

        // Schur matrix M_ij = tr(A_i X A_j S^-1); symmetric PSD, possibly
        // singular when the constraints are linearly dependent.
        let g: Vec<DMatrix<f64>> = prob.constraints.iter().map(|a| &x * a * &s_inv).collect();
        let mut schur = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                schur[(i, j)] = trace_prod(&prob.constraints[i], &g[j]);
            }
        }
        symmetrize(&mut schur);

        let a_of = |mat: &DMatrix<f64>| -> DVector<f64> {
            DVector::from_iterator(m, prob.constraints.iter().map(|a| trace_prod(a, mat)))
        };

        let x_rd_sinv = &x * &res.rd * &s_inv;
        let direction = |mu_target: f64, corr: Option<&DMatrix<f64>>| {
            // rhs_i = b_i - mu tr(A_i S^-1) + tr(A_i (X Rd + E) S^-1)
            let mut core = x_rd_sinv.clone();
            if let Some(e) = corr {
                core += e * &s_inv;
            }
            let rhs = &prob.b - a_of(&s_inv) * mu_target + a_of(&core);
            let dy = solve_schur(&schur, &rhs);
            let mut ds = res.rd.clone();
            for i in 0..m {
                ds -= &prob.constraints[i] * dy[i];
            }
            let mut dx = &s_inv * mu_target
                - &x
                - (&x * &ds + corr.unwrap_or(&DMatrix::zeros(n, n))) * &s_inv;
            symmetrize(&mut dx);
            (dx, dy, ds)
        };

        // Predictor (affine scaling) step.
        let (dx_a, _dy_a, ds_a) = direction(0.0, None);
        let ap_a = max_step(&lx, &dx_a).unwrap_or(1.0).min(1.0);
        let ad_a = max_step(&ls, &ds_a).unwrap_or(1.0).min(1.0);
        let x_aff = &x + &dx_a * ap_a;
        let s_aff = &s + &ds_a * ad_a;
        let mu_aff = trace_prod(&x_aff, &s_aff).max(0.0) / n as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(1e-10, 1.0);

        // Corrector with the Mehrotra second-order term.
        let e = &dx_a * &ds_a;
        let (dx, dy, ds) = direction(sigma * mu, Some(&e));

        let tau = if mu > 1e-6 { 0.95 } else { 0.99 };
        let ap = max_step(&lx, &dx).map_or(1.0, |a| (tau * a).min(1.0));
        let ad = max_step(&ls, &ds).map_or(1.0, |a| (tau * a).min(1.0));

        if ap < 1e-10 && ad < 1e-10 {
            consecutive_tiny_steps += 1;
            if consecutive_tiny_steps >= 3 {
                termination = Termination::NumericalLimit;
                break;
            }
        } else {
            consecutive_tiny_steps = 0;
        }

        x += &dx * ap;
        y += &dy * ad;
        s += &ds * ad;
        symmetrize(&mut x);
        symmetrize(&mut s);
    }

    let (_, mut sol) = best.expect("at least one iterate recorded");
    sol.iterations = iterations + 1;
    sol.termination = termination;

    // Accept numerical-limit exits only when the best iterate is close to
    // tolerance; otherwise report the failure with its residuals.
    let loose = 1e3;
    if sol.relative_gap <= loose * opts.gap_tolerance
        && sol.primal_infeasibility <= loose * opts.feasibility_tolerance
        && sol.dual_infeasibility <= loose * opts.feasibility_tolerance
    {
        Ok(sol)
    } else {
        Err(SolveError::NotConverged {
            iterations: sol.iterations,
            gap: sol.relative_gap,
            primal_infeasibility: sol.primal_infeasibility,
            dual_infeasibility: sol.dual_infeasibility,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(data: &[f64], n: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(n, n, data)
    }

    #[test]
    fn minimum_eigenvalue_problem() {
        // min tr(C X) s.t. tr(X) = 1, X >= 0 finds the smallest eigenvalue.
        let c = sym(&[2.0, 1.0, 1.0, 2.0], 2);
        let prob = SdpProblem {
            c,
            constraints: vec![DMatrix::identity(2, 2)],
            b: DVector::from_element(1, 1.0),
        };
        let sol = solve(&prob, &IpmOptions::default()).unwrap();
        assert!((sol.primal_objective - 1.0).abs() <= 1e-8);
        assert!((sol.dual_objective - 1.0).abs() <= 1e-8);
        assert_eq!(sol.termination, Termination::Converged);
    }

    #[test]
    fn diagonal_objective_with_pinned_entry() {
        // min X00 + X11 s.t. X00 = 1 -> X = e0 e0', objective 1.
        let prob = SdpProblem {
            c: DMatrix::identity(2, 2),
            constraints: vec![sym(&[1.0, 0.0, 0.0, 0.0], 2)],
            b: DVector::from_element(1, 1.0),
        };
        let sol = solve(&prob, &IpmOptions::default()).unwrap();
        assert!((sol.primal_objective - 1.0).abs() <= 1e-8);
        assert!((sol.x[(0, 0)] - 1.0).abs() <= 1e-7);
        assert!(sol.x[(1, 1)].abs() <= 1e-7);
    }

    #[test]
    fn handles_redundant_constraints() {
        // The same constraint twice: Schur matrix is singular but the
        // pseudo-inverse path still converges to the right objective.
        let c = sym(&[2.0, 0.5, 0.5, 1.0], 2);
        let a = DMatrix::identity(2, 2);
        let prob = SdpProblem {
            c,
            constraints: vec![a.clone(), a],
            b: DVector::from_vec(vec![1.0, 1.0]),
        };
        let sol = solve(&prob, &IpmOptions::default()).unwrap();
        // smallest eigenvalue of C: 1.5 - sqrt(0.5)
        let expect = 1.5 - 0.5f64.sqrt();
        assert!((sol.primal_objective - expect).abs() <= 1e-7);
    }

    #[test]
    fn weak_duality_along_the_path() {
        let c = sym(&[3.0, 1.0, 0.0, 1.0, 2.0, -1.0, 0.0, -1.0, 4.0], 3);
        let a1 = DMatrix::identity(3, 3);
        let a2 = sym(&[1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0], 3);
        let prob = SdpProblem {
            c,
            constraints: vec![a1, a2],
            b: DVector::from_vec(vec![1.0, 0.2]),
        };
        let sol = solve(&prob, &IpmOptions::default()).unwrap();
        assert!(sol.dual_objective <= sol.primal_objective + 1e-9);
        assert!(sol.relative_gap <= 1e-9);
    }
}
