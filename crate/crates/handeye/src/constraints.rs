//! Homogenized quadratic constraints for rotation-group membership.
//!
//! Every constraint is a symmetric 10x10 matrix `A_k` acting on the lifted
//! state `r~ = [vec(R), y]`, with `r~' A_k r~ = 0` on the feasible set. Row
//! orthogonality encodes `R R' = y^2 I` (6 equations), column orthogonality
//! `R' R = y^2 I` (6), and handedness the cyclic cross products
//! `R^(i) x R^(j) = y R^(k)` (9), which exclude reflections. The homogenizer
//! `A_y = e10 e10'` carries the target value `y^2 = 1`.

use nalgebra::SMatrix;

use crate::error::ConstraintError;
use crate::geometry::Vec9;

pub type Matrix10 = SMatrix<f64, 10, 10>;
pub type Vec10 = nalgebra::SVector<f64, 10>;

/// Which subsets of the rotation-group constraints to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintConfig {
    pub row_orth: bool,
    pub col_orth: bool,
    pub handedness: bool,
}

impl ConstraintConfig {
    /// Row orthogonality only (the minimal configuration).
    pub const R: ConstraintConfig = ConstraintConfig {
        row_orth: true,
        col_orth: false,
        handedness: false,
    };
    /// Row plus redundant column orthogonality.
    pub const RC: ConstraintConfig = ConstraintConfig {
        row_orth: true,
        col_orth: true,
        handedness: false,
    };
    /// Row orthogonality plus handedness.
    pub const RH: ConstraintConfig = ConstraintConfig {
        row_orth: true,
        col_orth: false,
        handedness: true,
    };
    /// The full set: row, column, and handedness.
    pub const RCH: ConstraintConfig = ConstraintConfig {
        row_orth: true,
        col_orth: true,
        handedness: true,
    };

    pub fn validate(&self) -> Result<(), ConstraintError> {
        if !self.row_orth && !self.col_orth {
            return Err(ConstraintError::NoOrthogonality);
        }
        Ok(())
    }

    pub fn parse(s: &str) -> Result<Self, ConstraintError> {
        match s.to_ascii_uppercase().as_str() {
            "R" => Ok(Self::R),
            "RC" | "R+C" => Ok(Self::RC),
            "RH" | "R+H" => Ok(Self::RH),
            "RCH" | "R+C+H" => Ok(Self::RCH),
            other => Err(ConstraintError::UnknownConfig(other.to_string())),
        }
    }
}

impl std::fmt::Display for ConstraintConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut s = String::new();
        if self.row_orth {
            s.push('R');
        }
        if self.col_orth {
            s.push('C');
        }
        if self.handedness {
            s.push('H');
        }
        write!(f, "{s}")
    }
}

impl serde::Serialize for ConstraintConfig {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for ConstraintConfig {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        ConstraintConfig::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Provenance of a single constraint matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintLabel {
    /// `(R R')_{ij} - delta_{ij} y^2 = 0`, upper triangle, 1-based indices.
    RowOrth(usize, usize),
    /// `(R' R)_{ij} - delta_{ij} y^2 = 0`.
    ColOrth(usize, usize),
    /// Component `l` of `R^(i) x R^(j) - y R^(k) = 0` for cyclic `(i, j, k)`.
    Handedness {
        triple: (usize, usize, usize),
        component: usize,
    },
}

/// The generated constraint matrices, in a fixed deterministic order.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    matrices: Vec<Matrix10>,
    labels: Vec<ConstraintLabel>,
    homogenizer: Matrix10,
    config: ConstraintConfig,
}

impl ConstraintSet {
    /// Constraint matrices with target value zero (excludes the homogenizer).
    pub fn matrices(&self) -> &[Matrix10] {
        &self.matrices
    }

    pub fn labels(&self) -> &[ConstraintLabel] {
        &self.labels
    }

    /// The homogenizer `A_y = e10 e10'` with target value one.
    pub fn homogenizer(&self) -> &Matrix10 {
        &self.homogenizer
    }

    pub fn config(&self) -> ConstraintConfig {
        self.config
    }

    /// Number of zero-target constraints (the homogenizer is extra).
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }
}

/// Index of entry `(row i, col j)` of `R` inside `vec(R)`, 1-based arguments.
#[inline]
fn idx(i: usize, j: usize) -> usize {
    3 * (j - 1) + (i - 1)
}

/// Levi-Civita symbol for 1-based indices.
fn epsilon(l: usize, m: usize, n: usize) -> f64 {
    match (l, m, n) {
        (1, 2, 3) | (2, 3, 1) | (3, 1, 2) => 1.0,
        (3, 2, 1) | (1, 3, 2) | (2, 1, 3) => -1.0,
        _ => 0.0,
    }
}

const UPPER_TRIANGLE: [(usize, usize); 6] = [(1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)];
const CYCLIC_TRIPLES: [(usize, usize, usize); 3] = [(1, 2, 3), (2, 3, 1), (3, 1, 2)];

/// Generates the constraint matrices for `config`.
///
/// The full configuration yields 21 zero-target matrices (6 row, 6 column,
/// 9 handedness) plus the homogenizer. Generation is deterministic and the
/// enumeration order is part of the public contract: row upper triangle,
/// column upper triangle, then handedness triples in cyclic order with
/// components 1..3.
pub fn build_constraints(config: ConstraintConfig) -> Result<ConstraintSet, ConstraintError> {
    config.validate()?;
    let mut matrices = Vec::new();
    let mut labels = Vec::new();

    if config.row_orth {
        for &(i, j) in &UPPER_TRIANGLE {
            let mut a = Matrix10::zeros();
            for k in 1..=3 {
                let p = idx(i, k);
                let q = idx(j, k);
                if p == q {
                    a[(p, p)] += 1.0;
                } else {
                    a[(p, q)] += 0.5;
                    a[(q, p)] += 0.5;
                }
            }
            if i == j {
                a[(9, 9)] -= 1.0;
            }
            matrices.push(a);
            labels.push(ConstraintLabel::RowOrth(i, j));
        }
    }

    if config.col_orth {
        for &(i, j) in &UPPER_TRIANGLE {
            let mut a = Matrix10::zeros();
            for k in 1..=3 {
                let p = idx(k, i);
                let q = idx(k, j);
                if p == q {
                    a[(p, p)] += 1.0;
                } else {
                    a[(p, q)] += 0.5;
                    a[(q, p)] += 0.5;
                }
            }
            if i == j {
                a[(9, 9)] -= 1.0;
            }
            matrices.push(a);
            labels.push(ConstraintLabel::ColOrth(i, j));
        }
    }

    if config.handedness {
        for &(i, j, k) in &CYCLIC_TRIPLES {
            for l in 1..=3 {
                let mut a = Matrix10::zeros();
                for m in 1..=3 {
                    for n in 1..=3 {
                        let e = epsilon(l, m, n);
                        if e != 0.0 {
                            let p = idx(m, i);
                            let q = idx(n, j);
                            a[(p, q)] += 0.5 * e;
                            a[(q, p)] += 0.5 * e;
                        }
                    }
                }
                let p = idx(l, k);
                a[(p, 9)] -= 0.5;
                a[(9, p)] -= 0.5;
                matrices.push(a);
                labels.push(ConstraintLabel::Handedness {
                    triple: (i, j, k),
                    component: l,
                });
            }
        }
    }

    let mut homogenizer = Matrix10::zeros();
    homogenizer[(9, 9)] = 1.0;

    Ok(ConstraintSet {
        matrices,
        labels,
        homogenizer,
        config,
    })
}

/// Evaluates all constraint residuals at `r~`.
///
/// Returns the zero-target residuals `r~' A_k r~` in generation order and the
/// homogenizer residual `r~' A_y r~ - 1`.
pub fn constraint_residuals(set: &ConstraintSet, rt: &Vec10) -> (Vec<f64>, f64) {
    let residuals = set
        .matrices
        .iter()
        .map(|a| (rt.transpose() * a * rt)[(0, 0)])
        .collect();
    let homog = (rt.transpose() * set.homogenizer * rt)[(0, 0)] - 1.0;
    (residuals, homog)
}

/// Lifts a 9-vector rotation parameterization to `r~ = [r, y]`.
pub fn lift(r: &Vec9, y: f64) -> Vec10 {
    let mut rt = Vec10::zeros();
    rt.fixed_rows_mut::<9>(0).copy_from(r);
    rt[9] = y;
    rt
}
