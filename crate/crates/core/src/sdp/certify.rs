use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::sos::{SdpProblem, VarKind};

use super::{SdpSolution, SolverOptions};

/// Backend-independent re-check of a returned primal/dual pair.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Certification {
    pub max_row_residual: f64,
    pub rel_row_residual: f64,
    /// Smallest eigenvalue of each reconstructed Gram block.
    pub block_min_eigenvalues: Vec<f64>,
    pub min_nonneg_value: Option<f64>,
    pub gap: f64,
    pub eig_ok: bool,
    pub residual_ok: bool,
    pub gap_ok: bool,
}

impl Certification {
    pub fn passed(&self) -> bool {
        self.eig_ok && self.residual_ok && self.gap_ok
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.block_min_eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Recomputes residuals and block spectra from scratch: every Gram block
/// must have `lambda_min >= -10 feas_tol`, nonnegative scalars must be
/// `>= -10 feas_tol`, and the duality gap must sit within
/// `10 gap_tol (1 + |primal|)`.
pub fn certify(problem: &SdpProblem, solution: &SdpSolution, options: &SolverOptions) -> Certification {
    let x = &solution.primal;
    let max_row_residual = problem.max_row_residual(x);
    let scale = 1f64
        .max(problem.max_abs_rhs())
        .max(x.iter().fold(0.0, |acc: f64, v| acc.max(v.abs())));
    let rel_row_residual = max_row_residual / scale;

    let block_min_eigenvalues: Vec<f64> = (0..problem.blocks.len())
        .map(|k| {
            let q = problem.block_matrix(k, x);
            let d = q.len();
            let m = DMatrix::from_fn(d, d, |i, j| q[i][j]);
            SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
        })
        .collect();
    let min_nonneg_value = problem
        .var_kinds
        .iter()
        .zip(x)
        .filter(|(k, _)| **k == VarKind::Nonneg)
        .map(|(_, &v)| v)
        .reduce(f64::min);

    let eig_floor = -10.0 * options.feas_tol;
    let eig_ok = block_min_eigenvalues.iter().all(|&l| l >= eig_floor)
        && min_nonneg_value.is_none_or(|v| v >= eig_floor);
    let gap = solution.gap();
    Certification {
        max_row_residual,
        rel_row_residual,
        block_min_eigenvalues,
        min_nonneg_value,
        gap,
        eig_ok,
        residual_ok: rel_row_residual <= 10.0 * options.feas_tol,
        gap_ok: gap <= 10.0 * options.gap_tol * (1.0 + solution.primal_objective.abs()),
    }
}
