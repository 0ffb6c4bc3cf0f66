// Provides the LAPACK/BLAS symbols the PSD cones call into.
extern crate openblas_src;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use crate::error::{Error, Result};
use crate::sos::{SdpProblem, VarKind};

/// Ratio of the tolerances handed to Clarabel to the acceptance gates.
const INNER_TOL_FACTOR: f64 = 0.1;

use super::{SdpBackend, SdpSolution, SolveStatus, SolverOptions};

/// Interior-point backend built on Clarabel.
///
/// Cone layout: equality rows (zero cone), then one nonnegative row per
/// nonnegative scalar, then one scaled-triangle PSD cone per Gram block.
/// Gram blocks are already stored column-major over the upper triangle,
/// which is Clarabel's `svec` order; off-diagonals pick up a `sqrt(2)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ClarabelBackend;

impl SdpBackend for ClarabelBackend {
    fn name(&self) -> &'static str {
        "clarabel"
    }

    fn solve(&self, problem: &SdpProblem, options: &SolverOptions) -> Result<SdpSolution> {
        problem.validate()?;
        let nv = problem.num_vars();
        if nv == 0 {
            return Err(Error::Solver("problem has no decision variables".into()));
        }

        let (mut ri, mut ci, mut vals) = (Vec::new(), Vec::new(), Vec::new());
        let mut b = Vec::new();
        let mut cones = Vec::new();

        for r in &problem.rows {
            let row = b.len();
            for &(j, c) in &r.coeffs {
                ri.push(row);
                ci.push(j);
                vals.push(c);
            }
            b.push(r.rhs);
        }
        let m_eq = b.len();
        if m_eq > 0 {
            cones.push(SupportedConeT::ZeroConeT(m_eq));
        }

        let nonneg: Vec<usize> = problem
            .var_kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == VarKind::Nonneg)
            .map(|(j, _)| j)
            .collect();
        for &j in &nonneg {
            ri.push(b.len());
            ci.push(j);
            vals.push(-1.0);
            b.push(0.0);
        }
        if !nonneg.is_empty() {
            cones.push(SupportedConeT::NonnegativeConeT(nonneg.len()));
        }

        let sqrt2 = std::f64::consts::SQRT_2;
        for blk in &problem.blocks {
            for col in 0..blk.dim {
                for row in 0..=col {
                    let j = blk.first_var + crate::sos::gram_offset(row, col);
                    ri.push(b.len());
                    ci.push(j);
                    vals.push(if row == col { -1.0 } else { -sqrt2 });
                    b.push(0.0);
                }
            }
            cones.push(SupportedConeT::PSDTriangleConeT(blk.dim));
        }

        let m = b.len();
        let a = CscMatrix::new_from_triplets(m, nv, ri, ci, vals);
        let p = CscMatrix::zeros((nv, nv));
        let mut q = vec![0.0; nv];
        for &(j, c) in &problem.objective {
            q[j] += c;
        }

        // Clarabel measures gap and residual in its own scaling; aiming below
        // the acceptance gates keeps a `Solved` answer inside them.
        let settings = DefaultSettingsBuilder::default()
            .verbose(options.verbose)
            .max_iter(options.max_iter)
            .tol_gap_abs(INNER_TOL_FACTOR * options.gap_tol)
            .tol_gap_rel(INNER_TOL_FACTOR * options.gap_tol)
            .tol_feas(INNER_TOL_FACTOR * options.feas_tol)
            .build()
            .map_err(|e| Error::Solver(format!("settings: {e:?}")))?;
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
            .map_err(|e| Error::Solver(format!("setup: {e:?}")))?;
        solver.solve();
        let sol = &solver.solution;

        // Cone-constrained entries are read back from the slack, which the
        // interior-point iterates keep strictly inside the cone; `x` only
        // matches it up to the residual of the cone rows.
        let mut primal = sol.x.clone();
        let mut row = m_eq;
        for &j in &nonneg {
            primal[j] = sol.s[row];
            row += 1;
        }
        for blk in &problem.blocks {
            for col in 0..blk.dim {
                for r in 0..=col {
                    let scale = if r == col { 1.0 } else { sqrt2 };
                    primal[blk.first_var + crate::sos::gram_offset(r, col)] = sol.s[row] / scale;
                    row += 1;
                }
            }
        }
        // Clarabel's dual satisfies q + A'z = 0; the equality multipliers in
        // the usual `max b'y` convention are -z.
        let duals: Vec<f64> = sol.z[..m_eq].iter().map(|z| -z).collect();
        let primal_objective = problem.objective_value(&primal);
        let dual_objective = sol.obj_val_dual + problem.objective_constant;
        let max_row_residual = problem.max_row_residual(&primal);
        let scale = 1f64
            .max(problem.max_abs_rhs())
            .max(primal.iter().fold(0.0, |acc: f64, x| acc.max(x.abs())));
        let rel_row_residual = max_row_residual / scale;

        let gap_ok = (primal_objective - dual_objective).abs()
            <= options.gap_tol * (1.0 + primal_objective.abs());
        let feas_ok = rel_row_residual <= options.feas_tol;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved if gap_ok && feas_ok => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                SolveStatus::PrimalInfeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::DualInfeasible,
            SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::MaxIter,
            _ => SolveStatus::NumericalTrouble,
        };
        log::debug!(
            "clarabel: {:?} after {} iterations, pobj {primal_objective:.9e} dobj {dual_objective:.9e}, rel residual {rel_row_residual:.2e}",
            sol.status,
            sol.iterations
        );

        Ok(SdpSolution {
            status,
            primal,
            duals,
            primal_objective,
            dual_objective,
            max_row_residual,
            rel_row_residual,
            iterations: sol.iterations,
            solve_time_s: sol.solve_time,
            backend_status: format!("{:?}", sol.status),
        })
    }
}
