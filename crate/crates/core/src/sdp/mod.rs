//! Solving compiled SDPs behind a pluggable backend, with an independent
//! re-check of whatever the backend returns.

mod certify;
mod clarabel_backend;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sos::SdpProblem;

pub use certify::{certify, Certification};
pub use clarabel_backend::ClarabelBackend;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIter,
    NumericalTrouble,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iter: 200,
            verbose: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// Value per decision variable, indexed like `SdpProblem::var_kinds`.
    pub primal: Vec<f64>,
    /// Lagrange multiplier per equality row (the moment-side unknowns).
    pub duals: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `max |A x - b|`.
    pub max_row_residual: f64,
    /// Row residual relative to `max(1, |b|_inf, |x|_inf)`.
    pub rel_row_residual: f64,
    pub iterations: u32,
    pub solve_time_s: f64,
    /// Backend-native status text.
    pub backend_status: String,
}

impl SdpSolution {
    pub fn gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs()
    }
}

pub trait SdpBackend: Send + Sync {
    fn name(&self) -> &'static str;

    /// Solves `problem`. Structural errors are `Err`; solver-side failures
    /// come back as a non-`Optimal` status.
    fn solve(&self, problem: &SdpProblem, options: &SolverOptions) -> Result<SdpSolution>;
}

/// Solves with the default backend.
pub fn solve(problem: &SdpProblem, options: &SolverOptions) -> Result<SdpSolution> {
    ClarabelBackend.solve(problem, options)
}
