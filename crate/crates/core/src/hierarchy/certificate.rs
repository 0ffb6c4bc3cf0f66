use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::poly::{Monomial, Polynomial};
use crate::sdp::{certify, Certification, SdpBackend, SolveStatus, SolverOptions};
use crate::semialgebraic::{Membership, SemialgebraicSet};

use super::tightening::{Mode, Tightening};

pub const CERTIFICATE_FORMAT: u32 = 1;

/// `v` with every coefficient below this in magnitude is degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-4;

/// Coefficients above this trigger a conditioning warning.
pub const LARGE_COEFF_WARNING: f64 = 1e4;

/// Clamp window for slightly negative `u`.
pub const U_CLAMP: f64 = 1e-12;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SolverStats {
    pub backend: String,
    pub backend_status: String,
    pub iterations: u32,
    pub solve_time_s: f64,
    pub num_vars: usize,
    pub num_rows: usize,
    pub num_blocks: usize,
    pub max_row_residual: f64,
    pub rel_row_residual: f64,
    pub gap: f64,
    pub certification: Certification,
}

/// Solved tightening of one order. `v` and `w` are stored as coefficient
/// lists over the graded-lex basis of degree `2k`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certificate {
    pub format_version: u32,
    pub n: usize,
    pub k: u32,
    pub mode: Mode,
    pub status: SolveStatus,
    /// `None` in forced mode.
    pub time_bound: Option<f64>,
    pub u: f64,
    pub basis: Vec<Monomial>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    /// SOS-side value `d_k`.
    pub objective: f64,
    /// Moment-side value `p_k` from the equality duals.
    pub moment_value: f64,
    pub degenerate: bool,
    pub warnings: Vec<String>,
    pub stats: SolverStats,
}

impl Certificate {
    /// Wraps hand-built `v`, `w` (e.g. a known analytic certificate) so the
    /// validation machinery can be pointed at it. The status is `Optimal`
    /// the backend is recorded as `manual` and the objective fields are zero;
    /// nothing is solved.
    pub fn from_polynomials(
        k: u32,
        mode: Mode,
        u: f64,
        time_bound: Option<f64>,
        v: &Polynomial,
        w: &Polynomial,
    ) -> Result<Certificate> {
        let n = v.n();
        check_dim(n, w.n())?;
        let d = 2 * k;
        if v.total_degree() > d || w.total_degree() > d {
            return Err(Error::InvalidArgument(format!("v and w must have degree <= {d}")));
        }
        let basis = crate::moments::basis(n, d);
        let v_c: Vec<f64> = basis.iter().map(|m| v.coeff(m)).collect();
        let w_c: Vec<f64> = basis.iter().map(|m| w.coeff(m)).collect();
        let max_v = v_c.iter().fold(0.0, |m: f64, c| m.max(c.abs()));
        Ok(Certificate {
            format_version: CERTIFICATE_FORMAT,
            n,
            k,
            mode,
            status: SolveStatus::Optimal,
            time_bound,
            u,
            basis,
            v: v_c,
            w: w_c,
            objective: 0.0,
            moment_value: 0.0,
            degenerate: max_v < DEGENERACY_THRESHOLD,
            warnings: Vec::new(),
            stats: SolverStats {
                backend: "manual".into(),
                ..SolverStats::default()
            },
        })
    }

    pub fn v_poly(&self) -> Polynomial {
        self.poly(&self.v)
    }

    pub fn w_poly(&self) -> Polynomial {
        self.poly(&self.w)
    }

    fn poly(&self, coeffs: &[f64]) -> Polynomial {
        Polynomial::from_terms(
            self.n,
            self.basis.iter().zip(coeffs).map(|(m, &c)| (m.exponents().to_vec(), c)),
        )
        .expect("basis dimension")
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.v.iter().chain(&self.w).fold(0.0, |m: f64, c| m.max(c.abs()))
    }

    pub fn max_abs_v_coeff(&self) -> f64 {
        self.v.iter().fold(0.0, |m: f64, c| m.max(c.abs()))
    }

    /// Whether `{v < 0}` may be read as an inner approximation of the MPI
    /// set: an optimal, non-degenerate solve with `u <= u_threshold` (always
    /// true in forced mode).
    pub fn claims_invariance(&self, u_threshold: f64) -> bool {
        self.is_optimal()
            && !self.degenerate
            && (self.mode == Mode::ForcedUZero || self.u <= u_threshold)
    }

    /// `x` in `int X` with `v(x) < 0`, or with `v(x) + u t < 0` when a
    /// horizon is given. A degenerate `v` has an empty inner set.
    pub fn inner_set_membership(&self, x_set: &SemialgebraicSet, x: &[f64], t: Option<f64>) -> Result<bool> {
        check_dim(self.n, x.len())?;
        if self.degenerate || x_set.contains(x)? != Membership::Interior {
            return Ok(false);
        }
        let v = self.v_poly().eval(x)?;
        Ok(match t {
            None => v < 0.0,
            Some(t) => v + self.u * t < 0.0,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Certificate> {
        let c: Certificate = serde_json::from_str(text)?;
        if c.format_version != CERTIFICATE_FORMAT {
            return Err(Error::InvalidArgument(format!(
                "unsupported certificate format {}",
                c.format_version
            )));
        }
        if c.v.len() != c.basis.len() || c.w.len() != c.basis.len() || c.basis.iter().any(|m| m.n() != c.n) {
            return Err(Error::InvalidArgument("certificate basis and coefficients disagree".into()));
        }
        Ok(c)
    }
}

/// Solves an assembled tightening and packages the result. Solver-side
/// failures come back as a certificate with a non-optimal status.
pub fn solve_tightening(t: &Tightening, backend: &dyn SdpBackend, options: &SolverOptions) -> Result<Certificate> {
    let sdp = t.program.compile();
    let sol = backend.solve(&sdp, options)?;
    let cert = certify(&sdp, &sol, options);

    let mut u = t.u.map_or(0.0, |id| sol.primal[id]);
    if (-U_CLAMP..0.0).contains(&u) {
        u = 0.0;
    }
    let v = t.v.coefficients(&sol.primal);
    let w = t.w.coefficients(&sol.primal);
    let mut warnings = Vec::new();
    if sol.status == SolveStatus::Optimal && !cert.passed() {
        warnings.push(format!(
            "independent check failed: min eigenvalue {:.3e}, relative residual {:.3e}, gap {:.3e}",
            cert.min_eigenvalue(),
            cert.rel_row_residual,
            cert.gap
        ));
    }
    if u < 0.0 {
        warnings.push(format!("negative slack u = {u:.3e}"));
    }
    let big = v.iter().chain(&w).fold(0.0, |m: f64, c| m.max(c.abs()));
    if big > LARGE_COEFF_WARNING {
        warnings.push(format!(
            "large coefficients (max |c| = {big:.3e}); the monomial basis may be ill-conditioned"
        ));
    }
    let max_v = v.iter().fold(0.0, |m: f64, c| m.max(c.abs()));
    let degenerate = max_v < DEGENERACY_THRESHOLD;
    if degenerate {
        warnings.push(format!("degenerate v (max |c| = {max_v:.3e}); no inner-set claim"));
    }
    for w in &warnings {
        log::warn!("k = {} ({}): {w}", t.k, t.mode);
    }

    Ok(Certificate {
        format_version: CERTIFICATE_FORMAT,
        n: t.program.n(),
        k: t.k,
        mode: t.mode,
        status: sol.status,
        time_bound: t.time_bound,
        u,
        basis: t.v.basis.clone(),
        v,
        w,
        objective: sol.primal_objective,
        moment_value: sol.dual_objective,
        degenerate,
        warnings,
        stats: SolverStats {
            backend: backend.name().to_string(),
            backend_status: sol.backend_status.clone(),
            iterations: sol.iterations,
            solve_time_s: sol.solve_time_s,
            num_vars: sdp.num_vars(),
            num_rows: sdp.rows.len(),
            num_blocks: sdp.blocks.len(),
            max_row_residual: sol.max_row_residual,
            rel_row_residual: sol.rel_row_residual,
            gap: sol.gap(),
            certification: cert,
        },
    })
}
