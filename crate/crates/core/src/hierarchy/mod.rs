//! Dual SOS tightenings over relaxation orders: assembly, solving, and
//! run-level convergence diagnostics.

mod certificate;
mod system;
mod tightening;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::moments::{moment_vector, DEFAULT_MC_SAMPLES};
use crate::sdp::{ClarabelBackend, SdpBackend, SolverOptions};
use crate::semialgebraic::SemialgebraicSet;

pub use certificate::{
    solve_tightening, Certificate, SolverStats, CERTIFICATE_FORMAT, DEGENERACY_THRESHOLD, LARGE_COEFF_WARNING,
    U_CLAMP,
};
pub use system::OdeSystem;
pub use tightening::{build_tightening, DegreeCaps, Mode, Tightening};

/// Slack below which a slack-mode certificate supports an infinite-horizon
/// claim.
pub const U_NEAR_ZERO: f64 = 1e-5;

/// Relative slack of the monotonicity check on objectives.
pub const MONOTONICITY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HierarchyOptions {
    pub solver: SolverOptions,
    /// Sample count of the Monte Carlo moment fallback.
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for HierarchyOptions {
    fn default() -> Self {
        HierarchyOptions {
            solver: SolverOptions::default(),
            mc_samples: DEFAULT_MC_SAMPLES,
            seed: 0,
        }
    }
}

/// Certificates of one mode and time bound over ascending orders.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HierarchyRun {
    pub mode: Mode,
    pub time_bound: Option<f64>,
    pub certificates: Vec<Certificate>,
    /// Consecutive optimal orders `(k, k')` with `d_k' > d_k + tol (1 + |d_k|)`.
    pub monotonicity_violations: Vec<(u32, u32)>,
    /// Consecutive optimal orders where `u` did not decrease (slack mode).
    pub u_not_decreasing: Vec<(u32, u32)>,
}

impl HierarchyRun {
    pub fn get(&self, k: u32) -> Option<&Certificate> {
        self.certificates.iter().find(|c| c.k == k)
    }

    pub fn all_optimal(&self) -> bool {
        self.certificates.iter().all(Certificate::is_optimal)
    }

    pub fn objectives(&self) -> Vec<(u32, f64)> {
        self.certificates.iter().map(|c| (c.k, c.objective)).collect()
    }
}

/// Solves the tightening for every order in `orders` (ascending, nonempty)
/// with the default backend.
pub fn run_hierarchy(
    system: &OdeSystem,
    x: &SemialgebraicSet,
    orders: &[u32],
    time_bound: f64,
    mode: Mode,
    options: &HierarchyOptions,
) -> Result<HierarchyRun> {
    run_hierarchy_with(&ClarabelBackend, system, x, orders, time_bound, mode, options)
}

pub fn run_hierarchy_with(
    backend: &dyn SdpBackend,
    system: &OdeSystem,
    x: &SemialgebraicSet,
    orders: &[u32],
    time_bound: f64,
    mode: Mode,
    options: &HierarchyOptions,
) -> Result<HierarchyRun> {
    check_dim(system.n(), x.n())?;
    let Some(&k_max) = orders.last() else {
        return Err(Error::InvalidArgument("empty range of relaxation orders".into()));
    };
    if orders.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!("orders must be strictly ascending: {orders:?}")));
    }
    let moments = moment_vector(x, 2 * k_max, options.mc_samples, options.seed)?;
    // Assemble everything up front so structural errors surface before any solve.
    let tightenings = orders
        .iter()
        .map(|&k| build_tightening(system, x, k, time_bound, mode, &moments))
        .collect::<Result<Vec<_>>>()?;

    let mut certificates = tightenings
        .par_iter()
        .map(|t| solve_tightening(t, backend, &options.solver))
        .collect::<Result<Vec<_>>>()?;
    certificates.sort_by_key(|c| c.k);
    for c in &certificates {
        log::info!(
            "k = {} ({}): {:?}, objective {:.9}, u = {:.3e}, {} iterations, {:.2}s",
            c.k,
            c.mode,
            c.status,
            c.objective,
            c.u,
            c.stats.iterations,
            c.stats.solve_time_s
        );
    }

    let optimal: Vec<&Certificate> = certificates.iter().filter(|c| c.is_optimal()).collect();
    let mut monotonicity_violations = Vec::new();
    let mut u_not_decreasing = Vec::new();
    for pair in optimal.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b.objective > a.objective + MONOTONICITY_TOL * (1.0 + a.objective.abs()) {
            monotonicity_violations.push((a.k, b.k));
        }
        if mode == Mode::SlackU && b.u > a.u && b.u > U_NEAR_ZERO {
            u_not_decreasing.push((a.k, b.k));
        }
    }
    for (a, b) in &monotonicity_violations {
        log::warn!("objective increased from k = {a} to k = {b}");
    }

    Ok(HierarchyRun {
        mode,
        time_bound: (mode == Mode::SlackU).then_some(time_bound),
        certificates,
        monotonicity_violations,
        u_not_decreasing,
    })
}

/// Orders of an optimal slack-mode run whose `u` passes the near-zero
/// threshold; these are re-solved in forced mode for the cross-check.
pub fn near_zero_orders(run: &HierarchyRun) -> Vec<u32> {
    run.certificates
        .iter()
        .filter(|c| c.mode == Mode::SlackU && c.is_optimal() && c.u <= U_NEAR_ZERO)
        .map(|c| c.k)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::SolveStatus;

    fn opts() -> HierarchyOptions {
        HierarchyOptions::default()
    }

    #[test]
    fn contraction_forced_mode_low_orders() {
        let f = OdeSystem::radial(2, -1.0);
        let x = SemialgebraicSet::ball(2, 1.0).unwrap();
        let run = run_hierarchy(&f, &x, &[1, 2], 1.0, Mode::ForcedUZero, &opts()).unwrap();
        assert_eq!(run.certificates.len(), 2);
        assert!(run.all_optimal(), "{:?}", run.objectives());
        assert!(run.monotonicity_violations.is_empty());
        for c in &run.certificates {
            assert_eq!(c.u, 0.0);
            assert!(c.stats.certification.passed(), "{:?}", c.stats.certification);
            assert!((c.objective - c.moment_value).abs() <= 10.0 * 1e-8 * (1.0 + c.objective.abs()));
            assert!(c.inner_set_membership(&x, &[0.0, 0.0], None).unwrap());
            assert!(!c.inner_set_membership(&x, &[1.0, 0.0], None).unwrap());
        }
    }

    #[test]
    fn rejects_bad_order_ranges() {
        let f = OdeSystem::radial(2, -1.0);
        let x = SemialgebraicSet::ball(2, 1.0).unwrap();
        assert!(run_hierarchy(&f, &x, &[], 1.0, Mode::ForcedUZero, &opts()).is_err());
        assert!(run_hierarchy(&f, &x, &[2, 1], 1.0, Mode::ForcedUZero, &opts()).is_err());
        assert!(run_hierarchy(&f, &x, &[0, 1], 1.0, Mode::ForcedUZero, &opts()).is_err());
    }

    #[test]
    fn certificate_json_round_trip() {
        let f = OdeSystem::radial(2, 1.0);
        let x = SemialgebraicSet::ball(2, 1.0).unwrap();
        let run = run_hierarchy(&f, &x, &[1], 2.0, Mode::SlackU, &opts()).unwrap();
        let c = &run.certificates[0];
        assert_eq!(c.status, SolveStatus::Optimal);
        let back = Certificate::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back.v, c.v);
        assert_eq!(back.basis, c.basis);
        assert_eq!(back.mode, Mode::SlackU);
        assert_eq!(back.time_bound, Some(2.0));
        let mut bad: serde_json::Value = serde_json::from_str(&c.to_json().unwrap()).unwrap();
        bad["format_version"] = 99.into();
        assert!(Certificate::from_json(&bad.to_string()).is_err());
    }

    #[test]
    fn membership_with_horizon() {
        let f = OdeSystem::radial(2, 1.0);
        let x = SemialgebraicSet::ball(2, 1.0).unwrap();
        let mut c = run_hierarchy(&f, &x, &[1], 2.0, Mode::SlackU, &opts()).unwrap().certificates[0].clone();
        // v = -0.05 constant, u = 0.1
        c.v = vec![0.0; c.basis.len()];
        c.v[0] = -0.05;
        c.u = 0.1;
        // the solved v is numerically zero, hence degenerate with an empty inner set
        assert!(c.degenerate);
        assert!(!c.inner_set_membership(&x, &[0.2, 0.1], None).unwrap());
        c.degenerate = false;
        assert!(!c.inner_set_membership(&x, &[0.2, 0.1], Some(1.0)).unwrap());
        assert!(c.inner_set_membership(&x, &[0.2, 0.1], Some(0.4)).unwrap());
        assert!(c.inner_set_membership(&x, &[0.2, 0.1], None).unwrap());
        assert!(c.inner_set_membership(&x, &[0.2], None).is_err());
    }
}
