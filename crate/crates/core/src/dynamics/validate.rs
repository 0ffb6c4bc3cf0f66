use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::hierarchy::{Certificate, Mode, OdeSystem, U_NEAR_ZERO};
use crate::moments::MC_CHUNK;
use crate::poly::{PolyEvaluator, Polynomial};
use crate::semialgebraic::{ball_volume, uniform_in_ball, Membership, SemialgebraicSet};

use super::exit_time::{sample_interior, ExitTimeEstimate};
use super::integrate::{integrate, integrate_observed, Outcome, DEFAULT_STEP};

/// Independent random streams of one validation run.
const STREAM_INTERIOR: u64 = 1;
const STREAM_BOUNDARY: u64 = 2;
const STREAM_MEMBERS: u64 = 3;
const STREAM_VOLUME: u64 = 4;
const STREAM_FINITE: u64 = 5;

fn stream(seed: u64, s: u64) -> u64 {
    seed.wrapping_add(s << 32)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationConfig {
    pub interior_samples: usize,
    pub boundary_samples: usize,
    /// Member points integrated in the invariance check.
    pub invariance_samples: usize,
    /// Interior draws scanned for members.
    pub member_draws: usize,
    pub volume_samples: usize,
    /// `None`: `max(20, 5 T)` (20 in forced mode).
    pub sim_horizon: Option<f64>,
    pub step: f64,
    /// Slack on the descent condition along trajectories.
    pub descent_tol: f64,
    /// Residual tolerance is `residual_factor * s`.
    pub residual_factor: f64,
    /// Member margin is `margin_factor * (1 + max |coef v|)`.
    pub margin_factor: f64,
    /// Horizons of the finite-horizon check; `None`: `T/4, T/2, T`.
    pub finite_horizons: Option<Vec<f64>>,
    pub finite_samples: usize,
    pub seed: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            interior_samples: 10_000,
            boundary_samples: 1_000,
            invariance_samples: 2_000,
            member_draws: 100_000,
            volume_samples: 100_000,
            sim_horizon: None,
            step: DEFAULT_STEP,
            descent_tol: 1e-4,
            residual_factor: 1e-6,
            margin_factor: 1e-3,
            finite_horizons: None,
            finite_samples: 500,
            seed: 0,
        }
    }
}

impl ValidationConfig {
    pub fn sim_horizon_for(&self, cert: &Certificate) -> f64 {
        self.sim_horizon
            .unwrap_or_else(|| cert.time_bound.map_or(20.0, |t| (5.0 * t).max(20.0)))
    }
}

/// Minimum of each certified inequality over the sampled points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    /// `u - grad v . f` over interior and boundary points.
    pub lie_min: f64,
    /// `w - v - 1` over interior and boundary points.
    pub indicator_min: f64,
    /// `w` over interior and boundary points.
    pub w_min: f64,
    /// `v` over boundary points.
    pub boundary_v_min: f64,
    pub scale: f64,
    pub tolerance: f64,
    pub interior_points: usize,
    pub boundary_points: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceSummary {
    /// Whether staying inside was asserted (forced mode, or `u` near zero).
    pub asserts_invariance: bool,
    pub margin: f64,
    pub sim_horizon: f64,
    pub draws: usize,
    pub tested: usize,
    /// Trajectories that left `int X` (only counted when asserted).
    pub exits: usize,
    /// Trajectories where `v(x(t)) - u t` rose above its running minimum by
    /// more than the descent tolerance.
    pub descent_violations: usize,
    pub max_descent_excess: f64,
    /// Largest `|x0|` among tested members (margin rule).
    pub max_member_norm: f64,
    /// Draws in `{v < 0} ∩ int X`, no margin.
    pub inner_hits: usize,
    /// Largest `|x|` over those draws.
    pub max_inner_norm: f64,
    pub failures: usize,
    /// Up to a few failing initial states for diagnosis.
    pub failure_examples: Vec<Vec<f64>>,
    pub vacuous: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
    pub hits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteHorizonCheck {
    pub horizon: f64,
    pub tested: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub k: u32,
    pub mode: Mode,
    pub u: f64,
    pub config: ValidationConfig,
    pub residuals: ResidualSummary,
    pub invariance: InvarianceSummary,
    pub volume: VolumeEstimate,
    pub finite_horizon: Vec<FiniteHorizonCheck>,
    pub exit_time: Option<ExitTimeEstimate>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn invariance_failures(&self) -> usize {
        self.invariance.failures + self.finite_horizon.iter().map(|c| c.failures).sum::<usize>()
    }

    pub fn passed(&self) -> bool {
        self.residuals.passed && self.invariance_failures() == 0
    }
}

/// Evaluator of `v` and constraint membership for member tests.
struct InnerSet<'a> {
    x: &'a SemialgebraicSet,
    v: PolyEvaluator,
    /// False for degenerate certificates, whose inner set is empty.
    claimed: bool,
}

impl InnerSet<'_> {
    fn value(&self, p: &[f64]) -> f64 {
        self.v.eval(p)
    }

    /// `v(p) < -margin` for a claimed inner set.
    fn below(&self, p: &[f64], margin: f64) -> bool {
        self.claimed && self.value(p) < -margin
    }
}

/// Sampled, simulated checks of a certificate. Failures are recorded, never
/// raised; only dimension mismatches and sampling errors are `Err`.
pub fn validate_certificate(
    cert: &Certificate,
    system: &OdeSystem,
    x: &SemialgebraicSet,
    config: &ValidationConfig,
) -> Result<ValidationReport> {
    check_dim(cert.n, system.n())?;
    check_dim(cert.n, x.n())?;
    let mut notes = Vec::new();
    if cert.degenerate {
        notes.push("degenerate certificate: its inner set is taken to be empty".to_string());
    }
    if !cert.is_optimal() {
        notes.push(format!("solver status {:?}: checks describe the returned point only", cert.status));
    }
    if x.constraints().len() > 1 {
        // t_i+ g_i - t_i- g_i has no sign where another g_j vanishes
        notes.push("several constraints: the boundary identity does not force v >= 0 on the boundary".to_string());
    }

    let residuals = residual_summary(cert, system, x, config)?;
    let inner = InnerSet {
        x,
        v: cert.v_poly().evaluator(),
        claimed: !cert.degenerate,
    };
    let invariance = invariance_check(cert, system, &inner, config)?;
    if invariance.vacuous {
        notes.push("inner set has no sampled members; invariance holds vacuously".to_string());
    }
    if !invariance.asserts_invariance {
        notes.push(format!(
            "u = {:.3e} exceeds {U_NEAR_ZERO:e}; trajectories are checked for the descent bound only",
            cert.u
        ));
    }
    let volume = inner_volume(&inner, config.volume_samples, stream(config.seed, STREAM_VOLUME));
    let finite_horizon = finite_horizon_checks(cert, system, &inner, config)?;

    Ok(ValidationReport {
        k: cert.k,
        mode: cert.mode,
        u: cert.u,
        config: config.clone(),
        residuals,
        invariance,
        volume,
        finite_horizon,
        exit_time: None,
        notes,
    })
}

fn residual_summary(
    cert: &Certificate,
    system: &OdeSystem,
    x: &SemialgebraicSet,
    config: &ValidationConfig,
) -> Result<ResidualSummary> {
    let n = cert.n;
    let v = cert.v_poly();
    let w = cert.w_poly();
    let lie = Polynomial::constant(n, cert.u).sub(&v.lie_derivative(system.field())?)?;
    let indicator = w.sub(&v)?.sub(&Polynomial::constant(n, 1.0))?;
    let (lie_e, ind_e, w_e, v_e) = (lie.evaluator(), indicator.evaluator(), w.evaluator(), v.evaluator());

    let interior = sample_interior(x, config.interior_samples, stream(config.seed, STREAM_INTERIOR))?;
    let boundary = if config.boundary_samples > 0 {
        x.sample_boundary(config.boundary_samples, stream(config.seed, STREAM_BOUNDARY))?
    } else {
        Vec::new()
    };
    let min_over = |e: &PolyEvaluator, pts: &[Vec<f64>]| pts.iter().map(|p| e.eval(p)).fold(f64::INFINITY, f64::min);
    let all: Vec<Vec<f64>> = interior.iter().chain(&boundary).cloned().collect();
    let scale = 1.0 + cert.max_abs_coeff();
    let tolerance = config.residual_factor * scale;
    let lie_min = min_over(&lie_e, &all);
    let indicator_min = min_over(&ind_e, &all);
    let w_min = min_over(&w_e, &all);
    let boundary_v_min = min_over(&v_e, &boundary);
    let passed = [lie_min, indicator_min, w_min, boundary_v_min]
        .iter()
        .all(|&m| m >= -tolerance);
    Ok(ResidualSummary {
        lie_min,
        indicator_min,
        w_min,
        boundary_v_min,
        scale,
        tolerance,
        interior_points: interior.len(),
        boundary_points: boundary.len(),
        passed,
    })
}

struct TrajectoryCheck {
    exited: bool,
    descent_excess: f64,
}

/// Integrates from `x0` to `horizon`, tracking how far `v(x(t)) - u t`
/// rises above its running minimum.
fn check_trajectory(
    system: &OdeSystem,
    inner: &InnerSet<'_>,
    u: f64,
    x0: &[f64],
    horizon: f64,
    step: f64,
) -> Result<TrajectoryCheck> {
    let mut running_min = f64::INFINITY;
    let mut excess = 0.0f64;
    let r = integrate_observed(system, inner.x, x0, horizon, step, &[], |t, p| {
        let val = inner.value(p) - u * t;
        excess = excess.max(val - running_min);
        running_min = running_min.min(val);
    })?;
    let exited = !matches!(r.outcome, Outcome::StayedUntilHorizon) || r.min_constraint <= inner.x.boundary_tol();
    Ok(TrajectoryCheck {
        exited,
        descent_excess: excess,
    })
}

fn invariance_check(
    cert: &Certificate,
    system: &OdeSystem,
    inner: &InnerSet<'_>,
    config: &ValidationConfig,
) -> Result<InvarianceSummary> {
    let margin = config.margin_factor * (1.0 + cert.max_abs_v_coeff());
    let sim_horizon = config.sim_horizon_for(cert);
    let asserts_invariance = cert.mode == Mode::ForcedUZero || cert.u <= U_NEAR_ZERO;
    let candidates = sample_interior(inner.x, config.member_draws, stream(config.seed, STREAM_MEMBERS))?;
    let norm = |p: &[f64]| p.iter().map(|c| c * c).sum::<f64>().sqrt();
    let (inner_hits, max_inner_norm) = candidates
        .iter()
        .filter(|p| inner.below(p, 0.0))
        .fold((0, 0.0f64), |(k, m), p| (k + 1, m.max(norm(p))));
    let members: Vec<&Vec<f64>> = candidates
        .iter()
        .filter(|p| inner.below(p, margin))
        .take(config.invariance_samples)
        .collect();
    let checks = members
        .par_iter()
        .map(|p| check_trajectory(system, inner, cert.u, p, sim_horizon, config.step))
        .collect::<Result<Vec<_>>>()?;

    let mut exits = 0;
    let mut descent_violations = 0;
    let mut failures = 0;
    let mut failure_examples = Vec::new();
    let mut max_descent_excess = 0.0f64;
    for (p, c) in members.iter().zip(&checks) {
        let exit_fail = asserts_invariance && c.exited;
        let descent_fail = c.descent_excess > config.descent_tol;
        exits += usize::from(exit_fail);
        descent_violations += usize::from(descent_fail);
        max_descent_excess = max_descent_excess.max(c.descent_excess);
        if exit_fail || descent_fail {
            failures += 1;
            if failure_examples.len() < 5 {
                failure_examples.push((*p).clone());
            }
        }
    }
    let max_member_norm = members.iter().map(|p| norm(p)).fold(0.0, f64::max);
    Ok(InvarianceSummary {
        asserts_invariance,
        margin,
        sim_horizon,
        draws: candidates.len(),
        tested: members.len(),
        exits,
        descent_violations,
        max_descent_excess,
        max_member_norm,
        inner_hits,
        max_inner_norm,
        failures,
        failure_examples,
        vacuous: members.is_empty(),
    })
}

/// `lambda({v < 0} ∩ int X)` by uniform sampling of the enclosing ball.
fn inner_volume(inner: &InnerSet<'_>, samples: usize, seed: u64) -> VolumeEstimate {
    sampled_volume(inner.x, samples, seed, |p| inner.below(p, 0.0))
}

/// `lambda({x in int X : keep(x)})` from `samples` uniform draws over the
/// ball of `x`, in seeded chunks of [`MC_CHUNK`].
fn sampled_volume<F>(x: &SemialgebraicSet, samples: usize, seed: u64, keep: F) -> VolumeEstimate
where
    F: Fn(&[f64]) -> bool + Sync,
{
    let radius = x.ball_radius().expect("validated sets carry a ball");
    let n = x.n();
    let hits: usize = (0..samples.div_ceil(MC_CHUNK))
        .into_par_iter()
        .map(|j| {
            let count = MC_CHUNK.min(samples - j * MC_CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(j as u64));
            (0..count)
                .filter(|_| {
                    let p = uniform_in_ball(&mut rng, n, radius);
                    x.classify(&p) == Membership::Interior && keep(&p)
                })
                .count()
        })
        .sum();
    let vol = ball_volume(n, radius);
    let frac = if samples > 0 { hits as f64 / samples as f64 } else { 0.0 };
    VolumeEstimate {
        value: vol * frac,
        stderr: if samples > 0 { vol * (frac * (1.0 - frac) / samples as f64).sqrt() } else { 0.0 },
        samples,
        hits,
    }
}

/// Monte Carlo volume of `{v < 0} ∩ int X` (empty for degenerate `v`).
pub fn inner_set_volume(cert: &Certificate, x: &SemialgebraicSet, samples: usize, seed: u64) -> Result<VolumeEstimate> {
    check_dim(cert.n, x.n())?;
    x.ball_radius().ok_or(crate::Error::MissingBallConstraint)?;
    let v = cert.v_poly().evaluator();
    let claimed = !cert.degenerate;
    Ok(sampled_volume(x, samples, seed, |p| claimed && v.eval(p) < 0.0))
}

/// Monte Carlo volume of the symmetric difference of `{v_a < 0}` and
/// `{v_b < 0}` inside `int X`.
pub fn symmetric_difference(
    a: &Certificate,
    b: &Certificate,
    x: &SemialgebraicSet,
    samples: usize,
    seed: u64,
) -> Result<VolumeEstimate> {
    check_dim(a.n, x.n())?;
    check_dim(b.n, x.n())?;
    x.ball_radius().ok_or(crate::Error::MissingBallConstraint)?;
    let (va, vb) = (a.v_poly().evaluator(), b.v_poly().evaluator());
    let (ca, cb) = (!a.degenerate, !b.degenerate);
    Ok(sampled_volume(x, samples, seed, |p| {
        (ca && va.eval(p) < 0.0) != (cb && vb.eval(p) < 0.0)
    }))
}

/// For slack certificates with `u > 0`: points with `v + u t < -margin`
/// must not leave `int X` before `t`.
fn finite_horizon_checks(
    cert: &Certificate,
    system: &OdeSystem,
    inner: &InnerSet<'_>,
    config: &ValidationConfig,
) -> Result<Vec<FiniteHorizonCheck>> {
    let Some(tb) = cert.time_bound.filter(|_| cert.mode == Mode::SlackU && cert.u > 0.0) else {
        return Ok(Vec::new());
    };
    let horizons = config
        .finite_horizons
        .clone()
        .unwrap_or_else(|| vec![0.25 * tb, 0.5 * tb, tb]);
    let margin = config.margin_factor * (1.0 + cert.max_abs_v_coeff());
    let candidates = sample_interior(inner.x, config.member_draws, stream(config.seed, STREAM_FINITE))?;
    horizons
        .iter()
        .filter(|&&t| t > 0.0)
        .map(|&t| {
            let pts: Vec<&Vec<f64>> = candidates
                .iter()
                .filter(|p| inner.below(p, margin + cert.u * t))
                .take(config.finite_samples)
                .collect();
            let failures = pts
                .par_iter()
                .map(|p| Ok(integrate(system, inner.x, p, t, config.step)?.exit_time().is_some()))
                .collect::<Result<Vec<bool>>>()?
                .into_iter()
                .filter(|&f| f)
                .count();
            Ok(FiniteHorizonCheck {
                horizon: t,
                tested: pts.len(),
                failures,
            })
        })
        .collect()
}
